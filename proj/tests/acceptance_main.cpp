#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "oracles/acceptance.hpp"

// Usage: qcnn_acceptance [criterion ids...]
int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    try {
      ids.push_back(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::cerr << "usage: qcnn_acceptance [criterion ids...]\n";
      return 1;
    }
  }
  const auto results = qcnn::acceptance::run(ids, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << "summary passed=" << passed << " total=" << results.size() << std::endl;
  return passed == results.size() ? EXIT_SUCCESS : EXIT_FAILURE;
}
