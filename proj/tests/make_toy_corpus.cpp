#include <iostream>

#include "oracles/synthetic.hpp"

// Writes the synthetic tone corpus (WAV files + manifest) for CLI tests.
int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_toy_corpus DIR [utterances]\n";
    return 1;
  }
  qcnn::synthetic::ToySpec spec;
  if (argc > 2) spec.utterances = std::stoul(argv[2]);
  std::cout << qcnn::synthetic::write_toy_corpus(argv[1], spec).string() << '\n';
  return 0;
}
