#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace qcnn::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Criterion {
  int id;
  std::string name;
  std::function<CriterionResult()> run;
  double limit_seconds;  // wall-clock budget; exceeding it fails the criterion
};

// The nine end-to-end checks, in order.
const std::vector<Criterion>& criteria();

// Runs the selected ids (all when empty), printing one line per criterion.
std::vector<CriterionResult> run(const std::vector<int>& ids, std::ostream& out);

std::string format(const CriterionResult& r);

// Gradient checks shared with the unit tests: name -> worst relative error.
struct GradReport {
  std::string name;
  double max_rel_error;
  std::size_t checked;
};
std::vector<GradReport> layer_gradient_checks();
GradReport model_gradient_check();

}  // namespace qcnn::acceptance
