#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace qcnn {

/// Malformed or missing input data: files, manifests, checkpoints.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values reached an optimizer step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A target cannot be aligned to the available frames.
class InfeasibleAlignment : public std::invalid_argument {
 public:
  static constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

  InfeasibleAlignment(const std::string& what, std::size_t example_index = kNoIndex)
      : std::invalid_argument(what), example_index_(example_index) {}

  std::size_t example_index() const { return example_index_; }

 private:
  std::size_t example_index_;
};

}  // namespace qcnn
