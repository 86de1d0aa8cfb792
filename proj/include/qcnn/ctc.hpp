#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qcnn/autodiff.hpp"
#include "qcnn/tensor.hpp"

namespace qcnn {

using Labels = std::vector<std::size_t>;

/// Output symbols plus one reserved blank class. Class indices run over
/// [0, size()), with `blank()` distinct from every named symbol.
class SymbolTable {
 public:
  SymbolTable() = default;
  /// Blank is appended after the named symbols.
  explicit SymbolTable(std::vector<std::string> symbols);

  std::size_t size() const { return names_.size() + 1; }
  std::size_t blank() const { return names_.size(); }
  const std::vector<std::string>& symbols() const { return names_; }

  /// Throws std::out_of_range for unknown names.
  std::size_t index_of(const std::string& name) const;
  const std::string& name_of(std::size_t index) const;

  Labels encode(std::span<const std::string> names) const;
  std::vector<std::string> decode(std::span<const std::size_t> labels) const;

  friend bool operator==(const SymbolTable&, const SymbolTable&) = default;

 private:
  std::vector<std::string> names_;
};

/// Many-to-one path collapse: merge consecutive repeats, then drop blanks.
Labels collapse(std::span<const std::size_t> latent, std::size_t blank);

/// Fewest frames any path needs to emit `target`: its length plus one blank
/// between each pair of equal neighbours.
std::size_t min_frames(std::span<const std::size_t> target);

struct CtcResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits, same shape as logits
};

/// -log P(target | logits) over all latent paths that collapse to `target`,
/// computed with a log-space forward-backward recursion. `logits` is
/// [frames x classes] (time-major, pre-softmax).
///
/// Throws std::invalid_argument for an empty target or a label out of range,
/// and InfeasibleAlignment when the frames cannot fit the target.
CtcResult ctc_loss(const Tensor& logits, std::span<const std::size_t> target, std::size_t blank);

/// Per-frame argmax (lowest index wins ties) followed by collapse.
Labels best_path_decode(const Tensor& logits, std::size_t blank);

/// Per-frame argmax of rows [first_row, first_row + frames).
Labels frame_argmax(const Tensor& logits, std::size_t first_row, std::size_t frames);

struct CtcExample {
  const Tensor* logits;
  Labels target;
};

struct BatchCtcResult {
  double sum = 0.0;
  double mean = 0.0;
  std::vector<Tensor> grads;  // gradient of the summed loss per example
};

/// Sum and mean of per-example losses. InfeasibleAlignment carries the
/// offending example index.
BatchCtcResult batch_ctc_loss(std::span<const CtcExample> batch, std::size_t blank);

/// One utterance inside a stacked [total_frames x classes] logit matrix.
struct CtcSegment {
  std::size_t first_row = 0;
  std::size_t frames = 0;
  Labels target;
};

enum class CtcReduction { Sum, Mean };

/// Tape operation: summed (or averaged) CTC loss of several segments of one
/// logit matrix. Rows outside every segment receive zero gradient.
Var ctc_loss(const Var& logits, std::span<const CtcSegment> segments, std::size_t blank,
             CtcReduction reduction = CtcReduction::Sum);

}  // namespace qcnn
