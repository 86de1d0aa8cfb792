#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "qcnn/tensor.hpp"

namespace qcnn {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Arguments handed to a backward rule. `in_grads[i]` is null when input i
/// does not need a gradient; rules accumulate into the non-null ones.
struct BackwardContext {
  const Tensor& out_value;
  const Tensor& out_grad;
  std::span<const Tensor* const> in_values;
  std::span<Tensor* const> in_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Define-by-run record of executed operations. Nodes are appended in
/// execution order, so reverse insertion order is a reverse topological order.
/// Single owner; not thread-safe. Independent tapes may run concurrently.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Appends an operation result. The backward rule is dropped when no input
  /// requires a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse sweep from a one-element loss. Throws std::invalid_argument
  /// for non-scalar losses or a loss from another tape.
  void backward(const Var& loss);

  /// Gradient accumulated for `v` by the last backward(); zeros if none reached it.
  Tensor grad(const Var& v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  const Node& node(const Var& v) const;

  std::deque<Node> nodes_;
};

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;

  /// Zero padding that keeps spatial extents unchanged for odd kernels at stride 1.
  static Conv2dGeometry same(std::size_t kh, std::size_t kw) { return {1, 1, kh / 2, kw / 2}; }
};

/// Output extent of one convolution axis; throws std::invalid_argument when the
/// padded input is smaller than the kernel.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Real scalar function with its derivative, used by split activations.
struct ScalarActivation {
  std::function<double(double)> f;
  std::function<double(double)> df;

  static ScalarActivation identity();
  static ScalarActivation relu();
  static ScalarActivation tanh();
};

// Elementwise. Shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var neg(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var apply(const Var& a, const ScalarActivation& act);

/// Elementwise product with a constant tensor (masks, dropout).
Var mul_constant(const Var& a, const Tensor& c);

/// Adds a 1-D `bias` broadcast along `axis` of `a`.
Var add_bias(const Var& a, const Var& bias, std::size_t axis);

/// PReLU with one slope per index of `axis`: v > 0 ? v : slope * v.
Var prelu(const Var& a, const Var& slopes, std::size_t axis);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// Cross-correlation of input [batch x cin x H x W] with kernel [cout x cin x kh x kw].
Var conv2d(const Var& input, const Var& kernel, const Conv2dGeometry& geometry);

Var sum(const Var& a);
Var reduce_max(const Var& a);
Var softmax(const Var& a, std::size_t axis);
Var log_softmax(const Var& a, std::size_t axis);

/// Max over non-overlapping windows of `width` along `axis`; a ragged tail is dropped.
Var max_pool_axis(const Var& a, std::size_t axis, std::size_t width);

/// [B x C x F x T] -> [(C*F) x (B*T)]: one column per frame.
Var frames_to_matrix(const Var& a);

/// Stacks 2-D tensors with equal column counts vertically.
Var concat_rows(const std::vector<Var>& parts);

/// Zeroes positions t >= lengths[b] of a [B x ... x T] tensor.
Var time_mask(const Var& a, std::span<const std::size_t> lengths);

}  // namespace qcnn
