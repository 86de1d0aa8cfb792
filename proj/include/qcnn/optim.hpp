#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qcnn/tensor.hpp"

namespace qcnn {

enum class OptimizerKind : std::uint8_t { Adam = 0, Sgd = 1 };

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  OptimizerKind mode = OptimizerKind::Adam;
  AdamParams adam;
  double sgd_lr = 1e-5;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // Adam first moments, one per parameter
  std::vector<Tensor> v;  // Adam second moments

  /// Zeroed moments shaped like `params`.
  void reset_moments(std::span<const Tensor* const> params);
};

/// grads[i] += 2 * l2 * params[i] where regularized[i] is set.
void add_l2(std::span<const Tensor* const> params, const std::vector<bool>& regularized, double l2,
            std::span<Tensor> grads);

/// Throws NumericalError naming the first parameter with a non-finite gradient.
void check_finite(std::span<const Tensor> grads, std::span<const std::string> names);

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state);
void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state);

}  // namespace qcnn
