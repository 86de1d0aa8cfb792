#include "qcnn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qcnn/errors.hpp"

namespace qcnn {

namespace {

void require_match(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape()) {
      throw std::invalid_argument("optimizer: gradient " + std::to_string(i) + " shape " +
                                  shape_str(grads[i].shape()) + " vs parameter " + shape_str(params[i]->shape()));
    }
  }
}

}  // namespace

void OptimizerState::reset_moments(std::span<const Tensor* const> params) {
  m.clear();
  v.clear();
  for (const Tensor* p : params) {
    m.emplace_back(p->shape());
    v.emplace_back(p->shape());
  }
}

void add_l2(std::span<const Tensor* const> params, const std::vector<bool>& regularized, double l2,
            std::span<Tensor> grads) {
  if (l2 == 0.0) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!regularized[i]) continue;
    const Tensor& p = *params[i];
    Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) g[k] += 2.0 * l2 * p[k];
  }
}

void check_finite(std::span<const Tensor> grads, std::span<const std::string> names) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      if (!std::isfinite(grads[i][k])) {
        const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
        throw NumericalError("non-finite gradient in " + name + " at element " + std::to_string(k) + " (value " +
                             std::to_string(grads[i][k]) + "); step aborted");
      }
    }
  }
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state) {
  require_match(params, grads);
  if (state.m.size() != params.size()) {
    std::vector<const Tensor*> view(params.begin(), params.end());
    state.reset_moments(view);
  }
  const AdamParams& h = state.adam;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw std::invalid_argument("adam_step: moment buffers do not match parameter " + std::to_string(i));
    }
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

void sgd_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state) {
  require_match(params, grads);
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= state.sgd_lr * g[k];
  }
}

}  // namespace qcnn
