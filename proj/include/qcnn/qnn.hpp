#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>

#include "qcnn/autodiff.hpp"
#include "qcnn/quaternion.hpp"
#include "qcnn/tensor.hpp"

namespace qcnn {

/// Four real component planes of one shape, outside any tape.
struct QuaternionPlanes {
  Tensor r, x, y, z;

  QuaternionPlanes() = default;
  explicit QuaternionPlanes(const Shape& shape) : r(shape), x(shape), y(shape), z(shape) {}
  QuaternionPlanes(Tensor r_, Tensor x_, Tensor y_, Tensor z_);

  const Shape& shape() const { return r.shape(); }
  std::size_t size() const { return r.size(); }
  bool empty() const { return r.empty(); }
  std::array<const Tensor*, 4> planes() const { return {&r, &x, &y, &z}; }
  std::array<Tensor*, 4> planes() { return {&r, &x, &y, &z}; }

  Quaternion get(std::size_t i) const { return {r[i], x[i], y[i], z[i]}; }
  void set(std::size_t i, const Quaternion& q);

  friend bool operator==(const QuaternionPlanes&, const QuaternionPlanes&) = default;
};

/// Quaternion tensor on a tape: four variables sharing one shape. Activations
/// use (batch, q_channels, freq, time); dense activations use (units, frames).
struct QTensor {
  Var r, x, y, z;

  const Shape& shape() const { return r.shape(); }
  std::array<Var, 4> planes() const { return {r, x, y, z}; }
  QuaternionPlanes values() const;
};

/// Channel axis of a quaternion activation: 1 for 4-D, 0 for 2-D.
std::size_t channel_axis(const Shape& shape);

QTensor as_constant(Tape& tape, const QuaternionPlanes& planes);
QTensor as_parameter(Tape& tape, const QuaternionPlanes& planes);

/// Quaternion convolution kernel [out_q x in_q x kh x kw] per plane plus an
/// optional quaternion bias [out_q] per plane.
struct QConvLayer {
  QuaternionPlanes weight;
  QuaternionPlanes bias;
  Conv2dGeometry geometry;

  QConvLayer() = default;
  QConvLayer(std::size_t out_q, std::size_t in_q, std::size_t kh, std::size_t kw, bool with_bias,
             Conv2dGeometry geometry);

  std::size_t out_q() const { return weight.shape()[0]; }
  std::size_t in_q() const { return weight.shape()[1]; }
  bool has_bias() const { return !bias.empty(); }
  std::size_t weight_count() const { return 4 * weight.size(); }
  std::size_t param_count() const { return weight_count() + 4 * bias.size(); }
};

/// Quaternion dense layer: weight [out_q x in_q] per plane, optional bias [out_q].
struct QDenseLayer {
  QuaternionPlanes weight;
  QuaternionPlanes bias;

  QDenseLayer() = default;
  QDenseLayer(std::size_t out_q, std::size_t in_q, bool with_bias);

  std::size_t out_q() const { return weight.shape()[0]; }
  std::size_t in_q() const { return weight.shape()[1]; }
  bool has_bias() const { return !bias.empty(); }
  std::size_t weight_count() const { return 4 * weight.size(); }
  std::size_t param_count() const { return weight_count() + 4 * bias.size(); }
};

/// Real-valued counterparts, used for the parameter-count comparison.
struct RealConvShape {
  std::size_t out_ch, in_ch, kh, kw;
  bool bias;
  std::size_t weight_count() const { return out_ch * in_ch * kh * kw; }
  std::size_t param_count() const { return weight_count() + (bias ? out_ch : 0); }
};

struct RealDenseShape {
  std::size_t out, in;
  bool bias;
  std::size_t weight_count() const { return out * in; }
  std::size_t param_count() const { return weight_count() + (bias ? out : 0); }
};

/// Hamilton product W ⊗ X with every real product term delegated to `op`:
///   r' = Rr - Xx - Yy - Zz
///   x' = Rx + Xr + Yz - Zy
///   y' = Ry - Xz + Yr + Zx
///   z' = Rz + Xy - Yx + Zr
template <typename RealOp>
QTensor hamilton(const QTensor& w, const QTensor& in, RealOp op) {
  return {
      sub(sub(sub(op(w.r, in.r), op(w.x, in.x)), op(w.y, in.y)), op(w.z, in.z)),
      sub(add(add(op(w.r, in.x), op(w.x, in.r)), op(w.y, in.z)), op(w.z, in.y)),
      add(add(sub(op(w.r, in.y), op(w.x, in.z)), op(w.y, in.r)), op(w.z, in.x)),
      add(sub(add(op(w.r, in.z), op(w.x, in.y)), op(w.y, in.x)), op(w.z, in.r)),
  };
}

/// Quaternion convolution of input (batch, in_q, F, T) with kernel planes
/// [out_q x in_q x kh x kw]; bias planes [out_q] are added per component.
QTensor qconv2d(const QTensor& input, const QTensor& kernel, const std::optional<QTensor>& bias,
                const Conv2dGeometry& geometry);

/// Hamilton matrix-vector product: input (in_q, N) columns, weight (out_q, in_q).
QTensor qdense(const QTensor& input, const QTensor& weight, const std::optional<QTensor>& bias);

QTensor split_activation(const QTensor& input, const ScalarActivation& act);

/// PReLU with one slope per quaternion channel shared by all four components.
QTensor prelu(const QTensor& input, const Var& slopes);

/// Component-wise max over non-overlapping frequency windows (axis 2); the
/// time axis is untouched and a ragged frequency tail is dropped.
QTensor split_maxpool_freq(const QTensor& input, std::size_t pool_width);

/// Inverted dropout with one Bernoulli mask entry per quaternion unit, shared
/// by the four components. Identity when `training` is false or rate is 0.
QTensor quaternion_dropout(const QTensor& input, double rate, std::mt19937_64& rng, bool training);

enum class InitCriterion { He, Glorot };

struct InitSpec {
  InitCriterion criterion = InitCriterion::He;
  std::size_t n_in = 1;
  std::size_t n_out = 1;
  std::uint64_t seed = 0;
};

/// He: 1/sqrt(2 n_in). Glorot: 1/sqrt(2 (n_in + n_out)).
double init_sigma(const InitSpec& spec);

/// One polar-form weight w = phi (cos theta + n sin theta).
struct PolarDraw {
  double phi;
  double theta;
  Quaternion direction;  // unit, purely imaginary
  Quaternion weight;
};

/// w_r = phi cos(theta), (w_i, w_j, w_k) = phi sin(theta) * direction.
Quaternion polar_weight(double phi, double theta, const Quaternion& direction);

/// Draws the imaginary direction from U[0,1]^3 (zero draws re-sampled),
/// theta ~ U[-pi, pi] and phi = sigma * Chi(4).
PolarDraw draw_polar(double sigma, std::mt19937_64& rng);

QuaternionPlanes quaternion_init(const InitSpec& spec, const Shape& shape);

}  // namespace qcnn
