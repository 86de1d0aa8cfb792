#include "qcnn/qnn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qcnn {

QuaternionPlanes::QuaternionPlanes(Tensor r_, Tensor x_, Tensor y_, Tensor z_)
    : r(std::move(r_)), x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {
  if (x.shape() != r.shape() || y.shape() != r.shape() || z.shape() != r.shape()) {
    throw std::invalid_argument("QuaternionPlanes: component planes must share one shape");
  }
}

void QuaternionPlanes::set(std::size_t i, const Quaternion& q) {
  r[i] = q.r;
  x[i] = q.x;
  y[i] = q.y;
  z[i] = q.z;
}

QuaternionPlanes QTensor::values() const { return {r.value(), x.value(), y.value(), z.value()}; }

std::size_t channel_axis(const Shape& shape) {
  if (shape.size() == 4) return 1;
  if (shape.size() == 2) return 0;
  throw std::invalid_argument("quaternion activation must be rank 2 or 4, got " + shape_str(shape));
}

QTensor as_constant(Tape& tape, const QuaternionPlanes& p) {
  return {tape.constant(p.r), tape.constant(p.x), tape.constant(p.y), tape.constant(p.z)};
}

QTensor as_parameter(Tape& tape, const QuaternionPlanes& p) {
  return {tape.parameter(p.r), tape.parameter(p.x), tape.parameter(p.y), tape.parameter(p.z)};
}

QConvLayer::QConvLayer(std::size_t out_q, std::size_t in_q, std::size_t kh, std::size_t kw, bool with_bias,
                       Conv2dGeometry geometry_)
    : weight(Shape{out_q, in_q, kh, kw}), geometry(geometry_) {
  if (with_bias) bias = QuaternionPlanes(Shape{out_q});
}

QDenseLayer::QDenseLayer(std::size_t out_q, std::size_t in_q, bool with_bias) : weight(Shape{out_q, in_q}) {
  if (with_bias) bias = QuaternionPlanes(Shape{out_q});
}

namespace {

void check_planes(const char* op, const QTensor& q) {
  for (const Var& v : q.planes()) {
    if (v.shape() != q.r.shape()) {
      throw std::invalid_argument(std::string(op) + ": component planes differ in shape");
    }
  }
}

QTensor add_quaternion_bias(const QTensor& q, const QTensor& bias, std::size_t axis) {
  return {add_bias(q.r, bias.r, axis), add_bias(q.x, bias.x, axis), add_bias(q.y, bias.y, axis),
          add_bias(q.z, bias.z, axis)};
}

}  // namespace

QTensor qconv2d(const QTensor& input, const QTensor& kernel, const std::optional<QTensor>& bias,
                const Conv2dGeometry& geometry) {
  check_planes("qconv2d", input);
  check_planes("qconv2d", kernel);
  if (input.shape().size() != 4 || kernel.shape().size() != 4 || input.shape()[1] != kernel.shape()[1]) {
    throw std::invalid_argument("qconv2d: input " + shape_str(input.shape()) + " incompatible with kernel " +
                                shape_str(kernel.shape()));
  }
  QTensor out = hamilton(kernel, input, [&](const Var& k, const Var& x) { return conv2d(x, k, geometry); });
  if (bias) out = add_quaternion_bias(out, *bias, 1);
  return out;
}

QTensor qdense(const QTensor& input, const QTensor& weight, const std::optional<QTensor>& bias) {
  check_planes("qdense", input);
  check_planes("qdense", weight);
  if (input.shape().size() != 2 || weight.shape().size() != 2 || weight.shape()[1] != input.shape()[0]) {
    throw std::invalid_argument("qdense: weight " + shape_str(weight.shape()) + " incompatible with input " +
                                shape_str(input.shape()));
  }
  QTensor out = hamilton(weight, input, [](const Var& w, const Var& x) { return matmul(w, x); });
  if (bias) out = add_quaternion_bias(out, *bias, 0);
  return out;
}

QTensor split_activation(const QTensor& input, const ScalarActivation& act) {
  return {apply(input.r, act), apply(input.x, act), apply(input.y, act), apply(input.z, act)};
}

QTensor prelu(const QTensor& input, const Var& slopes) {
  const std::size_t axis = channel_axis(input.shape());
  return {prelu(input.r, slopes, axis), prelu(input.x, slopes, axis), prelu(input.y, slopes, axis),
          prelu(input.z, slopes, axis)};
}

QTensor split_maxpool_freq(const QTensor& input, std::size_t pool_width) {
  if (input.shape().size() != 4) {
    throw std::invalid_argument("split_maxpool_freq: expected (batch, q, freq, time), got " +
                                shape_str(input.shape()));
  }
  return {max_pool_axis(input.r, 2, pool_width), max_pool_axis(input.x, 2, pool_width),
          max_pool_axis(input.y, 2, pool_width), max_pool_axis(input.z, 2, pool_width)};
}

QTensor quaternion_dropout(const QTensor& input, double rate, std::mt19937_64& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("quaternion_dropout: rate must lie in [0, 1)");
  }
  if (!training || rate == 0.0) return input;
  Tensor mask(input.shape());
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale_kept = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = keep(rng) ? scale_kept : 0.0;
  return {mul_constant(input.r, mask), mul_constant(input.x, mask), mul_constant(input.y, mask),
          mul_constant(input.z, mask)};
}

double init_sigma(const InitSpec& spec) {
  if (spec.n_in == 0) throw std::invalid_argument("init_sigma: n_in must be >= 1");
  switch (spec.criterion) {
    case InitCriterion::He:
      return 1.0 / std::sqrt(2.0 * static_cast<double>(spec.n_in));
    case InitCriterion::Glorot:
      return 1.0 / std::sqrt(2.0 * static_cast<double>(spec.n_in + spec.n_out));
  }
  throw std::invalid_argument("init_sigma: unknown criterion");
}

Quaternion polar_weight(double phi, double theta, const Quaternion& direction) {
  const double s = phi * std::sin(theta);
  return {phi * std::cos(theta), s * direction.x, s * direction.y, s * direction.z};
}

PolarDraw draw_polar(double sigma, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit_interval(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::chi_squared_distribution<double> chi2(4.0);

  Quaternion imag;
  do {
    imag = {0.0, unit_interval(rng), unit_interval(rng), unit_interval(rng)};
  } while (norm(imag) == 0.0);
  const Quaternion direction = unit(imag);
  const double theta = angle(rng);
  const double phi = sigma * std::sqrt(chi2(rng));
  return {phi, theta, direction, polar_weight(phi, theta, direction)};
}

QuaternionPlanes quaternion_init(const InitSpec& spec, const Shape& shape) {
  const double sigma = init_sigma(spec);
  std::mt19937_64 rng(spec.seed);
  QuaternionPlanes w(shape);
  for (std::size_t i = 0; i < w.size(); ++i) w.set(i, draw_polar(sigma, rng).weight);
  return w;
}

}  // namespace qcnn
