#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/acceptance.hpp"
#include "oracles/oracles.hpp"
#include "qcnn/qnn.hpp"

using namespace qcnn;

namespace {

QuaternionPlanes single_kernel(const Quaternion& q) {
  QuaternionPlanes k(Shape{1, 1, 1, 1});
  k.set(0, q);
  return k;
}

}  // namespace

TEST_CASE("qconv2d with 1x1 unit kernels") {
  const QuaternionPlanes x = oracle::random_planes({2, 1, 3, 4}, 1);
  Tape tape;
  const QTensor in = as_constant(tape, x);
  const QTensor same = qconv2d(in, as_constant(tape, single_kernel({1, 0, 0, 0})), std::nullopt, {});
  CHECK(same.values() == x);

  // Kernel i: r' = -x, x' = r, y' = -z, z' = y.
  const QuaternionPlanes y = qconv2d(in, as_constant(tape, single_kernel({0, 1, 0, 0})), std::nullopt, {}).values();
  for (std::size_t n = 0; n < x.size(); ++n) {
    const Quaternion a = x.get(n), b = y.get(n);
    CHECK(b == Quaternion{-a.x, a.r, -a.z, a.y});
    CHECK(b == Quaternion{0, 1, 0, 0} * a);
  }
}

TEST_CASE("qconv2d matches the block real convolution") {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 10; ++n) {
    QConvLayer layer(3, 2, 3, 5, true, Conv2dGeometry::same(3, 5));
    layer.weight = oracle::random_planes(layer.weight.shape(), rng());
    layer.bias = oracle::random_planes(layer.bias.shape(), rng());
    const QuaternionPlanes x = oracle::random_planes({2, 2, 7, 6}, rng());
    Tape tape;
    const QTensor y = qconv2d(as_constant(tape, x), as_constant(tape, layer.weight), as_constant(tape, layer.bias),
                              layer.geometry);
    const QuaternionPlanes ref = oracle::block_qconv2d(x, layer);
    for (int c = 0; c < 4; ++c) CHECK(max_abs_diff(*y.values().planes()[c], *ref.planes()[c]) < 1e-10);
  }
}

TEST_CASE("qdense worked example, identity and block oracle") {
  Tape tape;
  QuaternionPlanes w(Shape{1, 1}), x(Shape{1, 1});
  w.set(0, {1, 2, 3, 4});
  x.set(0, {5, 6, 7, 8});
  const QTensor y = qdense(as_constant(tape, x), as_constant(tape, w), std::nullopt);
  CHECK(y.values().get(0) == Quaternion{-60, 12, 30, 24});

  QuaternionPlanes eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.set(i * 3 + i, {1, 0, 0, 0});
  const QuaternionPlanes in = oracle::random_planes({3, 5}, 3);
  CHECK(qdense(as_constant(tape, in), as_constant(tape, eye), std::nullopt).values() == in);

  QDenseLayer layer(4, 6, true);
  layer.weight = oracle::random_planes(layer.weight.shape(), 4);
  layer.bias = oracle::random_planes(layer.bias.shape(), 5);
  const QuaternionPlanes v = oracle::random_planes({6, 7}, 6);
  const QuaternionPlanes ref = oracle::block_qdense(v, layer);
  const QuaternionPlanes got =
      qdense(as_constant(tape, v), as_constant(tape, layer.weight), as_constant(tape, layer.bias)).values();
  for (int c = 0; c < 4; ++c) CHECK(max_abs_diff(*got.planes()[c], *ref.planes()[c]) < 1e-10);
}

TEST_CASE("split activations and PReLU") {
  Tape tape;
  QuaternionPlanes q(Shape{1, 1});
  q.set(0, {-1, 2, -3, 4});
  const QTensor in = as_constant(tape, q);
  CHECK(split_activation(in, ScalarActivation::identity()).values() == q);
  CHECK(split_activation(in, ScalarActivation::relu()).values().get(0) == Quaternion{0, 2, 0, 4});

  QuaternionPlanes neg(Shape{1, 1});
  neg.set(0, {-1, -1, -1, -1});
  const double a = 0.25;
  CHECK(prelu(as_constant(tape, neg), tape.constant(Tensor({1}, a))).values().get(0) == Quaternion{-a, -a, -a, -a});
  CHECK(prelu(in, tape.constant(Tensor({1}, 0.0))).values().get(0) == Quaternion{0, 2, 0, 4});
  CHECK(prelu(in, tape.constant(Tensor({1}, 1.0))).values() == q);
  CHECK_THROWS_AS(prelu(in, tape.constant(Tensor({2}, 1.0))), std::invalid_argument);

  // Gradient with respect to the slopes.
  const auto g = oracle::finite_difference_check(
      [](Tape&, const std::vector<Var>& v) {
        const QTensor t{v[0], v[1], v[2], v[3]};
        const QTensor out = prelu(t, v[4]);
        return add(add(oracle::random_projection(out.r, 1), oracle::random_projection(out.x, 2)),
                   add(oracle::random_projection(out.y, 3), oracle::random_projection(out.z, 4)));
      },
      {oracle::random_tensor({2, 3, 4, 2}, 1), oracle::random_tensor({2, 3, 4, 2}, 2), oracle::random_tensor({2, 3, 4, 2}, 3),
       oracle::random_tensor({2, 3, 4, 2}, 4), oracle::random_tensor({3}, 5, 0.0, 0.5)});
  CHECK(g.max_rel_error < 1e-5);
}

TEST_CASE("frequency max-pooling") {
  Tape tape;
  const QuaternionPlanes x = oracle::random_planes({2, 3, 8, 5}, 7);
  CHECK(split_maxpool_freq(as_constant(tape, x), 1).values() == x);
  const QuaternionPlanes pooled = split_maxpool_freq(as_constant(tape, x), 3).values();
  CHECK(pooled.shape() == Shape{2, 3, 2, 5});
  CHECK(pooled == oracle::naive_maxpool_freq(x, 3));

  QuaternionPlanes c(Shape{1, 1, 6, 2});
  for (std::size_t i = 0; i < c.size(); ++i) c.set(i, {1, 2, 3, 4});
  const QuaternionPlanes pc = split_maxpool_freq(as_constant(tape, c), 3).values();
  CHECK(pc.shape() == Shape{1, 1, 2, 2});
  for (std::size_t i = 0; i < pc.size(); ++i) CHECK(pc.get(i) == Quaternion{1, 2, 3, 4});
}

TEST_CASE("quaternion dropout") {
  Tape tape;
  const QuaternionPlanes x = oracle::random_planes({4, 5}, 8, 0.5, 1.0);
  std::mt19937_64 rng(1);
  CHECK(quaternion_dropout(as_constant(tape, x), 0.0, rng, true).values() == x);
  CHECK(quaternion_dropout(as_constant(tape, x), 0.7, rng, false).values() == x);

  const QuaternionPlanes big = oracle::random_planes({1000, 1000}, 9, 0.5, 1.0);
  const QuaternionPlanes y = quaternion_dropout(as_constant(tape, big), 0.3, rng, true).values();
  std::size_t kept = 0;
  bool shared = true, scaled = true;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Quaternion a = y.get(i), b = big.get(i);
    const bool zero = a == Quaternion{};
    const bool any_zero = a.r == 0 || a.x == 0 || a.y == 0 || a.z == 0;
    shared = shared && zero == any_zero;
    if (!zero) {
      ++kept;
      scaled = scaled && std::abs(a.r - b.r / 0.7) < 1e-12 && std::abs(a.z - b.z / 0.7) < 1e-12;
    }
  }
  CHECK(shared);
  CHECK(scaled);
  const double frac = static_cast<double>(kept) / static_cast<double>(y.size());
  CHECK(frac > 0.695);
  CHECK(frac < 0.705);
}

TEST_CASE("polar initializer") {
  const Quaternion dir = unit({0, 1, 2, 2});
  const Quaternion w0 = polar_weight(0.7, 0.0, dir);
  CHECK(w0 == Quaternion{0.7, 0, 0, 0});

  std::mt19937_64 rng(11);
  for (int n = 0; n < 1000; ++n) {
    const PolarDraw d = draw_polar(0.1, rng);
    CHECK(d.theta >= -M_PI);
    CHECK(d.theta <= M_PI);
    CHECK(d.phi >= 0.0);
    CHECK(d.direction.r == 0.0);
    CHECK(d.direction.x >= 0.0);
    const double s = d.phi * std::sin(d.theta);
    if (std::abs(s) > 1e-9) {
      const double n_img = std::sqrt(d.weight.x * d.weight.x + d.weight.y * d.weight.y + d.weight.z * d.weight.z);
      CHECK(std::abs(n_img / std::abs(s) - 1.0) < 1e-12);
    }
    CHECK(std::abs(norm(d.weight) - d.phi) < 1e-12);
  }

  CHECK(init_sigma({InitCriterion::He, 128, 1, 0}) == doctest::Approx(1.0 / 16.0));
  CHECK(init_sigma({InitCriterion::Glorot, 100, 28, 0}) == doctest::Approx(1.0 / 16.0));

  const InitSpec spec{InitCriterion::He, 128, 64, 3};
  CHECK(quaternion_init(spec, {10, 10}) == quaternion_init(spec, {10, 10}));
  CHECK(!(quaternion_init(spec, {10, 10}) == quaternion_init({InitCriterion::He, 128, 64, 4}, {10, 10})));
}

TEST_CASE("parameter counts") {
  CHECK(RealDenseShape{1024, 1024, false}.weight_count() == 1048576);
  CHECK(QDenseLayer(256, 256, false).weight_count() == 262144);
  CHECK(QConvLayer(8, 8, 3, 5, false, {}).weight_count() == 3840);
  CHECK(QConvLayer(8, 8, 3, 5, true, {}).param_count() == 3840 + 32);
  for (std::size_t oq : {1, 4, 16})
    for (std::size_t iq : {1, 3, 8}) {
      CHECK(RealConvShape{4 * oq, 4 * iq, 3, 5, false}.weight_count() ==
            4 * QConvLayer(oq, iq, 3, 5, false, {}).weight_count());
      CHECK(RealDenseShape{4 * oq, 4 * iq, false}.weight_count() == 4 * QDenseLayer(oq, iq, false).weight_count());
    }
}

TEST_CASE("layer gradient checks") {
  for (const auto& g : acceptance::layer_gradient_checks()) {
    INFO(g.name);
    CHECK(g.max_rel_error < 1e-4);
    CHECK(g.checked > 0);
  }
}
