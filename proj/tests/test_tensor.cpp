#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles/oracles.hpp"
#include "qcnn/autodiff.hpp"
#include "qcnn/tensor.hpp"

using namespace qcnn;

TEST_CASE("tensor storage and bounds checks") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(numel(t.shape()) == t.size());
  t.at({1, 2}) = 4.0;
  CHECK(t[5] == 4.0);
  CHECK_THROWS_AS(t.at({2, 0}), std::out_of_range);
  CHECK_THROWS_AS(t.at({0}), std::out_of_range);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK(t.reshaped({3, 2}).values() == t.values());
  CHECK_THROWS(t.reshaped({4, 2}));
}

TEST_CASE("matmul values") {
  Tape tape;
  Var a = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = tape.constant(Tensor({2, 1}, {1, 1}));
  CHECK(matmul(a, b).value().values() == std::vector<double>{3, 7});
  Var eye = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  CHECK(matmul(eye, a).value() == a.value());
  CHECK_THROWS_AS(matmul(a, tape.constant(Tensor({3, 1}))), std::invalid_argument);
}

TEST_CASE("conv2d identity, impulse and naive-loop oracle") {
  Tape tape;
  const Tensor x = oracle::random_tensor({1, 1, 4, 5}, 1);
  Var one = tape.constant(Tensor({1, 1, 1, 1}, 1.0));
  CHECK(conv2d(tape.constant(x), one, {}).value() == x);

  Tensor impulse({1, 1, 5, 5});
  impulse.at({0, 0, 2, 2}) = 1.0;
  const Tensor k = oracle::random_tensor({1, 1, 3, 3}, 2);
  const Tensor y = conv2d(tape.constant(impulse), tape.constant(k), Conv2dGeometry::same(3, 3)).value();
  // Cross-correlation: the response around the impulse is the kernel flipped.
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(y.at({0, 0, 1 + i, 1 + j}) == k.at({0, 0, 2 - i, 2 - j}));

  const Tensor in = oracle::random_tensor({2, 3, 5, 5}, 3), ker = oracle::random_tensor({4, 3, 3, 3}, 4);
  for (const Conv2dGeometry g : {Conv2dGeometry{}, Conv2dGeometry{1, 1, 1, 1}, Conv2dGeometry{2, 1, 1, 0}}) {
    const Tensor fast = conv2d(tape.constant(in), tape.constant(ker), g).value();
    const Tensor slow = oracle::naive_conv2d(in, ker, g);
    REQUIRE(fast.shape() == slow.shape());
    CHECK(max_abs_diff(fast, slow) < 1e-12);
  }
  CHECK(conv_output_extent(5, 3, 2, 1) == 3);
  CHECK_THROWS_AS(conv_output_extent(2, 5, 1, 1), std::invalid_argument);
}

TEST_CASE("softmax properties") {
  Tape tape;
  const Tensor s = softmax(tape.constant(Tensor({2, 4}, 0.3)), 1).value();
  for (double v : s.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  const Tensor r = softmax(tape.constant(oracle::random_tensor({3, 5}, 9, -20, 20)), 1).value();
  for (std::size_t i = 0; i < 3; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 5; ++j) total += r.at({i, j});
    CHECK(std::abs(total - 1.0) < 1e-14);
  }
}

TEST_CASE("backward: trivial gradients and contract") {
  Tape tape;
  const Tensor w0 = oracle::random_tensor({3, 2}, 5);
  Var w = tape.parameter(w0);
  tape.backward(sum(w));
  const Tensor gw = tape.grad(w);
  for (double g : gw.data()) CHECK(g == 1.0);

  Tape tape2;
  Var w2 = tape2.parameter(w0);
  tape2.backward(scale(sum(mul(w2, w2)), 0.5));
  CHECK(max_abs_diff(tape2.grad(w2), w0) < 1e-15);

  CHECK_THROWS_AS(tape2.backward(w2), std::invalid_argument);
}

TEST_CASE("backward is deterministic and reaches a reused input once per use") {
  auto run = [] {
    Tape tape;
    Var a = tape.parameter(oracle::random_tensor({4, 4}, 8));
    Var b = matmul(a, a);
    tape.backward(oracle::random_projection(add(b, exp(a)), 9));
    return tape.grad(a);
  };
  CHECK(run() == run());
}

TEST_CASE("finite-difference checks for core ops") {
  // Tighter than the acceptance bound on small tensors.
  const auto f = [](Tape&, const std::vector<Var>& v) { return oracle::random_projection(matmul(v[0], v[1]), 1); };
  const auto g = oracle::finite_difference_check(f, {oracle::random_tensor({3, 4}, 1), oracle::random_tensor({4, 2}, 2)});
  CHECK(g.max_rel_error < 1e-5);
}
