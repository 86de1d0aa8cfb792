#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "oracles/oracles.hpp"
#include "qcnn/quaternion.hpp"

using namespace qcnn;

namespace {

Quaternion rand_q(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {u(rng), u(rng), u(rng), u(rng)};
}

void check_close(const Quaternion& a, const Quaternion& b, double tol = 1e-12) {
  CHECK(std::abs(a.r - b.r) < tol);
  CHECK(std::abs(a.x - b.x) < tol);
  CHECK(std::abs(a.y - b.y) < tol);
  CHECK(std::abs(a.z - b.z) < tol);
}

const Quaternion kI{0, 1, 0, 0}, kJ{0, 0, 1, 0}, kK{0, 0, 0, 1}, kOne{1, 0, 0, 0}, kMinusOne{-1, 0, 0, 0};

}  // namespace

TEST_CASE("basis relations are exact") {
  CHECK(kI * kJ == kK);
  CHECK(kJ * kI == -kK);
  CHECK(kI * kI == kMinusOne);
  CHECK(kJ * kJ == kMinusOne);
  CHECK(kK * kK == kMinusOne);
  CHECK(kI * kJ * kK == kMinusOne);
}

TEST_CASE("hamilton product worked example and identity") {
  CHECK(hamilton_product({1, 2, 3, 4}, {5, 6, 7, 8}) == Quaternion{-60, 12, 30, 24});
  std::mt19937_64 rng(3);
  for (int n = 0; n < 50; ++n) {
    const Quaternion q = rand_q(rng);
    CHECK(q * kOne == q);
    CHECK(kOne * q == q);
  }
}

TEST_CASE("worked example agrees with the matrix oracle") {
  check_close(oracle::matrix_product({1, 2, 3, 4}, {5, 6, 7, 8}), {-60, 12, 30, 24}, 0.0 + 1e-15);
}

TEST_CASE("conjugate") {
  CHECK(conjugate({1, 2, 3, 4}) == Quaternion{1, -2, -3, -4});
  CHECK(conjugate({5, 0, 0, 0}) == Quaternion{5, 0, 0, 0});
  std::mt19937_64 rng(4);
  for (int n = 0; n < 200; ++n) {
    const Quaternion a = rand_q(rng), b = rand_q(rng);
    check_close(conjugate(a * b), conjugate(b) * conjugate(a));
  }
}

TEST_CASE("norm and unit") {
  CHECK(norm({0, 0, 0, 0}) == 0.0);
  CHECK(norm({1, 1, 1, 1}) == 2.0);
  CHECK(unit({2, 0, 0, 0}) == Quaternion{1, 0, 0, 0});
  check_close(unit({0, 3, 4, 0}), {0, 0.6, 0.8, 0});
  CHECK(unit({1, 1, 1, 1}) == Quaternion{0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(unit({0, 0, 0, 0}), std::domain_error);
  std::mt19937_64 rng(5);
  for (int n = 0; n < 200; ++n) {
    const Quaternion a = rand_q(rng), b = rand_q(rng);
    CHECK(std::abs(norm(unit(a)) - 1.0) < 1e-14);
    CHECK(std::abs(norm(a * b) - norm(a) * norm(b)) < 1e-12);
  }
}

TEST_CASE("associativity, non-commutativity") {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 200; ++n) {
    const Quaternion a = rand_q(rng), b = rand_q(rng), c = rand_q(rng);
    check_close((a * b) * c, a * (b * c), 1e-12);
  }
  CHECK(kI * kJ == -(kJ * kI));
}

TEST_CASE("real matrix layout") {
  const QuatMatrix4 id = to_real_matrix(kOne);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(id[i][j] == (i == j ? 1.0 : 0.0));

  // Pure i: (row, col) 1-based entries (1,2)=1, (2,1)=-1, (3,4)=-1, (4,3)=1.
  const QuatMatrix4 mi = to_real_matrix(kI);
  CHECK(mi[0][1] == 1.0);
  CHECK(mi[1][0] == -1.0);
  CHECK(mi[2][3] == -1.0);
  CHECK(mi[3][2] == 1.0);
  int nonzero = 0;
  for (const auto& row : mi)
    for (double v : row) nonzero += v != 0.0;
  CHECK(nonzero == 4);

  const QuatMatrix4 m = to_real_matrix({1, 2, 3, 4});
  CHECK(m[0] == std::array<double, 4>{1, 2, 3, 4});
  CHECK(m[1] == std::array<double, 4>{-2, 1, -4, 3});
  CHECK(m[2] == std::array<double, 4>{-3, 4, 1, -2});
  CHECK(m[3] == std::array<double, 4>{-4, -3, 2, 1});
}

TEST_CASE("matrix form is a ring homomorphism and reproduces the product") {
  std::mt19937_64 rng(7);
  for (int n = 0; n < 500; ++n) {
    const Quaternion a = rand_q(rng), b = rand_q(rng);
    const QuatMatrix4 lhs = to_real_matrix(a * b);
    const QuatMatrix4 rhs = matmul(to_real_matrix(a), to_real_matrix(b));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(std::abs(lhs[i][j] - rhs[i][j]) < 1e-12);
    check_close(from_vec(vecmat(to_vec(a), to_real_matrix(b))), a * b);
    check_close(from_vec(matvec(left_multiplication_matrix(a), to_vec(b))), a * b);
  }
}
