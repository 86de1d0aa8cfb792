#include "qcnn/quaternion.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace qcnn {

Quaternion hamilton_product(const Quaternion& a, const Quaternion& b) {
  return {
      a.r * b.r - a.x * b.x - a.y * b.y - a.z * b.z,
      a.r * b.x + a.x * b.r + a.y * b.z - a.z * b.y,
      a.r * b.y - a.x * b.z + a.y * b.r + a.z * b.x,
      a.r * b.z + a.x * b.y - a.y * b.x + a.z * b.r,
  };
}

Quaternion conjugate(const Quaternion& q) { return {q.r, -q.x, -q.y, -q.z}; }

double norm(const Quaternion& q) { return std::sqrt(q.r * q.r + q.x * q.x + q.y * q.y + q.z * q.z); }

Quaternion unit(const Quaternion& q) {
  const double n = norm(q);
  if (n == 0.0) {
    throw std::domain_error("unit(): zero quaternion has no direction");
  }
  return {q.r / n, q.x / n, q.y / n, q.z / n};
}

QuatMatrix4 to_real_matrix(const Quaternion& q) {
  const auto [r, x, y, z] = q;
  return {{
      {r, x, y, z},
      {-x, r, -z, y},
      {-y, z, r, -x},
      {-z, -y, x, r},
  }};
}

QuatMatrix4 left_multiplication_matrix(const Quaternion& w) {
  const auto [r, x, y, z] = w;
  return {{
      {r, -x, -y, -z},
      {x, r, -z, y},
      {y, z, r, -x},
      {z, -y, x, r},
  }};
}

QuatMatrix4 matmul(const QuatMatrix4& a, const QuatMatrix4& b) {
  QuatMatrix4 c{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
      c[i][j] = acc;
    }
  }
  return c;
}

Vec4 matvec(const QuatMatrix4& m, const Vec4& v) {
  Vec4 out{};
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) out[i] += m[i][k] * v[k];
  }
  return out;
}

Vec4 vecmat(const Vec4& v, const QuatMatrix4& m) {
  Vec4 out{};
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 4; ++k) out[j] += v[k] * m[k][j];
  }
  return out;
}

std::ostream& operator<<(std::ostream& os, const Quaternion& q) {
  return os << '(' << q.r << ", " << q.x << ", " << q.y << ", " << q.z << ')';
}

}  // namespace qcnn
