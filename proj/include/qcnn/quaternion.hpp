#pragma once

#include <array>
#include <iosfwd>

namespace qcnn {

/// Quaternion r + x i + y j + z k in double precision.
struct Quaternion {
  double r = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

using Vec4 = std::array<double, 4>;

/// 4x4 real matrix, row-major: m[row][col].
using QuatMatrix4 = std::array<std::array<double, 4>, 4>;

Quaternion hamilton_product(const Quaternion& a, const Quaternion& b);
Quaternion conjugate(const Quaternion& q);
double norm(const Quaternion& q);

/// Scales q to norm 1. Throws std::domain_error for the zero quaternion.
Quaternion unit(const Quaternion& q);

/// Real matrix form of q with first row (r, x, y, z):
///
///   [  r   x   y   z ]
///   [ -x   r  -z   y ]
///   [ -y   z   r  -x ]
///   [ -z  -y   x   r ]
///
/// to_real_matrix(a) * to_real_matrix(b) == to_real_matrix(a ⊗ b), and the row
/// vector (a.r, a.x, a.y, a.z) times to_real_matrix(b) gives the components of
/// a ⊗ b.
QuatMatrix4 to_real_matrix(const Quaternion& q);

/// Block form used by quaternion layers: left_multiplication_matrix(w) * vec(p)
/// gives the components of w ⊗ p.
QuatMatrix4 left_multiplication_matrix(const Quaternion& w);

QuatMatrix4 matmul(const QuatMatrix4& a, const QuatMatrix4& b);
Vec4 matvec(const QuatMatrix4& m, const Vec4& v);
Vec4 vecmat(const Vec4& v, const QuatMatrix4& m);

inline Vec4 to_vec(const Quaternion& q) { return {q.r, q.x, q.y, q.z}; }
inline Quaternion from_vec(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

inline Quaternion operator*(const Quaternion& a, const Quaternion& b) { return hamilton_product(a, b); }
inline Quaternion operator+(const Quaternion& a, const Quaternion& b) {
  return {a.r + b.r, a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Quaternion operator-(const Quaternion& q) { return {-q.r, -q.x, -q.y, -q.z}; }

std::ostream& operator<<(std::ostream& os, const Quaternion& q);

}  // namespace qcnn
