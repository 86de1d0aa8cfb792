#pragma once

// Slow, independent reference implementations. Nothing in here calls the
// optimized code paths it is used to check.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qcnn/autodiff.hpp"
#include "qcnn/features.hpp"
#include "qcnn/qnn.hpp"
#include "qcnn/quaternion.hpp"
#include "qcnn/tensor.hpp"

namespace qcnn::oracle {

// Quaternion product read off the real 4x4 matrix representation: row 0 of
// to_real_matrix(a) * to_real_matrix(b), i.e. vec(a)^T * to_real_matrix(b).
Quaternion matrix_product(const Quaternion& a, const Quaternion& b);

// Direct loop cross-correlation with zero padding.
Tensor naive_conv2d(const Tensor& input, const Tensor& kernel, const Conv2dGeometry& g);

// The 4x4 real block   [ R -X -Y -Z ]
//                       [ X  R -Z  Y ]
//                       [ Y  Z  R -X ]
//                       [ Z -Y  X  R ]
// spelled out per output/input component pair.
double block_entry(const Quaternion& w, int out_comp, int in_comp);

// Real kernel [4*out_q x 4*in_q x kh x kw]; channel c*q + unit for component c.
Tensor block_conv_kernel(const QConvLayer& layer);
// Real weight [4*out_q x 4*in_q].
Tensor block_dense_weight(const QDenseLayer& layer);

// Stacks the four planes along axis `axis` (component-major).
Tensor stack_components(const QuaternionPlanes& q, std::size_t axis);
QuaternionPlanes unstack_components(const Tensor& t, std::size_t axis);

// Real-valued forward passes using the block matrices above.
QuaternionPlanes block_qconv2d(const QuaternionPlanes& input, const QConvLayer& layer);
QuaternionPlanes block_qdense(const QuaternionPlanes& input, const QDenseLayer& layer);

// Max over frequency windows, plain loops.
QuaternionPlanes naive_maxpool_freq(const QuaternionPlanes& input, std::size_t width);

// CTC by enumerating every latent path of `logits` [n x K].
std::vector<std::size_t> naive_collapse(const std::vector<std::size_t>& path, std::size_t blank);
double brute_force_ctc(const Tensor& logits, const std::vector<std::size_t>& target, std::size_t blank);

// Front end with an O(N^2) DFT and its own window and filterbank.
Tensor direct_dft_log_mel(std::span<const double> wave, const FeatureConfig& cfg);
Tensor naive_delta(const Tensor& stream, std::size_t half_width);

// Full (n+1)x(m+1) Levenshtein table.
std::size_t dp_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Builds a scalar from `inputs` on a fresh tape.
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor), central
// differences with step eps, over every element of every input.
GradCheck finite_difference_check(const GraphFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5,
                                  double floor = 1e-4);

// Random projection loss sum(out * R) so that no gradient component is trivially symmetric.
Var random_projection(const Var& out, std::uint64_t seed);

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
QuaternionPlanes random_planes(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace qcnn::oracle
