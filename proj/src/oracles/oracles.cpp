#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qcnn::oracle {

Quaternion matrix_product(const Quaternion& a, const Quaternion& b) {
  const QuatMatrix4 ma = to_real_matrix(a);
  const QuatMatrix4 mb = to_real_matrix(b);
  double row[4] = {0, 0, 0, 0};
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 4; ++k) row[j] += ma[0][k] * mb[k][j];
  }
  return {row[0], row[1], row[2], row[3]};
}

Tensor naive_conv2d(const Tensor& input, const Tensor& kernel, const Conv2dGeometry& g) {
  const std::size_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t O = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
  if (kernel.dim(1) != C) throw std::invalid_argument("naive_conv2d: channel mismatch");
  const std::size_t OH = (H + 2 * g.pad_h - KH) / g.stride_h + 1;
  const std::size_t OW = (W + 2 * g.pad_w - KW) / g.stride_w + 1;
  Tensor out({B, O, OH, OW});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long h = static_cast<long>(oh * g.stride_h + i) - static_cast<long>(g.pad_h);
                const long w = static_cast<long>(ow * g.stride_w + j) - static_cast<long>(g.pad_w);
                if (h < 0 || w < 0 || h >= static_cast<long>(H) || w >= static_cast<long>(W)) continue;
                acc += input.at({b, c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}) *
                       kernel.at({o, c, i, j});
              }
          out.at({b, o, oh, ow}) = acc;
        }
  return out;
}

double block_entry(const Quaternion& w, int out_comp, int in_comp) {
  const double R = w.r, X = w.x, Y = w.y, Z = w.z;
  const double block[4][4] = {
      {R, -X, -Y, -Z},
      {X, R, -Z, Y},
      {Y, Z, R, -X},
      {Z, -Y, X, R},
  };
  return block[out_comp][in_comp];
}

Tensor block_conv_kernel(const QConvLayer& layer) {
  const Shape& s = layer.weight.shape();
  const std::size_t oq = s[0], iq = s[1], kh = s[2], kw = s[3];
  Tensor k({4 * oq, 4 * iq, kh, kw});
  for (std::size_t o = 0; o < oq; ++o)
    for (std::size_t i = 0; i < iq; ++i)
      for (std::size_t a = 0; a < kh; ++a)
        for (std::size_t b = 0; b < kw; ++b) {
          const std::size_t src = ((o * iq + i) * kh + a) * kw + b;
          const Quaternion w = layer.weight.get(src);
          for (int co = 0; co < 4; ++co)
            for (int ci = 0; ci < 4; ++ci) k.at({co * oq + o, ci * iq + i, a, b}) = block_entry(w, co, ci);
        }
  return k;
}

Tensor block_dense_weight(const QDenseLayer& layer) {
  const std::size_t oq = layer.weight.shape()[0], iq = layer.weight.shape()[1];
  Tensor w({4 * oq, 4 * iq});
  for (std::size_t o = 0; o < oq; ++o)
    for (std::size_t i = 0; i < iq; ++i) {
      const Quaternion q = layer.weight.get(o * iq + i);
      for (int co = 0; co < 4; ++co)
        for (int ci = 0; ci < 4; ++ci) w.at({co * oq + o, ci * iq + i}) = block_entry(q, co, ci);
    }
  return w;
}

Tensor stack_components(const QuaternionPlanes& q, std::size_t axis) {
  const AxisSplit sp = split_at_axis(q.shape(), axis);
  Shape shape = q.shape();
  shape[axis] *= 4;
  Tensor out(shape);
  const auto planes = q.planes();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          out[(o * 4 * sp.extent + c * sp.extent + e) * sp.inner + i] = (*planes[c])[(o * sp.extent + e) * sp.inner + i];
  return out;
}

QuaternionPlanes unstack_components(const Tensor& t, std::size_t axis) {
  Shape shape = t.shape();
  if (shape[axis] % 4 != 0) throw std::invalid_argument("unstack_components: axis not divisible by 4");
  shape[axis] /= 4;
  QuaternionPlanes q(shape);
  const AxisSplit sp = split_at_axis(shape, axis);
  auto planes = q.planes();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          (*planes[c])[(o * sp.extent + e) * sp.inner + i] = t[(o * 4 * sp.extent + c * sp.extent + e) * sp.inner + i];
  return q;
}

QuaternionPlanes block_qconv2d(const QuaternionPlanes& input, const QConvLayer& layer) {
  Tensor out = naive_conv2d(stack_components(input, 1), block_conv_kernel(layer), layer.geometry);
  if (layer.has_bias()) {
    const std::size_t oq = layer.out_q();
    const std::size_t plane = out.dim(2) * out.dim(3);
    const auto bias = layer.bias.planes();
    for (std::size_t b = 0; b < out.dim(0); ++b)
      for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t o = 0; o < oq; ++o)
          for (std::size_t p = 0; p < plane; ++p) out[((b * 4 * oq) + c * oq + o) * plane + p] += (*bias[c])[o];
  }
  return unstack_components(out, 1);
}

QuaternionPlanes block_qdense(const QuaternionPlanes& input, const QDenseLayer& layer) {
  const Tensor x = stack_components(input, 0);  // [4*in_q x N]
  const Tensor w = block_dense_weight(layer);
  const std::size_t rows = w.dim(0), inner = w.dim(1), cols = x.dim(1);
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += w[r * inner + k] * x[k * cols + c];
      if (layer.has_bias()) acc += (*layer.bias.planes()[r / layer.out_q()])[r % layer.out_q()];
      out[r * cols + c] = acc;
    }
  return unstack_components(out, 0);
}

QuaternionPlanes naive_maxpool_freq(const QuaternionPlanes& input, std::size_t width) {
  const Shape& s = input.shape();
  const std::size_t F = s[2] / width;
  QuaternionPlanes out(Shape{s[0], s[1], F, s[3]});
  for (std::size_t c = 0; c < 4; ++c) {
    const Tensor& in = *input.planes()[c];
    Tensor& o = *out.planes()[c];
    for (std::size_t b = 0; b < s[0]; ++b)
      for (std::size_t ch = 0; ch < s[1]; ++ch)
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < s[3]; ++t) {
            double m = -INFINITY;
            for (std::size_t k = 0; k < width; ++k) m = std::max(m, in.at({b, ch, f * width + k, t}));
            o.at({b, ch, f, t}) = m;
          }
  }
  return out;
}

std::vector<std::size_t> naive_collapse(const std::vector<std::size_t>& path, std::size_t blank) {
  std::vector<std::size_t> merged;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i == 0 || path[i] != path[i - 1]) merged.push_back(path[i]);
  }
  std::vector<std::size_t> out;
  for (std::size_t s : merged) {
    if (s != blank) out.push_back(s);
  }
  return out;
}

double brute_force_ctc(const Tensor& logits, const std::vector<std::size_t>& target, std::size_t blank) {
  const std::size_t n = logits.dim(0), K = logits.dim(1);
  std::vector<std::vector<double>> prob(n, std::vector<double>(K));
  for (std::size_t t = 0; t < n; ++t) {
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[t * K + k]);
    for (std::size_t k = 0; k < K; ++k) prob[t][k] = std::exp(logits[t * K + k]) / z;
  }
  std::vector<std::size_t> path(n, 0);
  double total = 0.0;
  while (true) {
    if (naive_collapse(path, blank) == target) {
      double p = 1.0;
      for (std::size_t t = 0; t < n; ++t) p *= prob[t][path[t]];
      total += p;
    }
    std::size_t t = 0;
    while (t < n && ++path[t] == K) path[t++] = 0;
    if (t == n) break;
  }
  return -std::log(total);
}

Tensor direct_dft_log_mel(std::span<const double> wave, const FeatureConfig& cfg) {
  const auto win = static_cast<std::size_t>(std::llround(cfg.sample_rate * cfg.window_ms / 1000.0));
  const auto hop = static_cast<std::size_t>(std::llround(cfg.sample_rate * cfg.hop_ms / 1000.0));
  const std::size_t N = cfg.fft_size;
  const std::size_t frames = wave.size() < win ? 0 : (wave.size() - win) / hop + 1;
  const std::size_t bins = N / 2 + 1;
  const double nyquist = cfg.sample_rate / 2.0;
  const double top = cfg.high_hz > 0.0 ? cfg.high_hz : nyquist;

  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double m0 = mel(cfg.low_hz), m1 = mel(top);
  const double step = (m1 - m0) / static_cast<double>(cfg.n_mels + 1);

  Tensor out({cfg.n_mels + (cfg.include_energy ? 1 : 0), frames});
  std::vector<double> power(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = wave.data() + t * hop;
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < win; ++n) {
        const double hamming =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win - 1));
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * n % N) / static_cast<double>(N);
        acc += x[n] * hamming * std::polar(1.0, angle);
      }
      power[k] = std::norm(acc);
    }
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      const double lo = inv(m0 + step * static_cast<double>(m));
      const double c = inv(m0 + step * static_cast<double>(m + 1));
      const double hi = inv(m0 + step * static_cast<double>(m + 2));
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(N);
        const double w = std::max(0.0, std::min((f - lo) / (c - lo), (hi - f) / (hi - c)));
        e += w * power[k];
      }
      out.at({m, t}) = std::log(std::max(e, cfg.log_floor));
    }
    if (cfg.include_energy) {
      double e = 0.0;
      for (std::size_t n = 0; n < win; ++n) e += x[n] * x[n];
      out.at({cfg.n_mels, t}) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

Tensor naive_delta(const Tensor& stream, std::size_t half_width) {
  const std::size_t F = stream.dim(0), T = stream.dim(1);
  Tensor out({F, T});
  double denom = 0.0;
  for (std::size_t n = 1; n <= half_width; ++n) denom += 2.0 * static_cast<double>(n * n);
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= half_width; ++n) {
        const std::size_t ahead = std::min(t + n, T - 1);
        const std::size_t behind = t >= n ? t - n : 0;
        acc += static_cast<double>(n) * (stream.at({f, ahead}) - stream.at({f, behind}));
      }
      out.at({f, t}) = acc / denom;
    }
  return out;
}

std::size_t dp_edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

GradCheck finite_difference_check(const GraphFn& f, const std::vector<Tensor>& inputs, double eps, double floor) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.parameter(t));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : xs) vars.push_back(tape.parameter(t));
    return f(tape, vars).value().item();
  };

  GradCheck out;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (std::size_t j = 0; j < work[i].size(); ++j) {
      const double saved = work[i][j];
      work[i][j] = saved + eps;
      const double up = eval(work);
      work[i][j] = saved - eps;
      const double down = eval(work);
      work[i][j] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][j];
      const double abs_err = std::abs(a - numeric);
      out.max_abs_error = std::max(out.max_abs_error, abs_err);
      out.max_rel_error = std::max(out.max_rel_error, abs_err / std::max({std::abs(a), std::abs(numeric), floor}));
      ++out.checked;
    }
  }
  return out;
}

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

QuaternionPlanes random_planes(const Shape& shape, std::uint64_t seed, double lo, double hi) {
  return QuaternionPlanes(random_tensor(shape, seed * 4 + 0, lo, hi), random_tensor(shape, seed * 4 + 1, lo, hi),
                          random_tensor(shape, seed * 4 + 2, lo, hi), random_tensor(shape, seed * 4 + 3, lo, hi));
}

Var random_projection(const Var& out, std::uint64_t seed) {
  return sum(mul_constant(out, random_tensor(out.shape(), seed)));
}

}  // namespace qcnn::oracle
