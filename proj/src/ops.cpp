#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcnn/autodiff.hpp"

namespace qcnn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                shape_str(a.shape()));
  }
}

template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape().record(std::move(out), {a}, [df](const BackwardContext& ctx) {
    const Tensor& x = *ctx.in_values[0];
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += ctx.out_grad[i] * df(x[i], ctx.out_value[i]);
  });
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  if (kernel == 0 || in + 2 * pad < kernel) {
    throw std::invalid_argument("conv2d: padded extent " + std::to_string(in + 2 * pad) + " smaller than kernel " +
                                std::to_string(kernel));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

ScalarActivation ScalarActivation::identity() {
  return {[](double v) { return v; }, [](double) { return 1.0; }};
}

ScalarActivation ScalarActivation::relu() {
  return {[](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; }};
}

ScalarActivation ScalarActivation::tanh() {
  return {[](double v) { return std::tanh(v); },
          [](double v) {
            const double t = std::tanh(v);
            return 1.0 - t * t;
          }};
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out += b.value();
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    for (Tensor* g : ctx.in_grads) {
      if (g) *g += ctx.out_grad;
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  const Tensor& bv = b.value();
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    if (ctx.in_grads[0]) *ctx.in_grads[0] += ctx.out_grad;
    if (Tensor* g = ctx.in_grads[1]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= ctx.out_grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& av = *ctx.in_values[0];
    const Tensor& bv = *ctx.in_values[1];
    if (Tensor* g = ctx.in_grads[0]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.out_grad[i] * bv[i];
    }
    if (Tensor* g = ctx.in_grads[1]) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.out_grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var log(const Var& a) {
  return unary(a, [](double v) { return std::log(v); }, [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary(a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var apply(const Var& a, const ScalarActivation& act) {
  return unary(a, act.f, [df = act.df](double x, double) { return df(x); });
}

Var mul_constant(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) {
    throw std::invalid_argument("mul_constant: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(c.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  return a.tape().record(std::move(out), {a}, [c](const BackwardContext& ctx) {
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.out_grad[i] * c[i];
  });
}

Var add_bias(const Var& a, const Var& bias, std::size_t axis) {
  const AxisSplit s = split_at_axis(a.shape(), axis);
  if (bias.value().size() != s.extent) {
    throw std::invalid_argument("add_bias: bias of size " + std::to_string(bias.value().size()) +
                                " does not match axis extent " + std::to_string(s.extent));
  }
  Tensor out = a.value();
  const Tensor& b = bias.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.extent; ++c)
      for (std::size_t i = 0; i < s.inner; ++i) out[(o * s.extent + c) * s.inner + i] += b[c];
  return a.tape().record(std::move(out), {a, bias}, [s](const BackwardContext& ctx) {
    if (ctx.in_grads[0]) *ctx.in_grads[0] += ctx.out_grad;
    if (Tensor* g = ctx.in_grads[1]) {
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t c = 0; c < s.extent; ++c)
          for (std::size_t i = 0; i < s.inner; ++i) (*g)[c] += ctx.out_grad[(o * s.extent + c) * s.inner + i];
    }
  });
}

Var prelu(const Var& a, const Var& slopes, std::size_t axis) {
  const AxisSplit s = split_at_axis(a.shape(), axis);
  if (slopes.value().size() != s.extent) {
    throw std::invalid_argument("prelu: " + std::to_string(slopes.value().size()) + " slopes for " +
                                std::to_string(s.extent) + " channels");
  }
  const Tensor& x = a.value();
  const Tensor& k = slopes.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < s.extent; ++c)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t idx = (o * s.extent + c) * s.inner + i;
        out[idx] = x[idx] > 0.0 ? x[idx] : k[c] * x[idx];
      }
  return a.tape().record(std::move(out), {a, slopes}, [s](const BackwardContext& ctx) {
    const Tensor& x = *ctx.in_values[0];
    const Tensor& k = *ctx.in_values[1];
    Tensor* gx = ctx.in_grads[0];
    Tensor* gk = ctx.in_grads[1];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t c = 0; c < s.extent; ++c)
        for (std::size_t i = 0; i < s.inner; ++i) {
          const std::size_t idx = (o * s.extent + c) * s.inner + i;
          const double g = ctx.out_grad[idx];
          if (x[idx] > 0.0) {
            if (gx) (*gx)[idx] += g;
          } else {
            if (gx) (*gx)[idx] += g * k[c];
            if (gk) (*gk)[c] += g * x[idx];
          }
        }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  Tensor out({m, n});
  MatMap(out.data().data(), m, n).noalias() =
      ConstMatMap(a.value().data().data(), m, k) * ConstMatMap(b.value().data().data(), k, n);
  return a.tape().record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
    ConstMatMap go(ctx.out_grad.data().data(), m, n);
    if (Tensor* g = ctx.in_grads[0]) {
      MatMap(g->data().data(), m, k).noalias() += go * ConstMatMap(ctx.in_values[1]->data().data(), k, n).transpose();
    }
    if (Tensor* g = ctx.in_grads[1]) {
      MatMap(g->data().data(), k, n).noalias() += ConstMatMap(ctx.in_values[0]->data().data(), m, k).transpose() * go;
    }
  });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  MatMap(out.data().data(), n, m) = ConstMatMap(a.value().data().data(), m, n).transpose();
  return a.tape().record(std::move(out), {a}, [m, n](const BackwardContext& ctx) {
    MatMap(ctx.in_grads[0]->data().data(), m, n) += ConstMatMap(ctx.out_grad.data().data(), n, m).transpose();
  });
}

namespace {

struct ConvDims {
  std::size_t batch, cin, h, w, cout, kh, kw, ho, wo;
  Conv2dGeometry g;
  std::size_t col_rows() const { return cin * kh * kw; }
  std::size_t col_cols() const { return ho * wo; }
};

void im2col(const double* in, const ConvDims& d, double* col) {
  const std::size_t cols = d.col_cols();
  for (std::size_t c = 0; c < d.cin; ++c)
    for (std::size_t i = 0; i < d.kh; ++i)
      for (std::size_t j = 0; j < d.kw; ++j) {
        double* row = col + ((c * d.kh + i) * d.kw + j) * cols;
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.g.stride_h + i) -
                                    static_cast<std::ptrdiff_t>(d.g.pad_h);
          for (std::size_t ow = 0; ow < d.wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.g.stride_w + j) -
                                      static_cast<std::ptrdiff_t>(d.g.pad_w);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(d.h) &&
                                iw < static_cast<std::ptrdiff_t>(d.w);
            row[oh * d.wo + ow] = inside ? in[(c * d.h + ih) * d.w + iw] : 0.0;
          }
        }
      }
}

void col2im(const double* col, const ConvDims& d, double* in) {
  const std::size_t cols = d.col_cols();
  for (std::size_t c = 0; c < d.cin; ++c)
    for (std::size_t i = 0; i < d.kh; ++i)
      for (std::size_t j = 0; j < d.kw; ++j) {
        const double* row = col + ((c * d.kh + i) * d.kw + j) * cols;
        for (std::size_t oh = 0; oh < d.ho; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.g.stride_h + i) -
                                    static_cast<std::ptrdiff_t>(d.g.pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t ow = 0; ow < d.wo; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.g.stride_w + j) -
                                      static_cast<std::ptrdiff_t>(d.g.pad_w);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
            in[(c * d.h + ih) * d.w + iw] += row[oh * d.wo + ow];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Conv2dGeometry& geometry) {
  require_rank("conv2d", input, 4);
  require_rank("conv2d", kernel, 4);
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  if (is[1] != ks[1]) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(is[1]) + " vs kernel channels " +
                                std::to_string(ks[1]));
  }
  ConvDims d{is[0], is[1], is[2], is[3], ks[0], ks[2], ks[3], 0, 0, geometry};
  d.ho = conv_output_extent(d.h, d.kh, geometry.stride_h, geometry.pad_h);
  d.wo = conv_output_extent(d.w, d.kw, geometry.stride_w, geometry.pad_w);

  Tensor out({d.batch, d.cout, d.ho, d.wo});
  std::vector<double> col(d.col_rows() * d.col_cols());
  ConstMatMap kmat(kernel.value().data().data(), d.cout, d.col_rows());
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col(input.value().data().data() + b * d.cin * d.h * d.w, d, col.data());
    MatMap(out.data().data() + b * d.cout * d.col_cols(), d.cout, d.col_cols()).noalias() =
        kmat * ConstMatMap(col.data(), d.col_rows(), d.col_cols());
  }

  return input.tape().record(std::move(out), {input, kernel}, [d](const BackwardContext& ctx) {
    const Tensor& in = *ctx.in_values[0];
    ConstMatMap kmat(ctx.in_values[1]->data().data(), d.cout, d.col_rows());
    Tensor* gin = ctx.in_grads[0];
    Tensor* gk = ctx.in_grads[1];
    std::vector<double> col(d.col_rows() * d.col_cols());
    for (std::size_t b = 0; b < d.batch; ++b) {
      ConstMatMap go(ctx.out_grad.data().data() + b * d.cout * d.col_cols(), d.cout, d.col_cols());
      if (gk) {
        im2col(in.data().data() + b * d.cin * d.h * d.w, d, col.data());
        MatMap(gk->data().data(), d.cout, d.col_rows()).noalias() +=
            go * ConstMatMap(col.data(), d.col_rows(), d.col_cols()).transpose();
      }
      if (gin) {
        MatMap(col.data(), d.col_rows(), d.col_cols()).noalias() = kmat.transpose() * go;
        col2im(col.data(), d, gin->data().data() + b * d.cin * d.h * d.w);
      }
    }
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape().record(Tensor::scalar(acc), {a}, [](const BackwardContext& ctx) {
    const double g = ctx.out_grad[0];
    for (double& v : ctx.in_grads[0]->data()) v += g;
  });
}

Var reduce_max(const Var& a) {
  const Tensor& x = a.value();
  if (x.empty()) throw std::invalid_argument("reduce_max: empty tensor");
  const auto it = std::max_element(x.data().begin(), x.data().end());
  const std::size_t arg = static_cast<std::size_t>(it - x.data().begin());
  return a.tape().record(Tensor::scalar(*it), {a},
                         [arg](const BackwardContext& ctx) { (*ctx.in_grads[0])[arg] += ctx.out_grad[0]; });
}

Var softmax(const Var& a, std::size_t axis) {
  const AxisSplit s = split_at_axis(a.shape(), axis);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.extent; ++c) mx = std::max(mx, x[base + c * s.inner]);
      double z = 0.0;
      for (std::size_t c = 0; c < s.extent; ++c) z += (out[base + c * s.inner] = std::exp(x[base + c * s.inner] - mx));
      for (std::size_t c = 0; c < s.extent; ++c) out[base + c * s.inner] /= z;
    }
  return a.tape().record(std::move(out), {a}, [s](const BackwardContext& ctx) {
    const Tensor& y = ctx.out_value;
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t c = 0; c < s.extent; ++c) dot += ctx.out_grad[base + c * s.inner] * y[base + c * s.inner];
        for (std::size_t c = 0; c < s.extent; ++c) {
          const std::size_t idx = base + c * s.inner;
          g[idx] += y[idx] * (ctx.out_grad[idx] - dot);
        }
      }
  });
}

Var log_softmax(const Var& a, std::size_t axis) {
  const AxisSplit s = split_at_axis(a.shape(), axis);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.extent; ++c) mx = std::max(mx, x[base + c * s.inner]);
      double z = 0.0;
      for (std::size_t c = 0; c < s.extent; ++c) z += std::exp(x[base + c * s.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t c = 0; c < s.extent; ++c) out[base + c * s.inner] = x[base + c * s.inner] - lz;
    }
  return a.tape().record(std::move(out), {a}, [s](const BackwardContext& ctx) {
    const Tensor& y = ctx.out_value;
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double total = 0.0;
        for (std::size_t c = 0; c < s.extent; ++c) total += ctx.out_grad[base + c * s.inner];
        for (std::size_t c = 0; c < s.extent; ++c) {
          const std::size_t idx = base + c * s.inner;
          g[idx] += ctx.out_grad[idx] - std::exp(y[idx]) * total;
        }
      }
  });
}

Var max_pool_axis(const Var& a, std::size_t axis, std::size_t width) {
  if (width == 0) throw std::invalid_argument("max_pool_axis: width must be >= 1");
  const AxisSplit s = split_at_axis(a.shape(), axis);
  const std::size_t pooled = s.extent / width;
  if (pooled == 0) {
    throw std::invalid_argument("max_pool_axis: width " + std::to_string(width) + " exceeds extent " +
                                std::to_string(s.extent));
  }
  Shape shape = a.shape();
  shape[axis] = pooled;
  const Tensor& x = a.value();
  Tensor out(shape);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t p = 0; p < pooled; ++p)
      for (std::size_t i = 0; i < s.inner; ++i) {
        std::size_t best = (o * s.extent + p * width) * s.inner + i;
        for (std::size_t w = 1; w < width; ++w) {
          const std::size_t idx = (o * s.extent + p * width + w) * s.inner + i;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t oi = (o * pooled + p) * s.inner + i;
        out[oi] = x[best];
        argmax[oi] = best;
      }
  return a.tape().record(std::move(out), {a}, [argmax = std::move(argmax)](const BackwardContext& ctx) {
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += ctx.out_grad[i];
  });
}

Var frames_to_matrix(const Var& a) {
  require_rank("frames_to_matrix", a, 4);
  const Shape& s = a.shape();
  const std::size_t B = s[0], C = s[1], F = s[2], T = s[3];
  const Tensor& x = a.value();
  Tensor out({C * F, B * T});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t cf = 0; cf < C * F; ++cf)
      for (std::size_t t = 0; t < T; ++t) out[cf * B * T + b * T + t] = x[(b * C * F + cf) * T + t];
  return a.tape().record(std::move(out), {a}, [B, C, F, T](const BackwardContext& ctx) {
    Tensor& g = *ctx.in_grads[0];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t cf = 0; cf < C * F; ++cf)
        for (std::size_t t = 0; t < T; ++t) g[(b * C * F + cf) * T + t] += ctx.out_grad[cf * B * T + b * T + t];
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts.front().value().rank() == 2 ? parts.front().shape()[1] : 0;
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_rank("concat_rows", p, 2);
    if (p.shape()[1] != cols) throw std::invalid_argument("concat_rows: column count mismatch");
    rows += p.shape()[0];
  }
  Tensor out({rows, cols});
  std::size_t off = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(off);
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  return parts.front().tape().record(std::move(out), parts, [offsets](const BackwardContext& ctx) {
    for (std::size_t k = 0; k < ctx.in_grads.size(); ++k) {
      Tensor* g = ctx.in_grads[k];
      if (!g) continue;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.out_grad[offsets[k] + i];
    }
  });
}

Var time_mask(const Var& a, std::span<const std::size_t> lengths) {
  const Shape& s = a.shape();
  if (s.size() < 2 || s[0] != lengths.size()) {
    throw std::invalid_argument("time_mask: " + std::to_string(lengths.size()) + " lengths for tensor " +
                                shape_str(s));
  }
  const std::size_t T = s.back();
  const std::size_t per_batch = a.value().size() / s[0];
  Tensor mask(s, 1.0);
  for (std::size_t b = 0; b < s[0]; ++b)
    for (std::size_t i = 0; i < per_batch; ++i)
      if (i % T >= lengths[b]) mask[b * per_batch + i] = 0.0;
  return mul_constant(a, mask);
}

}  // namespace qcnn
