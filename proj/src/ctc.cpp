#include "qcnn/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcnn/errors.hpp"

namespace qcnn {

SymbolTable::SymbolTable(std::vector<std::string> symbols) : names_(std::move(symbols)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw std::invalid_argument("SymbolTable: empty symbol name");
    for (std::size_t j = 0; j < i; ++j) {
      if (names_[i] == names_[j]) throw std::invalid_argument("SymbolTable: duplicate symbol '" + names_[i] + "'");
    }
  }
}

std::size_t SymbolTable::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("unknown symbol '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

const std::string& SymbolTable::name_of(std::size_t index) const {
  if (index >= names_.size()) throw std::out_of_range("symbol index " + std::to_string(index) + " is not a symbol");
  return names_[index];
}

Labels SymbolTable::encode(std::span<const std::string> names) const {
  Labels out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(index_of(n));
  return out;
}

std::vector<std::string> SymbolTable::decode(std::span<const std::size_t> labels) const {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (std::size_t l : labels) out.push_back(name_of(l));
  return out;
}

Labels collapse(std::span<const std::size_t> latent, std::size_t blank) {
  Labels out;
  for (std::size_t t = 0; t < latent.size(); ++t) {
    if (t > 0 && latent[t] == latent[t - 1]) continue;
    if (latent[t] != blank) out.push_back(latent[t]);
  }
  return out;
}

std::size_t min_frames(std::span<const std::size_t> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) n += target[i] == target[i - 1] ? 1 : 0;
  return n;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Forward-backward over the blank-augmented label sequence for rows
// [first, first + frames) of `logits`. Writes the logit gradient for those rows.
double ctc_segment(const Tensor& logits, std::size_t first, std::size_t frames, std::span<const std::size_t> target,
                   std::size_t blank, double grad_scale, Tensor* grad) {
  const std::size_t classes = logits.shape()[1];
  if (target.empty()) throw std::invalid_argument("ctc_loss: empty target");
  for (std::size_t l : target) {
    if (l >= classes || l == blank) {
      throw std::invalid_argument("ctc_loss: target label " + std::to_string(l) + " is not a non-blank class");
    }
  }
  if (frames < min_frames(target)) {
    throw InfeasibleAlignment("ctc_loss: target needs " + std::to_string(min_frames(target)) + " frames, got " +
                              std::to_string(frames));
  }

  // log-softmax per frame
  std::vector<double> logp(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = logits.data().data() + (first + t) * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(row[k] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t k = 0; k < classes; ++k) logp[t * classes + k] = row[k] - lz;
  }

  const std::size_t S = 2 * target.size() + 1;
  std::vector<std::size_t> ext(S, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  // alpha includes the emission at t; beta covers frames after t only.
  std::vector<double> alpha(frames * S, kNegInf);
  std::vector<double> beta(frames * S, kNegInf);
  alpha[0] = logp[blank];
  alpha[1] = logp[ext[1]];
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * S + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * S + s - 2]);
      alpha[t * S + s] = a == kNegInf ? kNegInf : a + logp[t * classes + ext[s]];
    }
  }
  beta[(frames - 1) * S + S - 1] = 0.0;
  beta[(frames - 1) * S + S - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < S; ++s) {
      double b = beta[(t + 1) * S + s] + logp[(t + 1) * classes + ext[s]];
      if (s + 1 < S) b = log_add(b, beta[(t + 1) * S + s + 1] + logp[(t + 1) * classes + ext[s + 1]]);
      if (s + 2 < S && can_skip(s + 2)) {
        b = log_add(b, beta[(t + 1) * S + s + 2] + logp[(t + 1) * classes + ext[s + 2]]);
      }
      beta[t * S + s] = b;
    }
  }

  const double log_prob = log_add(alpha[(frames - 1) * S + S - 1], alpha[(frames - 1) * S + S - 2]);
  if (grad) {
    std::vector<double> occupancy(classes);
    for (std::size_t t = 0; t < frames; ++t) {
      std::fill(occupancy.begin(), occupancy.end(), kNegInf);
      for (std::size_t s = 0; s < S; ++s) {
        occupancy[ext[s]] = log_add(occupancy[ext[s]], alpha[t * S + s] + beta[t * S + s]);
      }
      double* g = grad->data().data() + (first + t) * classes;
      for (std::size_t k = 0; k < classes; ++k) {
        const double posterior = std::exp(logp[t * classes + k]);
        const double target_mass = occupancy[k] == kNegInf ? 0.0 : std::exp(occupancy[k] - log_prob);
        g[k] += grad_scale * (posterior - target_mass);
      }
    }
  }
  return -log_prob;
}

void require_logit_matrix(const Tensor& logits, std::size_t blank) {
  if (logits.rank() != 2 || logits.shape()[1] == 0) {
    throw std::invalid_argument("ctc: logits must be [frames x classes], got " + shape_str(logits.shape()));
  }
  if (blank >= logits.shape()[1]) throw std::invalid_argument("ctc: blank index out of range");
}

}  // namespace

CtcResult ctc_loss(const Tensor& logits, std::span<const std::size_t> target, std::size_t blank) {
  require_logit_matrix(logits, blank);
  CtcResult r;
  r.grad = Tensor(logits.shape());
  r.loss = ctc_segment(logits, 0, logits.shape()[0], target, blank, 1.0, &r.grad);
  return r;
}

Labels frame_argmax(const Tensor& logits, std::size_t first_row, std::size_t frames) {
  const std::size_t classes = logits.shape()[1];
  Labels path(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* row = logits.data().data() + (first_row + t) * classes;
    path[t] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return path;
}

Labels best_path_decode(const Tensor& logits, std::size_t blank) {
  require_logit_matrix(logits, blank);
  return collapse(frame_argmax(logits, 0, logits.shape()[0]), blank);
}

BatchCtcResult batch_ctc_loss(std::span<const CtcExample> batch, std::size_t blank) {
  BatchCtcResult out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    try {
      CtcResult r = ctc_loss(*batch[i].logits, batch[i].target, blank);
      out.sum += r.loss;
      out.grads.push_back(std::move(r.grad));
    } catch (const InfeasibleAlignment& e) {
      throw InfeasibleAlignment("example " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  out.mean = batch.empty() ? 0.0 : out.sum / static_cast<double>(batch.size());
  return out;
}

Var ctc_loss(const Var& logits, std::span<const CtcSegment> segments, std::size_t blank, CtcReduction reduction) {
  const Tensor& x = logits.value();
  require_logit_matrix(x, blank);
  if (segments.empty()) throw std::invalid_argument("ctc_loss: no segments");
  const double weight = reduction == CtcReduction::Mean ? 1.0 / static_cast<double>(segments.size()) : 1.0;
  Tensor grad(x.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const CtcSegment& seg = segments[i];
    if (seg.first_row + seg.frames > x.shape()[0] || seg.frames == 0) {
      throw std::invalid_argument("ctc_loss: segment " + std::to_string(i) + " outside the logit matrix");
    }
    try {
      total += ctc_segment(x, seg.first_row, seg.frames, seg.target, blank, weight, &grad);
    } catch (const InfeasibleAlignment& e) {
      throw InfeasibleAlignment("example " + std::to_string(i) + ": " + e.what(), i);
    }
  }
  return logits.tape().record(Tensor::scalar(total * weight), {logits},
                              [grad = std::move(grad)](const BackwardContext& ctx) {
                                const double g = ctx.out_grad[0];
                                Tensor& gx = *ctx.in_grads[0];
                                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * grad[i];
                              });
}

}  // namespace qcnn
