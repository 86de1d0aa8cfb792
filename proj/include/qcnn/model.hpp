#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qcnn/autodiff.hpp"
#include "qcnn/config.hpp"
#include "qcnn/qnn.hpp"

namespace qcnn {

struct ParamRef {
  std::string name;
  Tensor* value;
  bool regularized;
};

struct ConstParamRef {
  std::string name;
  const Tensor* value;
  bool regularized;
};

enum class Algebra { Quaternion, Real };

/// One row of the parameter table printed by `inspect`.
struct LayerInfo {
  std::string name;
  std::string kind;
  std::string shape;
  std::size_t weights = 0;
  std::size_t other = 0;  // biases and PReLU slopes
};

/// Layer table of the model described by `cfg`. Algebra::Real gives the
/// real-valued model with the same real-equivalent widths (4x each
/// quaternion width); its output head is identical.
std::vector<LayerInfo> layer_table(const ModelConfig& cfg, Algebra algebra);

/// Quaternion CNN acoustic model:
///
///   qconv -> PReLU -> freq max-pool
///   (n_conv_layers - 1) x [qconv -> PReLU -> dropout]
///   n_dense x [qdense -> PReLU -> dropout]
///   real affine over the 4 * dense_width component values -> class logits
///
/// Convolutions use 'same' zero padding; time is never pooled, so there is
/// one logit row per input frame.
class Model {
 public:
  /// Validates `cfg`; throws ConfigError on a bad field.
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::size_t num_classes() const { return cfg_.symbols.size() + 1; }
  std::size_t blank() const { return cfg_.symbols.size(); }

  /// All trainable tensors in a fixed order.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;

  std::size_t count_params() const;
  std::size_t count_weights() const;

  struct Forward {
    Var logits;               // [(batch * frames) x classes], row b * frames + t
    std::vector<Var> leaves;  // parameter leaves, same order as parameters()
  };

  /// `input` planes are (batch, 1, input_width, frames); frames at or past
  /// lengths[b] are treated as padding. Dropout draws from `rng` only when
  /// `training` is set.
  Forward forward(Tape& tape, const QuaternionPlanes& input, std::span<const std::size_t> lengths, bool training,
                  std::mt19937_64& rng) const;

  /// Gradients of the last backward pass, in parameters() order.
  static std::vector<Tensor> gradients(const Tape& tape, const Forward& fwd);

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F&& f);

  ModelConfig cfg_;
  std::vector<QConvLayer> convs_;
  std::vector<Tensor> conv_slopes_;
  std::vector<QDenseLayer> denses_;
  std::vector<Tensor> dense_slopes_;
  Tensor out_weight_;
  Tensor out_bias_;
};

}  // namespace qcnn
