#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qcnn/ctc.hpp"
#include "qcnn/features.hpp"
#include "qcnn/qnn.hpp"

namespace qcnn {

/// Invalid configuration; the message names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Architecture of the quaternion acoustic model. Widths are in quaternion
/// units; the real-equivalent width is four times larger.
struct ModelConfig {
  std::size_t input_width = 41;
  std::size_t n_conv_layers = 10;
  /// One entry per conv layer, or a single entry shared by all of them.
  std::vector<std::size_t> feature_maps{64};
  std::size_t kernel_freq = 3;
  std::size_t kernel_time = 5;
  std::size_t pool_width = 3;
  std::size_t n_dense = 3;
  std::size_t dense_width = 256;
  double dropout = 0.3;
  double l2 = 1e-5;
  double prelu_init = 0.25;
  InitCriterion init = InitCriterion::He;
  bool bias = true;
  std::vector<std::string> symbols;

  std::size_t maps_at(std::size_t layer) const;
  std::size_t pooled_width() const { return input_width / pool_width; }
  SymbolTable symbol_table() const { return SymbolTable(symbols); }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  /// Stable "key = value" rendering; the basis of hash().
  std::string canonical() const;
  std::uint64_t hash() const;
};

enum class EarlyStopMetric { Per, Loss };

struct TrainConfig {
  ModelConfig model;
  FeatureConfig features;
  std::size_t batch_size = 8;
  std::size_t epochs = 100;
  std::size_t fine_tune_epochs = 50;
  double adam_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_lr = 1e-5;
  CtcReduction loss_reduction = CtcReduction::Mean;
  EarlyStopMetric early_stop = EarlyStopMetric::Per;
  std::size_t patience = 0;  // 0 disables early stopping
  bool restore_best = true;
  std::uint64_t seed = 1;
  std::string dev_manifest;
  std::string phone_map;

  void validate() const;
};

/// Parses flat "key = value" text; '#' starts a comment. Unknown keys and
/// malformed values raise ConfigError with the line number.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Parses only the model keys of a canonical() rendering.
ModelConfig parse_model_config(const std::string& text);

/// Drops a trailing comment: '#' at the start of the line or after
/// whitespace. A '#' inside a token (TIMIT's "h#") is kept.
std::string strip_comment(const std::string& line);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

/// Mixes a base seed with stream indices (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace qcnn
