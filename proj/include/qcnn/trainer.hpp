#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qcnn/checkpoint.hpp"
#include "qcnn/config.hpp"
#include "qcnn/data.hpp"
#include "qcnn/model.hpp"
#include "qcnn/optim.hpp"

namespace qcnn {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  OptimizerKind phase = OptimizerKind::Adam;
  double lr = 0.0;
  double train_loss = 0.0;  // mean CTC loss per utterance
  double dev_loss = 0.0;
  double dev_per = 0.0;
  std::size_t skipped = 0;
  bool improved = false;
  double seconds = 0.0;
};

/// "epoch=3 phase=adam lr=0.001 train_loss=... dev_loss=... dev_per=... skipped=0 improved=1 seconds=..."
std::string format_epoch(const EpochRecord& r);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no checkpoint files
  std::size_t workers = 1;
  std::ostream* log = nullptr;
  std::filesystem::path resume;  // checkpoint to continue from
  /// Stop after this many epochs in this call (for interrupted runs).
  std::size_t max_epochs = std::numeric_limits<std::size_t>::max();
};

struct TrainSummary {
  std::vector<EpochRecord> epochs;
  std::size_t skipped = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = -1;
};

/// Adam for cfg.epochs, then SGD fine-tuning for cfg.fine_tune_epochs. After
/// every epoch the dev set is scored; the best dev metric (PER or loss) is
/// kept as best.ckpt and restored at the end when cfg.restore_best is set.
/// Utterances whose targets cannot be aligned are logged and skipped.
///
/// Dropout masks and batch order derive from (cfg.seed, epoch, batch, shard),
/// so a run is reproducible for a fixed worker count, including across resume.
TrainSummary train(Model& model, std::span<const Utterance> train_set, std::span<const Utterance> dev_set,
                   const TrainConfig& cfg, const TrainOptions& options);

/// Mean gradient-step inputs for one batch.
struct BatchGradients {
  double loss_sum = 0.0;  // summed per-utterance CTC loss
  std::vector<Tensor> grads;
};

/// Forward/backward of one batch split into `workers` contiguous shards, each
/// on its own tape; shard gradients are summed in shard order.
BatchGradients batch_gradients(const Model& model, std::span<const Utterance> data,
                               std::span<const std::size_t> indices, CtcReduction reduction, bool training,
                               std::uint64_t rng_seed, std::size_t workers = 1);

struct EvalResult {
  double loss_mean = 0.0;
  double per = 0.0;
  std::size_t skipped = 0;  // utterances excluded from the loss
  std::vector<std::vector<std::string>> hypotheses;
};

/// Best-path decoding and PER over `data` (phones folded through `map` when given).
EvalResult evaluate(const Model& model, std::span<const Utterance> data, std::size_t batch_size,
                    const PhoneMap* map = nullptr);

std::vector<Labels> decode(const Model& model, std::span<const Utterance> data, std::size_t batch_size);

}  // namespace qcnn
