#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>

#include "qcnn/model.hpp"
#include "qcnn/optim.hpp"

namespace qcnn {

/// Training progress stored alongside the parameters.
struct TrainingProgress {
  std::uint64_t epochs_completed = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch = -1;
};

/// Binary checkpoint, little-endian:
///   "QCNNCKPT", u32 version, u64 config hash, u32 config length + canonical
///   model config text, progress, optimizer state, every parameter
///   (name, shape, f64 data) and Adam moments, then an FNV-1a 64 checksum of
///   all preceding bytes.
std::string encode_checkpoint(const Model& model, const OptimizerState& opt, const TrainingProgress& progress);

/// Fully parses and verifies `bytes` before touching `model`/`opt`/`progress`.
/// Throws DataError on corruption or a version, hash or shape mismatch.
void decode_checkpoint(std::string_view bytes, Model& model, OptimizerState& opt, TrainingProgress& progress);

/// Model config embedded in a checkpoint (checksum verified).
ModelConfig checkpoint_config(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const OptimizerState& opt,
                     const TrainingProgress& progress);
void load_checkpoint(const std::filesystem::path& path, Model& model, OptimizerState& opt,
                     TrainingProgress& progress);

/// Reads the file, rebuilds the model from the embedded config and loads it.
Model load_model(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace qcnn
