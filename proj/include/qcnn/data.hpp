#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qcnn/ctc.hpp"
#include "qcnn/features.hpp"

namespace qcnn {

/// One manifest line: "utterance-id <TAB> path <TAB> space-separated phonemes".
struct ManifestEntry {
  std::string id;
  std::filesystem::path path;  // .wav is extracted on load; anything else is a feature file
  std::vector<std::string> phones;
};

/// Relative paths are resolved against the manifest's directory. Blank lines
/// and '#' comments are skipped. Throws DataError with the line number.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);

struct Utterance {
  std::string id;
  FeatureSequence features;
  std::vector<std::string> phones;
  Labels labels;
};

/// Loads features (extracting WAV input with `cfg`) and encodes transcripts
/// with `symbols`. Unknown phones raise DataError. `workers` > 1 loads
/// utterances concurrently; the result order follows the manifest.
std::vector<Utterance> load_dataset(std::span<const ManifestEntry> entries, const SymbolTable& symbols,
                                    const FeatureConfig& cfg, std::size_t workers = 1);

/// Zero-padded batch; input planes are (batch, 1, width, max_frames).
struct Batch {
  QuaternionPlanes input;
  std::vector<std::size_t> lengths;
  std::vector<Labels> targets;
  std::vector<std::size_t> indices;  // positions in the source dataset
};

Batch make_batch(std::span<const Utterance> data, std::span<const std::size_t> indices);

/// Groups utterances of similar length: sort by (frames, index), chunk into
/// batches of `batch_size`, then shuffle the batch order with `rng` (if given).
std::vector<std::vector<std::size_t>> bucket_batches(std::span<const Utterance> data,
                                                     std::span<const std::size_t> indices, std::size_t batch_size,
                                                     std::mt19937_64* rng);

/// Folds a fine phone set onto a scoring set ("src dst" per line; a line
/// with only "src" deletes that phone). Unlisted phones map to themselves.
class PhoneMap {
 public:
  PhoneMap() = default;
  static PhoneMap load(const std::filesystem::path& path);
  static PhoneMap parse(const std::string& text);

  std::vector<std::string> apply(std::span<const std::string> phones) const;
  bool empty() const { return map_.empty(); }

 private:
  std::map<std::string, std::string> map_;
};

/// Levenshtein distance with unit substitution, insertion and deletion costs.
std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref);

/// 100 * sum(edit distance) / sum(reference length); 0 when there are no
/// reference tokens.
double phone_error_rate(std::span<const std::vector<std::string>> hyps,
                        std::span<const std::vector<std::string>> refs, const PhoneMap* map = nullptr);

}  // namespace qcnn
