#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qcnn/config.hpp"
#include "qcnn/data.hpp"
#include "qcnn/features.hpp"

namespace qcnn::synthetic {

// Tone "phonemes": each symbol is a sinusoid at its own frequency, segments
// separated by short low-level noise gaps.
struct ToySpec {
  std::size_t utterances = 20;
  std::size_t min_frames = 50;
  std::size_t max_frames = 100;
  std::vector<std::string> symbols{"a", "e", "i", "o", "u"};
  std::uint64_t seed = 7;
};

struct ToyUtterance {
  std::string id;
  Waveform wave;
  std::vector<std::string> phones;
};

std::vector<ToyUtterance> make_toy_audio(const ToySpec& spec);

// Extracted with the default front end.
std::vector<Utterance> make_toy_dataset(const ToySpec& spec);

// Small model/training setup used by the overfit and determinism checks.
TrainConfig toy_train_config(const ToySpec& spec);

// Writes WAVs plus a manifest into `dir`; returns the manifest path.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToySpec& spec);

}  // namespace qcnn::synthetic
