#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qcnn/qnn.hpp"
#include "qcnn/tensor.hpp"

namespace qcnn {

/// Front-end settings. Defaults: 16 kHz, 25 ms Hamming window, 10 ms hop,
/// 512-point FFT, 40 HTK-mel bands plus one frame log-energy row.
struct FeatureConfig {
  double sample_rate = 16000.0;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = 40;
  std::size_t fft_size = 512;
  bool include_energy = true;
  std::size_t delta_window = 2;
  double log_floor = 1e-10;
  double low_hz = 0.0;
  double high_hz = 0.0;  // 0 means Nyquist

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  /// Base features per frame: n_mels (+1 with energy). 41 by default.
  std::size_t width() const { return n_mels + (include_energy ? 1 : 0); }
  double upper_hz() const { return high_hz > 0.0 ? high_hz : sample_rate / 2.0; }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct Waveform {
  std::vector<double> samples;  // scaled to [-1, 1)
  double sample_rate = 16000.0;
};

/// 16-bit PCM mono RIFF/WAVE. Throws DataError on anything else.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& wave);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Frames of `window` samples every `hop` samples that fit entirely.
std::size_t frame_count(std::size_t n_samples, const FeatureConfig& cfg);

std::vector<double> hamming_window(std::size_t length);

/// Triangular filters [n_mels x (fft_size/2 + 1)] over FFT bin frequencies.
Tensor mel_filterbank(const FeatureConfig& cfg);

/// [width x n_frames] log filterbank energies; the last row is the frame
/// log-energy when enabled. Throws std::invalid_argument for input shorter
/// than one window.
Tensor log_mel_energies(std::span<const double> waveform, const FeatureConfig& cfg);

/// Regression deltas over +-half_width frames with edge replication.
Tensor delta(const Tensor& stream, std::size_t half_width);

/// Per-utterance acoustic quaternions, planes shaped (1, 1, width, n_frames).
/// Real plane is zero; i, j, k carry energy, delta and delta-delta.
struct FeatureSequence {
  QuaternionPlanes planes;

  std::size_t width() const { return planes.shape()[2]; }
  std::size_t frames() const { return planes.shape()[3]; }
};

struct FeatureStreams {
  Tensor energies;      // [width x frames]
  Tensor deltas;        // [width x frames]
  Tensor delta_deltas;  // [width x frames]
};

FeatureSequence pack_quaternions(const Tensor& energies, const Tensor& deltas, const Tensor& delta_deltas);
FeatureStreams unpack_quaternions(const FeatureSequence& seq);

/// log_mel_energies -> delta -> delta again -> pack_quaternions. No mean or
/// variance normalization is applied.
FeatureSequence extract(const Waveform& wave, const FeatureConfig& cfg);

/// Binary feature file:
///   8 bytes  magic "QCNNFEAT"
///   u32      version (1)
///   u32      frame count
///   u32      feature width
///   f32[]    energies, deltas, delta-deltas, each frames x width row-major
/// All integers and floats little-endian.
std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes);
void write_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::filesystem::path& path);

}  // namespace qcnn
