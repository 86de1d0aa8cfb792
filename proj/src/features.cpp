#include "qcnn/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "qcnn/errors.hpp"

namespace qcnn {

static_assert(std::endian::native == std::endian::little, "feature and WAV I/O assume a little-endian host");

std::size_t FeatureConfig::window_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate * window_ms / 1000.0));
}

std::size_t FeatureConfig::hop_samples() const {
  return static_cast<std::size_t>(std::llround(sample_rate * hop_ms / 1000.0));
}

void FeatureConfig::validate() const {
  if (!(sample_rate > 0.0)) throw std::invalid_argument("FeatureConfig: sample_rate must be positive");
  if (window_samples() == 0 || hop_samples() == 0) {
    throw std::invalid_argument("FeatureConfig: window and hop must span at least one sample");
  }
  if (fft_size < window_samples()) throw std::invalid_argument("FeatureConfig: fft_size shorter than the window");
  if (n_mels == 0) throw std::invalid_argument("FeatureConfig: n_mels must be positive");
  if (!(low_hz >= 0.0 && low_hz < upper_hz() && upper_hz() <= sample_rate / 2.0)) {
    throw std::invalid_argument("FeatureConfig: invalid filterbank frequency range");
  }
  if (!(log_floor > 0.0)) throw std::invalid_argument("FeatureConfig: log_floor must be positive");
}

// WAV ------------------------------------------------------------------------

namespace {

template <typename T>
T read_le(const std::string& buf, std::size_t off) {
  if (off + sizeof(T) > buf.size()) throw DataError("truncated data");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string buf = slurp(path);
  const auto fail = [&](const std::string& why) { return DataError(path.string() + ": " + why); };
  if (buf.size() < 12 || buf.compare(0, 4, "RIFF") != 0 || buf.compare(8, 4, "WAVE") != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::size_t off = 12;
  bool have_fmt = false;
  Waveform wave;
  while (off + 8 <= buf.size()) {
    const std::string id = buf.substr(off, 4);
    const auto size = read_le<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (body + size > buf.size()) throw fail("chunk '" + id + "' runs past end of file");
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      const auto format = read_le<std::uint16_t>(buf, body);
      const auto channels = read_le<std::uint16_t>(buf, body + 2);
      const auto rate = read_le<std::uint32_t>(buf, body + 4);
      const auto bits = read_le<std::uint16_t>(buf, body + 14);
      if (format != 1 || channels != 1 || bits != 16) throw fail("only 16-bit PCM mono is supported");
      wave.sample_rate = rate;
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      const std::size_t n = size / 2;
      wave.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        wave.samples[i] = static_cast<double>(read_le<std::int16_t>(buf, body + 2 * i)) / 32768.0;
      }
      return wave;
    }
    off = body + size + (size & 1u);
  }
  throw fail("no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  std::string buf = "RIFF";
  write_le<std::uint32_t>(buf, 36 + 2 * n);
  buf += "WAVEfmt ";
  write_le<std::uint32_t>(buf, 16);
  write_le<std::uint16_t>(buf, 1);
  write_le<std::uint16_t>(buf, 1);
  write_le<std::uint32_t>(buf, rate);
  write_le<std::uint32_t>(buf, rate * 2);
  write_le<std::uint16_t>(buf, 2);
  write_le<std::uint16_t>(buf, 16);
  buf += "data";
  write_le<std::uint32_t>(buf, 2 * n);
  for (double s : wave.samples) {
    const double scaled = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    write_le<std::int16_t>(buf, static_cast<std::int16_t>(scaled));
  }
  spit(path, buf);
}

// Filterbank -----------------------------------------------------------------

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t frame_count(std::size_t n_samples, const FeatureConfig& cfg) {
  const std::size_t win = cfg.window_samples();
  if (n_samples < win) return 0;
  return (n_samples - win) / cfg.hop_samples() + 1;
}

std::vector<double> hamming_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length - 1));
  }
  return w;
}

Tensor mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.low_hz);
  const double mel_hi = hz_to_mel(cfg.upper_hz());
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t m = 0; m < edges.size(); ++m) {
    edges[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) / static_cast<double>(cfg.n_mels + 1));
  }
  Tensor fb({cfg.n_mels, bins});
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.fft_size);
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      fb[m * bins + k] = w;
    }
  }
  return fb;
}

namespace {

// FFTW's planner is not re-entrant; plan execution on private buffers is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::span<double> input() { return {in_, n_}; }

  /// |X_k|^2 for k in [0, n/2].
  void power(std::span<double> out) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

Tensor log_mel_energies(std::span<const double> waveform, const FeatureConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_samples();
  const std::size_t hop = cfg.hop_samples();
  if (waveform.size() < win) {
    throw std::invalid_argument("log_mel_energies: " + std::to_string(waveform.size()) +
                                " samples is shorter than one window of " + std::to_string(win));
  }
  const std::size_t frames = frame_count(waveform.size(), cfg);
  const std::size_t bins = cfg.fft_size / 2 + 1;
  const Tensor fb = mel_filterbank(cfg);
  const std::vector<double> window = hamming_window(win);

  RealFft fft(cfg.fft_size);
  std::vector<double> spectrum(bins);
  Tensor out({cfg.width(), frames});
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = waveform.data() + t * hop;
    auto in = fft.input();
    std::fill(in.begin(), in.end(), 0.0);
    double energy = 0.0;
    for (std::size_t n = 0; n < win; ++n) {
      in[n] = frame[n] * window[n];
      energy += frame[n] * frame[n];
    }
    fft.power(spectrum);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb[m * bins + k] * spectrum[k];
      out[m * frames + t] = std::log(std::max(e, cfg.log_floor));
    }
    if (cfg.include_energy) out[cfg.n_mels * frames + t] = std::log(std::max(energy, cfg.log_floor));
  }
  return out;
}

Tensor delta(const Tensor& stream, std::size_t half_width) {
  if (stream.rank() != 2 || stream.shape()[1] == 0) {
    throw std::invalid_argument("delta: expected [features x frames] with frames >= 1, got " +
                                shape_str(stream.shape()));
  }
  if (half_width == 0) throw std::invalid_argument("delta: half_width must be >= 1");
  const std::size_t rows = stream.shape()[0];
  const auto frames = static_cast<std::ptrdiff_t>(stream.shape()[1]);
  double denom = 0.0;
  for (std::size_t n = 1; n <= half_width; ++n) denom += static_cast<double>(n * n);
  denom *= 2.0;
  Tensor out(stream.shape());
  const auto clamp = [&](std::ptrdiff_t t) { return std::clamp<std::ptrdiff_t>(t, 0, frames - 1); };
  for (std::size_t f = 0; f < rows; ++f) {
    const double* row = stream.data().data() + f * static_cast<std::size_t>(frames);
    for (std::ptrdiff_t t = 0; t < frames; ++t) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= half_width; ++n) {
        const auto dn = static_cast<std::ptrdiff_t>(n);
        acc += static_cast<double>(n) * (row[clamp(t + dn)] - row[clamp(t - dn)]);
      }
      out[f * static_cast<std::size_t>(frames) + static_cast<std::size_t>(t)] = acc / denom;
    }
  }
  return out;
}

FeatureSequence pack_quaternions(const Tensor& energies, const Tensor& deltas, const Tensor& delta_deltas) {
  if (energies.rank() != 2 || deltas.shape() != energies.shape() || delta_deltas.shape() != energies.shape()) {
    throw std::invalid_argument("pack_quaternions: streams must share one [width x frames] shape");
  }
  const Shape shape{1, 1, energies.shape()[0], energies.shape()[1]};
  return {QuaternionPlanes(Tensor(shape), energies.reshaped(shape), deltas.reshaped(shape),
                           delta_deltas.reshaped(shape))};
}

FeatureStreams unpack_quaternions(const FeatureSequence& seq) {
  const Shape shape{seq.width(), seq.frames()};
  return {seq.planes.x.reshaped(shape), seq.planes.y.reshaped(shape), seq.planes.z.reshaped(shape)};
}

FeatureSequence extract(const Waveform& wave, const FeatureConfig& cfg) {
  if (wave.samples.empty()) throw std::invalid_argument("extract: empty waveform");
  if (wave.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("extract: waveform rate " + std::to_string(wave.sample_rate) +
                                " Hz does not match configured " + std::to_string(cfg.sample_rate) + " Hz");
  }
  Tensor energies = log_mel_energies(wave.samples, cfg);
  Tensor d1 = delta(energies, cfg.delta_window);
  Tensor d2 = delta(d1, cfg.delta_window);
  return pack_quaternions(energies, d1, d2);
}

// Feature files ----------------------------------------------------------------

namespace {
constexpr std::string_view kFeatureMagic = "QCNNFEAT";
constexpr std::uint32_t kFeatureVersion = 1;
}  // namespace

std::string encode_features(const FeatureSequence& seq) {
  const std::size_t width = seq.width(), frames = seq.frames();
  std::string buf(kFeatureMagic);
  write_le<std::uint32_t>(buf, kFeatureVersion);
  write_le<std::uint32_t>(buf, static_cast<std::uint32_t>(frames));
  write_le<std::uint32_t>(buf, static_cast<std::uint32_t>(width));
  for (const Tensor* plane : {&seq.planes.x, &seq.planes.y, &seq.planes.z}) {
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < width; ++f) write_le<float>(buf, static_cast<float>((*plane)[f * frames + t]));
  }
  return buf;
}

FeatureSequence decode_features(std::string_view bytes) {
  const std::string buf(bytes);
  if (buf.size() < kFeatureMagic.size() + 12 || buf.compare(0, kFeatureMagic.size(), kFeatureMagic) != 0) {
    throw DataError("feature file: bad magic");
  }
  std::size_t off = kFeatureMagic.size();
  const auto version = read_le<std::uint32_t>(buf, off);
  const auto frames = read_le<std::uint32_t>(buf, off + 4);
  const auto width = read_le<std::uint32_t>(buf, off + 8);
  off += 12;
  if (version != kFeatureVersion) throw DataError("feature file: unsupported version " + std::to_string(version));
  if (frames == 0 || width == 0) throw DataError("feature file: empty feature matrix");
  const std::size_t expected = off + 3ull * frames * width * sizeof(float);
  if (buf.size() != expected) {
    throw DataError("feature file: expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(buf.size()));
  }
  std::array<Tensor, 3> streams;
  for (Tensor& s : streams) {
    s = Tensor({width, frames});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < width; ++f) {
        s[f * frames + t] = read_le<float>(buf, off);
        off += sizeof(float);
      }
  }
  return pack_quaternions(streams[0], streams[1], streams[2]);
}

void write_features(const std::filesystem::path& path, const FeatureSequence& seq) {
  spit(path, encode_features(seq));
}

FeatureSequence read_features(const std::filesystem::path& path) {
  try {
    return decode_features(slurp(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace qcnn
