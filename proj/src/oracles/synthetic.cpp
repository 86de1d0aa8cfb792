#include "oracles/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace qcnn::synthetic {

namespace {

constexpr double kRate = 16000.0;
constexpr std::size_t kHop = 160;
constexpr std::size_t kWindow = 400;
constexpr std::size_t kGap = 4;

double tone_hz(std::size_t symbol) {
  static const double table[] = {400.0, 900.0, 1500.0, 2300.0, 3300.0, 4500.0, 6000.0};
  return table[symbol % 7] * (1.0 + 0.03 * static_cast<double>(symbol / 7));
}

}  // namespace

std::vector<ToyUtterance> make_toy_audio(const ToySpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::vector<ToyUtterance> out;
  for (std::size_t u = 0; u < spec.utterances; ++u) {
    const std::size_t frames = std::uniform_int_distribution<std::size_t>(spec.min_frames, spec.max_frames)(rng);
    std::size_t m = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
    while (m > 1 && frames < (m + 1) * kGap + 5 * m) --m;
    const std::size_t seg = (frames - (m + 1) * kGap) / m;

    ToyUtterance utt;
    utt.id = "toy" + std::to_string(u);
    utt.wave.sample_rate = kRate;
    utt.wave.samples.resize((frames - 1) * kHop + kWindow);
    std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
    for (double& s : utt.wave.samples) s = noise(rng);

    std::uniform_int_distribution<std::size_t> pick(0, spec.symbols.size() - 1);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::size_t frame = kGap;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t sym = pick(rng);
      utt.phones.push_back(spec.symbols[sym]);
      const double w = 2.0 * std::numbers::pi * tone_hz(sym) / kRate;
      const double p0 = phase(rng);
      const std::size_t lo = frame * kHop, hi = std::min((frame + seg) * kHop, utt.wave.samples.size());
      for (std::size_t n = lo; n < hi; ++n) utt.wave.samples[n] += 0.3 * std::sin(w * static_cast<double>(n) + p0);
      frame += seg + kGap;
    }
    out.push_back(std::move(utt));
  }
  return out;
}

std::vector<Utterance> make_toy_dataset(const ToySpec& spec) {
  const FeatureConfig fcfg;
  const SymbolTable table(spec.symbols);
  std::vector<Utterance> out;
  for (auto& a : make_toy_audio(spec)) {
    Utterance u;
    u.id = a.id;
    u.features = extract(a.wave, fcfg);
    u.phones = a.phones;
    u.labels = table.encode(a.phones);
    out.push_back(std::move(u));
  }
  return out;
}

TrainConfig toy_train_config(const ToySpec& spec) {
  TrainConfig cfg;
  cfg.model.n_conv_layers = 2;
  cfg.model.feature_maps = {8};
  cfg.model.n_dense = 1;
  cfg.model.dense_width = 32;
  cfg.model.dropout = 0.0;
  cfg.model.symbols = spec.symbols;
  cfg.batch_size = 4;
  cfg.epochs = 100;
  cfg.fine_tune_epochs = 0;
  cfg.seed = 11;
  return cfg;
}

std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, const ToySpec& spec) {
  std::filesystem::create_directories(dir / "wav");
  std::vector<ManifestEntry> entries;
  for (const auto& a : make_toy_audio(spec)) {
    const auto rel = std::filesystem::path("wav") / (a.id + ".wav");
    write_wav(dir / rel, a.wave);
    entries.push_back({a.id, rel, a.phones});
  }
  const auto manifest = dir / "manifest.tsv";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace qcnn::synthetic
