#include "qcnn/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qcnn/errors.hpp"

namespace qcnn {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(mix(base) ^ a) ^ b) ^ c);
}

std::size_t ModelConfig::maps_at(std::size_t layer) const {
  if (feature_maps.size() == 1) return feature_maps.front();
  return feature_maps.at(layer);
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
  if (input_width == 0) fail("input_width", "must be positive");
  if (n_conv_layers == 0) fail("n_conv_layers", "at least one convolution layer is required");
  if (feature_maps.empty() || (feature_maps.size() != 1 && feature_maps.size() != n_conv_layers)) {
    fail("feature_maps", "give one value or one per conv layer (" + std::to_string(n_conv_layers) + ")");
  }
  for (std::size_t m : feature_maps) {
    if (m == 0) fail("feature_maps", "counts must be positive");
  }
  if (kernel_freq == 0 || kernel_time == 0) fail("kernel_freq/kernel_time", "must be positive");
  if (kernel_freq % 2 == 0 || kernel_time % 2 == 0) fail("kernel_freq/kernel_time", "'same' padding needs odd sizes");
  if (pool_width == 0) fail("pool_width", "must be >= 1");
  if (pool_width > input_width) fail("pool_width", "exceeds input_width");
  if (dense_width == 0 && n_dense > 0) fail("dense_width", "must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout", "must lie in [0, 1)");
  if (!(l2 >= 0.0)) fail("l2", "must be non-negative");
  if (symbols.empty()) fail("symbols", "symbol table is empty");
  try {
    SymbolTable check(symbols);
  } catch (const std::invalid_argument& e) {
    fail("symbols", e.what());
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::size_t parse_size(const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string&)>;

const std::map<std::string, Setter>& model_keys() {
  static const std::map<std::string, Setter> keys = {
      {"input_width", [](TrainConfig& c, const std::string& v) { c.model.input_width = parse_size(v); }},
      {"n_conv_layers", [](TrainConfig& c, const std::string& v) { c.model.n_conv_layers = parse_size(v); }},
      {"feature_maps",
       [](TrainConfig& c, const std::string& v) {
         c.model.feature_maps.clear();
         for (const auto& tok : split_ws(v)) c.model.feature_maps.push_back(parse_size(tok));
       }},
      {"kernel_freq", [](TrainConfig& c, const std::string& v) { c.model.kernel_freq = parse_size(v); }},
      {"kernel_time", [](TrainConfig& c, const std::string& v) { c.model.kernel_time = parse_size(v); }},
      {"pool_width", [](TrainConfig& c, const std::string& v) { c.model.pool_width = parse_size(v); }},
      {"n_dense", [](TrainConfig& c, const std::string& v) { c.model.n_dense = parse_size(v); }},
      {"dense_width", [](TrainConfig& c, const std::string& v) { c.model.dense_width = parse_size(v); }},
      {"dropout", [](TrainConfig& c, const std::string& v) { c.model.dropout = parse_double(v); }},
      {"l2", [](TrainConfig& c, const std::string& v) { c.model.l2 = parse_double(v); }},
      {"prelu_init", [](TrainConfig& c, const std::string& v) { c.model.prelu_init = parse_double(v); }},
      {"init",
       [](TrainConfig& c, const std::string& v) {
         if (v == "he") {
           c.model.init = InitCriterion::He;
         } else if (v == "glorot") {
           c.model.init = InitCriterion::Glorot;
         } else {
           throw ConfigError("expected 'he' or 'glorot', got '" + v + "'");
         }
       }},
      {"bias", [](TrainConfig& c, const std::string& v) { c.model.bias = parse_bool(v); }},
      {"symbols", [](TrainConfig& c, const std::string& v) { c.model.symbols = split_ws(v); }},
  };
  return keys;
}

const std::map<std::string, Setter>& other_keys() {
  static const std::map<std::string, Setter> keys = {
      {"sample_rate", [](TrainConfig& c, const std::string& v) { c.features.sample_rate = parse_double(v); }},
      {"window_ms", [](TrainConfig& c, const std::string& v) { c.features.window_ms = parse_double(v); }},
      {"hop_ms", [](TrainConfig& c, const std::string& v) { c.features.hop_ms = parse_double(v); }},
      {"n_mels", [](TrainConfig& c, const std::string& v) { c.features.n_mels = parse_size(v); }},
      {"fft_size", [](TrainConfig& c, const std::string& v) { c.features.fft_size = parse_size(v); }},
      {"include_energy", [](TrainConfig& c, const std::string& v) { c.features.include_energy = parse_bool(v); }},
      {"delta_window", [](TrainConfig& c, const std::string& v) { c.features.delta_window = parse_size(v); }},
      {"log_floor", [](TrainConfig& c, const std::string& v) { c.features.log_floor = parse_double(v); }},
      {"low_hz", [](TrainConfig& c, const std::string& v) { c.features.low_hz = parse_double(v); }},
      {"high_hz", [](TrainConfig& c, const std::string& v) { c.features.high_hz = parse_double(v); }},
      {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = parse_size(v); }},
      {"epochs", [](TrainConfig& c, const std::string& v) { c.epochs = parse_size(v); }},
      {"fine_tune_epochs", [](TrainConfig& c, const std::string& v) { c.fine_tune_epochs = parse_size(v); }},
      {"adam_lr", [](TrainConfig& c, const std::string& v) { c.adam_lr = parse_double(v); }},
      {"adam_beta1", [](TrainConfig& c, const std::string& v) { c.adam_beta1 = parse_double(v); }},
      {"adam_beta2", [](TrainConfig& c, const std::string& v) { c.adam_beta2 = parse_double(v); }},
      {"adam_eps", [](TrainConfig& c, const std::string& v) { c.adam_eps = parse_double(v); }},
      {"sgd_lr", [](TrainConfig& c, const std::string& v) { c.sgd_lr = parse_double(v); }},
      {"loss_reduction",
       [](TrainConfig& c, const std::string& v) {
         if (v == "sum") {
           c.loss_reduction = CtcReduction::Sum;
         } else if (v == "mean") {
           c.loss_reduction = CtcReduction::Mean;
         } else {
           throw ConfigError("expected 'sum' or 'mean', got '" + v + "'");
         }
       }},
      {"early_stop",
       [](TrainConfig& c, const std::string& v) {
         if (v == "per") {
           c.early_stop = EarlyStopMetric::Per;
         } else if (v == "loss") {
           c.early_stop = EarlyStopMetric::Loss;
         } else {
           throw ConfigError("expected 'per' or 'loss', got '" + v + "'");
         }
       }},
      {"patience", [](TrainConfig& c, const std::string& v) { c.patience = parse_size(v); }},
      {"restore_best", [](TrainConfig& c, const std::string& v) { c.restore_best = parse_bool(v); }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
      {"dev_manifest", [](TrainConfig& c, const std::string& v) { c.dev_manifest = v; }},
      {"phone_map", [](TrainConfig& c, const std::string& v) { c.phone_map = v; }},
  };
  return keys;
}

}  // namespace

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) return line.substr(0, i);
  }
  return line;
}

namespace {

TrainConfig parse_lines(const std::string& text, bool model_only) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const Setter* setter = nullptr;
    if (auto it = model_keys().find(key); it != model_keys().end()) {
      setter = &it->second;
    } else if (auto jt = other_keys().find(key); !model_only && jt != other_keys().end()) {
      setter = &jt->second;
    }
    if (!setter) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      (*setter)(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  return cfg;
}

}  // namespace

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "input_width = " << input_width << '\n';
  os << "n_conv_layers = " << n_conv_layers << '\n';
  os << "feature_maps =";
  for (std::size_t m : feature_maps) os << ' ' << m;
  os << '\n';
  os << "kernel_freq = " << kernel_freq << '\n';
  os << "kernel_time = " << kernel_time << '\n';
  os << "pool_width = " << pool_width << '\n';
  os << "n_dense = " << n_dense << '\n';
  os << "dense_width = " << dense_width << '\n';
  os << "dropout = " << fmt_double(dropout) << '\n';
  os << "l2 = " << fmt_double(l2) << '\n';
  os << "prelu_init = " << fmt_double(prelu_init) << '\n';
  os << "init = " << (init == InitCriterion::He ? "he" : "glorot") << '\n';
  os << "bias = " << (bias ? "true" : "false") << '\n';
  os << "symbols =";
  for (const auto& s : symbols) os << ' ' << s;
  os << '\n';
  return os.str();
}

std::uint64_t ModelConfig::hash() const { return fnv1a(canonical()); }

void TrainConfig::validate() const {
  model.validate();
  features.validate();
  if (features.width() != model.input_width) {
    throw ConfigError("input_width: model expects " + std::to_string(model.input_width) +
                      " but the front end produces " + std::to_string(features.width()));
  }
  if (batch_size == 0) throw ConfigError("batch_size: must be positive");
  if (!(adam_lr >= 0.0) || !(sgd_lr >= 0.0)) throw ConfigError("adam_lr/sgd_lr: must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam_beta1/adam_beta2: must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps: must be positive");
}

TrainConfig parse_config(const std::string& text) { return parse_lines(text, false); }

ModelConfig parse_model_config(const std::string& text) { return parse_lines(text, true).model; }

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg;
  try {
    cfg = parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(cfg.dev_manifest);
  resolve(cfg.phone_map);
  return cfg;
}

}  // namespace qcnn
