#include "qcnn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "qcnn/errors.hpp"

namespace qcnn {

namespace {

constexpr std::string_view kMagic = "QCNNCKPT";
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void put_tensor(const Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(d);
    for (double v : t.data()) put<double>(v);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : buf_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + off_, sizeof(T));
    off_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(buf_.substr(off_, n));
    off_ += n;
    return s;
  }
  Tensor get_tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>();
    const std::size_t n = numel(shape);
    need(n * sizeof(double));
    std::vector<double> data(n);
    std::memcpy(data.data(), buf_.data() + off_, n * sizeof(double));
    off_ += n * sizeof(double);
    return Tensor(std::move(shape), std::move(data));
  }
  bool done() const { return off_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > buf_.size() - off_) throw DataError("checkpoint: truncated");
  }
  std::string_view buf_;
  std::size_t off_ = 0;
};

struct Decoded {
  std::string config_text;
  TrainingProgress progress;
  OptimizerState opt;
  std::vector<std::pair<std::string, Tensor>> params;
};

Decoded decode(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + sizeof(std::uint64_t) || bytes.substr(0, kMagic.size()) != kMagic) {
    throw DataError("checkpoint: bad magic");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored_sum = 0;
  std::memcpy(&stored_sum, bytes.data() + body.size(), sizeof(stored_sum));
  if (fnv1a(body) != stored_sum) throw DataError("checkpoint: checksum mismatch (file corrupted)");

  Reader r(body.substr(kMagic.size()));
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Decoded d;
  const auto hash = r.get<std::uint64_t>();
  d.config_text = r.get_string();
  if (fnv1a(d.config_text) != hash) throw DataError("checkpoint: config hash does not match embedded config");
  d.progress.epochs_completed = r.get<std::uint64_t>();
  d.progress.best_metric = r.get<double>();
  d.progress.best_epoch = r.get<std::int64_t>();
  const auto mode = r.get<std::uint8_t>();
  if (mode > 1) throw DataError("checkpoint: unknown optimizer mode");
  d.opt.mode = static_cast<OptimizerKind>(mode);
  d.opt.adam.lr = r.get<double>();
  d.opt.adam.beta1 = r.get<double>();
  d.opt.adam.beta2 = r.get<double>();
  d.opt.adam.eps = r.get<double>();
  d.opt.sgd_lr = r.get<double>();
  d.opt.step = r.get<std::uint64_t>();
  const auto n_params = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    std::string name = r.get_string();
    d.params.emplace_back(std::move(name), r.get_tensor());
  }
  const auto n_moments = r.get<std::uint32_t>();
  if (n_moments != 0 && n_moments != n_params) throw DataError("checkpoint: moment count mismatch");
  for (std::uint32_t i = 0; i < n_moments; ++i) {
    d.opt.m.push_back(r.get_tensor());
    d.opt.v.push_back(r.get_tensor());
  }
  if (!r.done()) throw DataError("checkpoint: trailing bytes");
  return d;
}

}  // namespace

std::string encode_checkpoint(const Model& model, const OptimizerState& opt, const TrainingProgress& progress) {
  Writer w;
  w.bytes().append(kMagic);
  w.put<std::uint32_t>(kVersion);
  const std::string config_text = model.config().canonical();
  w.put<std::uint64_t>(fnv1a(config_text));
  w.put_string(config_text);
  w.put<std::uint64_t>(progress.epochs_completed);
  w.put<double>(progress.best_metric);
  w.put<std::int64_t>(progress.best_epoch);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(opt.mode));
  w.put<double>(opt.adam.lr);
  w.put<double>(opt.adam.beta1);
  w.put<double>(opt.adam.beta2);
  w.put<double>(opt.adam.eps);
  w.put<double>(opt.sgd_lr);
  w.put<std::uint64_t>(opt.step);
  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put_tensor(*p.value);
  }
  const bool has_moments = opt.m.size() == params.size() && opt.v.size() == params.size();
  w.put<std::uint32_t>(has_moments ? static_cast<std::uint32_t>(params.size()) : 0u);
  if (has_moments) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.put_tensor(opt.m[i]);
      w.put_tensor(opt.v[i]);
    }
  }
  const std::uint64_t sum = fnv1a(w.bytes());
  w.put<std::uint64_t>(sum);
  return std::move(w.bytes());
}

void decode_checkpoint(std::string_view bytes, Model& model, OptimizerState& opt, TrainingProgress& progress) {
  Decoded d = decode(bytes);
  if (fnv1a(d.config_text) != model.config().hash()) {
    throw DataError("checkpoint: model configuration does not match (config hash differs)");
  }
  auto params = model.parameters();
  if (params.size() != d.params.size()) throw DataError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != d.params[i].first || params[i].value->shape() != d.params[i].second.shape()) {
      throw DataError("checkpoint: parameter " + d.params[i].first + " does not match model parameter " +
                      params[i].name);
    }
    if (!d.opt.m.empty() &&
        (d.opt.m[i].shape() != params[i].value->shape() || d.opt.v[i].shape() != params[i].value->shape())) {
      throw DataError("checkpoint: optimizer moments do not match parameter " + params[i].name);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = std::move(d.params[i].second);
  opt = std::move(d.opt);
  progress = d.progress;
}

ModelConfig checkpoint_config(std::string_view bytes) {
  const Decoded d = decode(bytes);
  try {
    return parse_model_config(d.config_text);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: embedded config invalid: ") + e.what());
  }
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const OptimizerState& opt,
                     const TrainingProgress& progress) {
  const std::string bytes = encode_checkpoint(model, opt, progress);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void load_checkpoint(const std::filesystem::path& path, Model& model, OptimizerState& opt,
                     TrainingProgress& progress) {
  try {
    decode_checkpoint(read_file_bytes(path), model, opt, progress);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Model load_model(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  try {
    Model model(checkpoint_config(bytes), 0);
    OptimizerState opt;
    TrainingProgress progress;
    decode_checkpoint(bytes, model, opt, progress);
    return model;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace qcnn
