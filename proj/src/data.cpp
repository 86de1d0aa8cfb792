#include "qcnn/data.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "qcnn/config.hpp"
#include "qcnn/errors.hpp"

namespace qcnn {

namespace {

std::vector<std::string> tokens(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'id<TAB>path<TAB>phones'");
    }
    ManifestEntry e;
    e.id = line.substr(0, t1);
    std::filesystem::path p = line.substr(t1 + 1, t2 - t1 - 1);
    e.path = p.is_relative() ? path.parent_path() / p : p;
    e.phones = tokens(line.substr(t2 + 1));
    if (e.id.empty() || p.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty field");
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  for (const auto& e : entries) {
    out << e.id << '\t' << e.path.string() << '\t';
    for (std::size_t i = 0; i < e.phones.size(); ++i) out << (i ? " " : "") << e.phones[i];
    out << '\n';
  }
}

std::vector<Utterance> load_dataset(std::span<const ManifestEntry> entries, const SymbolTable& symbols,
                                    const FeatureConfig& cfg, std::size_t workers) {
  std::vector<Utterance> out(entries.size());
  auto load_one = [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    Utterance u;
    u.id = e.id;
    u.phones = e.phones;
    try {
      u.labels = symbols.encode(e.phones);
    } catch (const std::out_of_range& err) {
      throw DataError("utterance " + e.id + ": " + err.what());
    }
    if (e.path.extension() == ".wav") {
      try {
        u.features = extract(read_wav(e.path), cfg);
      } catch (const std::invalid_argument& err) {
        throw DataError("utterance " + e.id + ": " + err.what());
      }
    } else {
      u.features = read_features(e.path);
    }
    out[i] = std::move(u);
  };

  workers = std::max<std::size_t>(1, std::min(workers, entries.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) load_one(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < entries.size(); i = next++) {
        try {
          load_one(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

Batch make_batch(std::span<const Utterance> data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const std::size_t width = data[indices.front()].features.width();
  std::size_t max_frames = 0;
  for (std::size_t i : indices) {
    if (data[i].features.width() != width) throw DataError("utterance " + data[i].id + ": feature width differs");
    max_frames = std::max(max_frames, data[i].features.frames());
  }
  Batch b;
  b.input = QuaternionPlanes(Shape{indices.size(), 1, width, max_frames});
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const Utterance& u = data[indices[n]];
    const std::size_t frames = u.features.frames();
    auto src = u.features.planes.planes();
    auto dst = b.input.planes();
    for (int c = 0; c < 4; ++c)
      for (std::size_t f = 0; f < width; ++f)
        for (std::size_t t = 0; t < frames; ++t)
          (*dst[c])[(n * width + f) * max_frames + t] = (*src[c])[f * frames + t];
    b.lengths.push_back(frames);
    b.targets.push_back(u.labels);
    b.indices.push_back(indices[n]);
  }
  return b;
}

std::vector<std::vector<std::size_t>> bucket_batches(std::span<const Utterance> data,
                                                     std::span<const std::size_t> indices, std::size_t batch_size,
                                                     std::mt19937_64* rng) {
  if (batch_size == 0) throw std::invalid_argument("bucket_batches: batch_size must be positive");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data[a].features.frames() < data[b].features.frames();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  if (rng) std::shuffle(batches.begin(), batches.end(), *rng);
  return batches;
}

PhoneMap PhoneMap::parse(const std::string& text) {
  PhoneMap m;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = tokens(strip_comment(line));
    if (t.empty()) continue;
    if (t.size() > 2) throw DataError("phone map line " + std::to_string(lineno) + ": expected 'src [dst]'");
    m.map_[t[0]] = t.size() == 2 ? t[1] : std::string();
  }
  return m;
}

PhoneMap PhoneMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open phone map " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> PhoneMap::apply(std::span<const std::string> phones) const {
  std::vector<std::string> out;
  out.reserve(phones.size());
  for (const auto& p : phones) {
    const auto it = map_.find(p);
    if (it == map_.end()) {
      out.push_back(p);
    } else if (!it->second.empty()) {
      out.push_back(it->second);
    }
  }
  return out;
}

std::size_t edit_distance(std::span<const std::string> hyp, std::span<const std::string> ref) {
  std::vector<std::size_t> prev(ref.size() + 1), cur(ref.size() + 1);
  for (std::size_t j = 0; j <= ref.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[ref.size()];
}

double phone_error_rate(std::span<const std::vector<std::string>> hyps,
                        std::span<const std::vector<std::string>> refs, const PhoneMap* map) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("phone_error_rate: hypothesis/reference count mismatch");
  std::size_t errors = 0, total = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (map && !map->empty()) {
      const auto h = map->apply(hyps[i]);
      const auto r = map->apply(refs[i]);
      errors += edit_distance(h, r);
      total += r.size();
    } else {
      errors += edit_distance(hyps[i], refs[i]);
      total += refs[i].size();
    }
  }
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(errors) / static_cast<double>(total);
}

}  // namespace qcnn
