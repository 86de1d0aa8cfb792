#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/acceptance.hpp"
#include "qcnn/checkpoint.hpp"
#include "qcnn/config.hpp"
#include "qcnn/data.hpp"
#include "qcnn/errors.hpp"
#include "qcnn/features.hpp"
#include "qcnn/model.hpp"
#include "qcnn/trainer.hpp"

namespace {

using namespace qcnn;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> fine_tune_epochs;
  std::string checkpoint;
  std::string out;
  std::size_t workers = 1;
  std::string criteria;
};

void require(const std::string& value, const char* flag, const char* cmd) {
  if (value.empty()) throw UsageError(std::string(cmd) + ": " + flag + " is required");
}

TrainConfig config_from(const Options& o) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.epochs) cfg.epochs = *o.epochs;
  if (o.fine_tune_epochs) cfg.fine_tune_epochs = *o.fine_tune_epochs;
  // Model keys only matter to train; the other commands read the model from a checkpoint.
  try {
    cfg.features.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

// extract: WAV manifest -> feature files plus a manifest pointing at them.
int cmd_extract(const Options& o) {
  require(o.manifest, "--manifest", "extract");
  require(o.out, "--out", "extract");
  const TrainConfig cfg = config_from(o);
  const auto entries = read_manifest(o.manifest);
  const std::filesystem::path out_dir = o.out;
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> written;
  for (const auto& e : entries) {
    Waveform wave = read_wav(e.path);
    FeatureSequence seq;
    try {
      seq = extract(wave, cfg.features);
    } catch (const std::invalid_argument& err) {
      throw DataError("utterance " + e.id + ": " + err.what());
    }
    const std::filesystem::path rel = e.id + ".feat";
    write_features(out_dir / rel, seq);
    written.push_back({e.id, rel, e.phones});
    std::cout << "extracted utt=" << e.id << " frames=" << seq.frames() << " width=" << seq.width() << '\n';
  }
  write_manifest(out_dir / "manifest.tsv", written);
  std::cout << "extract utterances=" << written.size() << " manifest=" << (out_dir / "manifest.tsv").string() << '\n';
  return kOk;
}

int cmd_train(const Options& o) {
  require(o.config, "--config", "train");
  require(o.manifest, "--manifest", "train");
  require(o.out, "--out", "train");
  const TrainConfig cfg = config_from(o);
  cfg.validate();
  const SymbolTable symbols = cfg.model.symbol_table();
  const auto train_entries = read_manifest(o.manifest);
  const auto train_set = load_dataset(train_entries, symbols, cfg.features, o.workers);
  std::vector<Utterance> dev_set;
  if (!cfg.dev_manifest.empty()) {
    const auto dev_entries = read_manifest(cfg.dev_manifest);
    dev_set = load_dataset(dev_entries, symbols, cfg.features, o.workers);
  }

  const std::filesystem::path out_dir = o.out;
  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir / "train.log", std::ios::app);
  struct Tee : std::streambuf {
    std::streambuf *a, *b;
    int overflow(int c) override {
      if (c == EOF) return !EOF;
      return a->sputc(static_cast<char>(c)) == EOF || b->sputc(static_cast<char>(c)) == EOF ? EOF : c;
    }
    int sync() override { return a->pubsync() | b->pubsync(); }
  } tee;
  tee.a = std::cout.rdbuf();
  tee.b = log_file.rdbuf();
  std::ostream log(&tee);

  Model model(cfg.model, cfg.seed);
  log << "start train_utterances=" << train_set.size() << " dev_utterances=" << dev_set.size()
      << " params=" << model.count_params() << " seed=" << cfg.seed << " workers=" << o.workers
      << " config_hash=" << std::hex << cfg.model.hash() << std::dec << std::endl;
  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.workers = o.workers;
  opts.log = &log;
  if (!o.checkpoint.empty()) opts.resume = o.checkpoint;
  const auto summary = train(model, train_set, dev_set, cfg, opts);
  OptimizerState final_opt;
  TrainingProgress final_progress{summary.epochs.empty() ? 0 : summary.epochs.back().epoch, summary.best_metric,
                                  summary.best_epoch};
  save_checkpoint(out_dir / "final.ckpt", model, final_opt, final_progress);
  log << "done epochs=" << summary.epochs.size() << " best_epoch=" << summary.best_epoch + 1
      << " best_metric=" << summary.best_metric << " skipped=" << summary.skipped
      << " checkpoint=" << (out_dir / "final.ckpt").string() << std::endl;
  return kOk;
}

struct Loaded {
  Model model;
  TrainConfig cfg;
  std::vector<Utterance> data;
};

Loaded load_for_inference(const Options& o, const char* cmd) {
  require(o.checkpoint, "--checkpoint", cmd);
  require(o.manifest, "--manifest", cmd);
  Model model = load_model(o.checkpoint);
  TrainConfig cfg = config_from(o);
  const auto entries = read_manifest(o.manifest);
  auto data = load_dataset(entries, model.config().symbol_table(), cfg.features, o.workers);
  return {std::move(model), std::move(cfg), std::move(data)};
}

int cmd_eval(const Options& o) {
  const Loaded l = load_for_inference(o, "eval");
  const PhoneMap map = l.cfg.phone_map.empty() ? PhoneMap() : PhoneMap::load(l.cfg.phone_map);
  const EvalResult r = evaluate(l.model, l.data, l.cfg.batch_size, &map);
  std::printf("eval utterances=%zu loss=%.6f per=%.4f skipped=%zu mapped=%d\n", l.data.size(), r.loss_mean, r.per,
              r.skipped, map.empty() ? 0 : 1);
  return kOk;
}

int cmd_decode(const Options& o) {
  const Loaded l = load_for_inference(o, "decode");
  const auto labels = decode(l.model, l.data, l.cfg.batch_size);
  const SymbolTable symbols = l.model.config().symbol_table();
  std::ofstream file;
  if (!o.out.empty()) {
    file.open(o.out);
    if (!file) throw DataError("cannot write " + o.out);
  }
  std::ostream& out = o.out.empty() ? std::cout : file;
  for (std::size_t i = 0; i < l.data.size(); ++i) {
    out << l.data[i].id << '\t';
    const auto names = symbols.decode(labels[i]);
    for (std::size_t k = 0; k < names.size(); ++k) out << (k ? " " : "") << names[k];
    out << '\n';
  }
  return kOk;
}

int cmd_inspect(const Options& o) {
  ModelConfig mcfg;
  if (!o.checkpoint.empty()) {
    mcfg = checkpoint_config(read_file_bytes(o.checkpoint));
  } else {
    require(o.config, "--config or --checkpoint", "inspect");
    mcfg = load_config(o.config).model;
  }
  const auto q = layer_table(mcfg, Algebra::Quaternion);
  const auto r = layer_table(mcfg, Algebra::Real);
  std::printf("%-8s %-8s %-20s %12s %8s %14s %8s\n", "layer", "kind", "shape", "weights", "other", "real_weights",
              "ratio");
  std::size_t qw = 0, qo = 0, rw = 0, ro = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::printf("%-8s %-8s %-20s %12zu %8zu %14zu %8.3f\n", q[i].name.c_str(), q[i].kind.c_str(), q[i].shape.c_str(),
                q[i].weights, q[i].other, r[i].weights,
                static_cast<double>(r[i].weights) / static_cast<double>(q[i].weights));
    qw += q[i].weights;
    qo += q[i].other;
    rw += r[i].weights;
    ro += r[i].other;
  }
  std::printf("total quaternion_params=%zu quaternion_weights=%zu real_params=%zu real_weights=%zu classes=%zu\n",
              qw + qo, qw, rw + ro, rw, mcfg.symbols.size() + 1);
  std::printf("config_hash=%016llx\n", static_cast<unsigned long long>(mcfg.hash()));
  return kOk;
}

int cmd_selftest(const Options& o) {
  std::vector<int> ids;
  std::stringstream ss(o.criteria);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.empty()) continue;
    try {
      const int id = std::stoi(tok);
      if (id < 1 || id > 9) throw std::out_of_range(tok);
      ids.push_back(id);
    } catch (const std::exception&) {
      throw UsageError("selftest: --criteria expects ids 1..9 separated by commas, got '" + tok + "'");
    }
  }
  const auto results = acceptance::run(ids, std::cout);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.passed ? 1 : 0;
  std::cout << "selftest passed=" << passed << " total=" << results.size() << std::endl;
  return passed == results.size() ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quaternion CNN + CTC acoustic model toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Configuration file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--manifest", o.manifest, "Utterance manifest: id<TAB>path<TAB>phones");
    sub->add_option("--seed", o.seed, "Override the configured seed");
    sub->add_option("--epochs", o.epochs, "Override the number of Adam epochs");
    sub->add_option("--fine-tune-epochs", o.fine_tune_epochs, "Override the number of SGD fine-tuning epochs");
    sub->add_option("--checkpoint", o.checkpoint, "Checkpoint to load (train: resume from it)");
    sub->add_option("--out", o.out, "Output directory (decode: output file)");
    sub->add_option("--workers", o.workers, "Worker threads for loading and batch shards")
        ->check(CLI::Range(std::size_t{1}, std::size_t{256}));
    return sub;
  };
  auto* extract_cmd = common(app.add_subcommand("extract", "Compute feature files from a WAV manifest"));
  auto* train_cmd = common(app.add_subcommand("train", "Train a model; writes checkpoints and train.log"));
  auto* eval_cmd = common(app.add_subcommand("eval", "Report CTC loss and phoneme error rate"));
  auto* decode_cmd = common(app.add_subcommand("decode", "Best-path decode every utterance"));
  auto* inspect_cmd = common(app.add_subcommand("inspect", "Print the layer table and parameter counts"));
  auto* selftest_cmd = common(app.add_subcommand("selftest", "Run the built-in oracle and acceptance checks"));
  selftest_cmd->add_option("--criteria", o.criteria, "Comma-separated subset of checks (1..9)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (extract_cmd->parsed()) return cmd_extract(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (eval_cmd->parsed()) return cmd_eval(o);
    if (decode_cmd->parsed()) return cmd_decode(o);
    if (inspect_cmd->parsed()) return cmd_inspect(o);
    if (selftest_cmd->parsed()) return cmd_selftest(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
