#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "oracles/acceptance.hpp"
#include "oracles/oracles.hpp"
#include "oracles/synthetic.hpp"
#include "qcnn/checkpoint.hpp"
#include "qcnn/config.hpp"
#include "qcnn/data.hpp"
#include "qcnn/errors.hpp"
#include "qcnn/model.hpp"
#include "qcnn/optim.hpp"
#include "qcnn/trainer.hpp"

using namespace qcnn;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qcnn_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

ModelConfig small_model() {
  ModelConfig m;
  m.n_conv_layers = 2;
  m.feature_maps = {2};
  m.n_dense = 1;
  m.dense_width = 4;
  m.dropout = 0.2;
  m.symbols = {"a", "e", "i", "o", "u"};
  return m;
}

const std::vector<Utterance>& toy_data() {
  static const std::vector<Utterance> data = [] {
    synthetic::ToySpec spec;
    spec.utterances = 6;
    return synthetic::make_toy_dataset(spec);
  }();
  return data;
}

TrainConfig small_train() {
  TrainConfig cfg;
  cfg.model = small_model();
  cfg.batch_size = 2;
  cfg.epochs = 2;
  cfg.fine_tune_epochs = 1;
  cfg.seed = 5;
  return cfg;
}

std::vector<Tensor> snapshot(const Model& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(*p.value);
  return out;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("config parsing") {
  const TrainConfig c = parse_config(
      "# comment\n"
      "n_conv_layers = 6\n"
      "feature_maps = 8 8 16 16 32 32   # per layer\n"
      "symbols = h# aa b\n"
      "init = glorot\n"
      "loss_reduction = sum\n"
      "early_stop = loss\n"
      "adam_lr = 2e-4\n"
      "include_energy = false\n");
  CHECK(c.model.n_conv_layers == 6);
  CHECK(c.model.maps_at(5) == 32);
  CHECK(c.model.symbols == std::vector<std::string>{"h#", "aa", "b"});
  CHECK(c.model.init == InitCriterion::Glorot);
  CHECK(c.loss_reduction == CtcReduction::Sum);
  CHECK(c.early_stop == EarlyStopMetric::Loss);
  CHECK(c.adam_lr == 2e-4);
  CHECK(!c.features.include_energy);
  CHECK(c.epochs == 100);
  CHECK(c.fine_tune_epochs == 50);
  CHECK(c.sgd_lr == 1e-5);
  CHECK(c.model.dropout == 0.3);

  CHECK_THROWS_WITH_AS(parse_config("epochs = 3\nbogus = 1\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs 3\n"), ConfigError);
  ModelConfig m = small_model();
  m.kernel_time = 4;
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("kernel"), ConfigError);
  m = small_model();
  m.feature_maps = {1, 2, 3};
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("feature_maps"), ConfigError);
  m = small_model();
  m.symbols.clear();
  CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("symbols"), ConfigError);
}

TEST_CASE("canonical form round-trips and drives the hash") {
  ModelConfig m = small_model();
  m.l2 = 3.3e-6;
  const ModelConfig back = parse_model_config(m.canonical());
  CHECK(back.canonical() == m.canonical());
  CHECK(back.hash() == m.hash());
  m.dropout = 0.25;
  CHECK(back.hash() != m.hash());
}

TEST_CASE("config paths resolve relative to the config file") {
  const auto dir = temp_dir("cfg");
  std::ofstream(dir / "x.conf") << "symbols = a b\nphone_map = maps/fold.map\n";
  const TrainConfig c = load_config(dir / "x.conf");
  CHECK(std::filesystem::path(c.phone_map) == dir / "maps/fold.map");
  CHECK_THROWS(load_config(dir / "missing.conf"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("model assembly") {
  ModelConfig cfg = small_model();
  cfg.n_conv_layers = 6;
  cfg.feature_maps = {8};
  cfg.n_dense = 3;
  cfg.dense_width = 16;
  const Model model(cfg, 1);
  const QuaternionPlanes x = oracle::random_planes({1, 1, 41, 100}, 3);
  Tape tape;
  std::mt19937_64 rng(1);
  const std::size_t len[] = {100};
  const auto fwd = model.forward(tape, x, len, false, rng);
  CHECK(fwd.logits.shape() == Shape{100, 6});
  CHECK(fwd.leaves.size() == model.parameters().size());

  std::size_t weights = 0, params = 0;
  for (const auto& row : layer_table(cfg, Algebra::Quaternion)) {
    weights += row.weights;
    params += row.weights + row.other;
  }
  CHECK(weights == model.count_weights());
  CHECK(params == model.count_params());

  // Wrong width and bad lengths are rejected.
  CHECK_THROWS_AS(model.forward(tape, oracle::random_planes({1, 1, 40, 10}, 4), len, false, rng), std::invalid_argument);
  const std::size_t too_long[] = {101};
  CHECK_THROWS_AS(model.forward(tape, x, too_long, false, rng), std::invalid_argument);
}

TEST_CASE("full-size quaternion model uses a quarter of the real weights") {
  ModelConfig cfg;
  cfg.symbols = {"a", "b"};
  const auto q = layer_table(cfg, Algebra::Quaternion);
  const auto r = layer_table(cfg, Algebra::Real);
  std::size_t qw = 0, rw = 0;
  for (std::size_t i = 0; i + 1 < q.size(); ++i) {
    CHECK(r[i].weights == 4 * q[i].weights);
    qw += q[i].weights;
    rw += r[i].weights;
  }
  CHECK(q.back().weights == r.back().weights);
  CHECK(static_cast<double>(qw) / static_cast<double>(rw) == 0.25);
  CHECK(q[11].weights == 262144);
  CHECK(r[11].weights == 1048576);
}

TEST_CASE("padding frames do not change valid outputs") {
  const Model model(small_model(), 3);
  const QuaternionPlanes x = oracle::random_planes({1, 1, 41, 12}, 5);
  QuaternionPlanes padded(Shape{1, 1, 41, 20});
  for (int c = 0; c < 4; ++c)
    for (std::size_t f = 0; f < 41; ++f)
      for (std::size_t t = 0; t < 20; ++t)
        padded.planes()[c]->at({0, 0, f, t}) = t < 12 ? x.planes()[c]->at({0, 0, f, t}) : 9.0;
  std::mt19937_64 rng(0);
  Tape t1, t2;
  const std::size_t l12[] = {12};
  const Tensor a = model.forward(t1, x, l12, false, rng).logits.value();
  const Tensor b = model.forward(t2, padded, l12, false, rng).logits.value();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("full graph gradient check") { CHECK(acceptance::model_gradient_check().max_rel_error < 1e-4); }

TEST_CASE("optimizers") {
  Tensor p({3}, std::vector<double>{1, 2, 3});
  std::vector<Tensor*> ps{&p};
  OptimizerState st;
  sgd_step(ps, std::vector<Tensor>{Tensor({3})}, st);
  CHECK(p.values() == std::vector<double>{1, 2, 3});

  Tensor s({1}, 0.5);
  std::vector<Tensor*> ss{&s};
  OptimizerState adam;
  adam_step(ss, std::vector<Tensor>{Tensor({1}, 1.0)}, adam);
  CHECK(0.5 - s[0] == doctest::Approx(1e-3).epsilon(1e-6));

  // Quadratic bowl sum((w - c)^2).
  const Tensor c({4}, std::vector<double>{0.3, -0.2, 0.1, 0.05});
  Tensor w({4});
  std::vector<Tensor*> ws{&w};
  OptimizerState bowl;
  bowl.adam.lr = 0.01;
  for (int k = 0; k < 200; ++k) {
    Tensor g({4});
    for (std::size_t i = 0; i < 4; ++i) g[i] = 2 * (w[i] - c[i]);
    adam_step(ws, std::vector<Tensor>{g}, bowl);
  }
  CHECK(max_abs_diff(w, c) < 1e-3);

  std::vector<Tensor> g{Tensor({2}, std::vector<double>{1, NAN})};
  const std::vector<std::string> names{"conv3.w.r"};
  CHECK_THROWS_WITH_AS(check_finite(g, names), doctest::Contains("conv3.w.r"), NumericalError);

  Tensor q({2}, std::vector<double>{1, -2});
  std::vector<const Tensor*> qs{&q, &q};
  std::vector<Tensor> gg{Tensor({2}), Tensor({2})};
  add_l2(qs, {true, false}, 0.5, gg);
  CHECK(gg[0].values() == std::vector<double>{1, -2});
  CHECK(gg[1].values() == std::vector<double>{0, 0});
}

TEST_CASE("L2 applies to hidden convolutions and dense weights only") {
  ModelConfig cfg = small_model();
  cfg.n_conv_layers = 3;
  Model m(cfg, 1);
  for (const auto& p : m.parameters()) {
    const bool expected = (p.name.rfind("conv", 0) == 0 && p.name.rfind("conv0", 0) != 0 && p.name.find(".w.") != std::string::npos) ||
                          (p.name.rfind("dense", 0) == 0 && p.name.find(".w.") != std::string::npos);
    INFO(p.name);
    CHECK(p.regularized == expected);
  }
}

TEST_CASE("edit distance and PER") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> alphabet{"a", "b", "c"};
  for (int n = 0; n < 300; ++n) {
    std::vector<std::string> x(rng() % 11), y(rng() % 11);
    for (auto& s : x) s = alphabet[rng() % 3];
    for (auto& s : y) s = alphabet[rng() % 3];
    CHECK(edit_distance(x, y) == oracle::dp_edit_distance(x, y));
  }
  const std::vector<std::vector<std::string>> refs{{"a", "b", "c"}, {"b", "b"}};
  CHECK(phone_error_rate(refs, refs) == 0.0);
  const std::vector<std::vector<std::string>> empty(2);
  CHECK(phone_error_rate(empty, refs) == 100.0);
  const std::vector<std::vector<std::string>> hyps{{"a", "c"}, {"b", "b", "a"}};
  CHECK(phone_error_rate(hyps, refs) == doctest::Approx(40.0));
  const std::vector<std::vector<std::string>> hyps_r{hyps[1], hyps[0]}, refs_r{refs[1], refs[0]};
  CHECK(phone_error_rate(hyps_r, refs_r) == phone_error_rate(hyps, refs));

  const PhoneMap map = PhoneMap::parse("# fold\nao aa\nq\nh# sil\n");
  const std::vector<std::string> in{"ao", "q", "aa", "h#"};
  CHECK(map.apply(in) == std::vector<std::string>{"aa", "aa", "sil"});
  const std::vector<std::vector<std::string>> h2{{"aa"}}, r2{{"ao", "q"}};
  CHECK(phone_error_rate(h2, r2, &map) == 0.0);
}

TEST_CASE("shipped TIMIT fold map") {
  const PhoneMap map = PhoneMap::load(std::filesystem::path(QCNN_SOURCE_DIR) / "data/timit_61_to_39.map");
  const TrainConfig cfg = load_config(std::filesystem::path(QCNN_SOURCE_DIR) / "configs/timit_qcnn_10l_64fm.conf");
  CHECK(cfg.model.symbols.size() == 61);
  std::set<std::string> folded;
  for (const auto& p : map.apply(cfg.model.symbols)) folded.insert(p);
  CHECK(folded.size() == 39);
}

TEST_CASE("manifests and batching") {
  const auto dir = temp_dir("manifest");
  const std::vector<ManifestEntry> entries{{"u1", "f/u1.feat", {"a", "b"}}, {"u2", "/abs/u2.wav", {"c"}}};
  write_manifest(dir / "m.tsv", entries);
  const auto back = read_manifest(dir / "m.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].path == dir / "f/u1.feat");
  CHECK(back[1].path == "/abs/u2.wav");
  CHECK(back[0].phones == std::vector<std::string>{"a", "b"});
  std::ofstream(dir / "bad.tsv") << "only-one-field\n";
  CHECK_THROWS_WITH_AS(read_manifest(dir / "bad.tsv"), doctest::Contains(":1:"), DataError);
  CHECK_THROWS_AS(load_dataset(back, SymbolTable({"a", "b"}), {}, 1), DataError);
  std::filesystem::remove_all(dir);

  const auto& data = toy_data();
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::mt19937_64 rng(1);
  const auto batches = bucket_batches(data, all, 4, &rng);
  std::vector<int> seen(data.size(), 0);
  for (const auto& b : batches) {
    CHECK(b.size() <= 4);
    for (std::size_t i : b) ++seen[i];
    for (std::size_t k = 1; k < b.size(); ++k) CHECK(data[b[k - 1]].features.frames() <= data[b[k]].features.frames());
  }
  for (int s : seen) CHECK(s == 1);

  const Batch batch = make_batch(data, batches[0]);
  std::size_t longest = 0;
  for (std::size_t i : batches[0]) longest = std::max(longest, data[i].features.frames());
  CHECK(batch.input.shape() == Shape{batches[0].size(), 1, 41, longest});
  for (std::size_t n = 0; n < batch.lengths.size(); ++n)
    for (std::size_t t = batch.lengths[n]; t < longest; ++t) CHECK(batch.input.y.at({n, 0, 7, t}) == 0.0);
}

TEST_CASE("checkpoints") {
  const auto dir = temp_dir("ckpt");
  const Model model(small_model(), 7);
  OptimizerState opt;
  opt.step = 9;
  {
    std::vector<const Tensor*> views;
    for (const auto& p : model.parameters()) views.push_back(p.value);
    opt.reset_moments(views);
    opt.m[0][0] = 0.125;
  }
  const TrainingProgress progress{4, 12.5, 2};
  save_checkpoint(dir / "a.ckpt", model, opt, progress);

  Model other(small_model(), 8);
  OptimizerState opt2;
  TrainingProgress prog2;
  load_checkpoint(dir / "a.ckpt", other, opt2, prog2);
  CHECK(snapshot(other) == snapshot(model));
  CHECK(opt2.step == 9);
  CHECK(opt2.m[0][0] == 0.125);
  CHECK(prog2.epochs_completed == 4);
  CHECK(prog2.best_metric == 12.5);
  save_checkpoint(dir / "b.ckpt", other, opt2, prog2);
  CHECK(read_file_bytes(dir / "a.ckpt") == read_file_bytes(dir / "b.ckpt"));
  CHECK(checkpoint_config(read_file_bytes(dir / "a.ckpt")).hash() == small_model().hash());
  CHECK(snapshot(load_model(dir / "a.ckpt")) == snapshot(model));

  // Corruption: integrity error, target untouched.
  std::string bytes = read_file_bytes(dir / "a.ckpt");
  bytes[bytes.size() / 2] ^= 0x5a;
  Model victim(small_model(), 9);
  const auto before = snapshot(victim);
  OptimizerState o3;
  TrainingProgress p3;
  CHECK_THROWS_AS(decode_checkpoint(bytes, victim, o3, p3), DataError);
  CHECK(snapshot(victim) == before);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, 40), victim, o3, p3), DataError);

  // Mismatched configuration.
  ModelConfig wider = small_model();
  wider.dense_width = 8;
  Model mismatched(wider, 1);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", mismatched, o3, p3), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt", mismatched, o3, p3), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("epoch log lines are key=value") {
  EpochRecord r;
  r.epoch = 3;
  r.lr = 1e-3;
  const std::string line = format_epoch(r);
  CHECK(line.rfind("epoch=3 phase=adam lr=0.001 train_loss=", 0) == 0);
  std::istringstream is(line);
  for (std::string tok; is >> tok;) CHECK(tok.find('=') != std::string::npos);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  TrainConfig cfg = small_train();
  cfg.adam_lr = 0.0;
  cfg.sgd_lr = 0.0;
  cfg.model.l2 = 1e-2;
  Model model(cfg.model, cfg.seed);
  const auto before = snapshot(model);
  TrainOptions opts;
  opts.max_epochs = 1;
  const auto summary = train(model, toy_data(), {}, cfg, opts);
  CHECK(summary.epochs.size() == 1);
  CHECK(snapshot(model) == before);
}

TEST_CASE("training is reproducible, also across workers and resume") {
  const TrainConfig cfg = small_train();
  const auto& data = toy_data();
  auto full_run = [&](std::size_t workers) {
    Model m(cfg.model, cfg.seed);
    TrainOptions o;
    o.workers = workers;
    o.log = nullptr;
    const auto s = train(m, data, {}, cfg, o);
    return std::make_pair(s, snapshot(m));
  };
  const auto [s1, p1] = full_run(1);
  const auto [s2, p2] = full_run(1);
  REQUIRE(s1.epochs.size() == 3);
  CHECK(s1.epochs[2].phase == OptimizerKind::Sgd);
  for (std::size_t e = 0; e < 3; ++e) CHECK(bit_equal(s1.epochs[e].train_loss, s2.epochs[e].train_loss));
  CHECK(p1 == p2);

  const auto [w1, wp1] = full_run(3);
  const auto [w2, wp2] = full_run(3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(bit_equal(w1.epochs[e].train_loss, w2.epochs[e].train_loss));
  }
  CHECK(wp1 == wp2);

  // Interrupted after 2 epochs, then resumed from last.ckpt.
  const auto dir = temp_dir("resume");
  TrainConfig keep_last = cfg;
  keep_last.restore_best = false;
  Model a(cfg.model, cfg.seed);
  TrainOptions first;
  first.out_dir = dir;
  first.max_epochs = 2;
  const auto part1 = train(a, data, {}, keep_last, first);
  Model b(cfg.model, 12345);
  TrainOptions second;
  second.out_dir = dir;
  second.resume = dir / "last.ckpt";
  const auto part2 = train(b, data, {}, cfg, second);
  REQUIRE(part1.epochs.size() == 2);
  REQUIRE(part2.epochs.size() == 1);
  CHECK(bit_equal(part1.epochs[0].train_loss, s1.epochs[0].train_loss));
  CHECK(bit_equal(part1.epochs[1].train_loss, s1.epochs[1].train_loss));
  CHECK(bit_equal(part2.epochs[0].train_loss, s1.epochs[2].train_loss));
  CHECK(snapshot(b) == p1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("best checkpoint tracks the best dev metric") {
  TrainConfig cfg = small_train();
  cfg.epochs = 4;
  cfg.fine_tune_epochs = 0;
  cfg.early_stop = EarlyStopMetric::Loss;
  const auto dir = temp_dir("best");
  Model model(cfg.model, cfg.seed);
  TrainOptions o;
  o.out_dir = dir;
  const auto s = train(model, toy_data(), {}, cfg, o);
  double best = INFINITY;
  for (const auto& e : s.epochs) best = std::min(best, e.dev_loss);
  CHECK(s.best_metric == best);
  Model from_best = load_model(dir / "best.ckpt");
  CHECK(snapshot(from_best) == snapshot(model));  // restored at the end
  std::filesystem::remove_all(dir);
}

TEST_CASE("infeasible utterances are skipped and counted") {
  std::vector<Utterance> data = toy_data();
  data[0].labels.assign(200, 0);
  data[0].labels[1] = 1;
  data[0].phones.assign(200, "a");
  const TrainConfig cfg = small_train();
  Model model(cfg.model, 1);
  std::ostringstream log;
  TrainOptions o;
  o.log = &log;
  o.max_epochs = 1;
  const auto s = train(model, data, {}, cfg, o);
  CHECK(s.skipped == 1);
  CHECK(log.str().find("skip utt=" + data[0].id) != std::string::npos);
  CHECK(s.epochs[0].skipped == 1);
}

TEST_CASE("patience ends a phase early") {
  TrainConfig cfg = small_train();
  cfg.epochs = 6;
  cfg.fine_tune_epochs = 0;
  cfg.patience = 1;
  cfg.adam_lr = 0.0;  // nothing improves after epoch 1
  Model model(cfg.model, 1);
  std::ostringstream log;
  TrainOptions o;
  o.log = &log;
  const auto s = train(model, toy_data(), {}, cfg, o);
  CHECK(s.epochs.size() == 2);
  CHECK(log.str().find("early-stop") != std::string::npos);
}
