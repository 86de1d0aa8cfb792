#include "qcnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include "qcnn/errors.hpp"

namespace qcnn {

std::string format_epoch(const EpochRecord& r) {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "epoch=%zu phase=%s lr=%.6g train_loss=%.6f dev_loss=%.6f dev_per=%.4f skipped=%zu improved=%d "
                "seconds=%.3f",
                r.epoch, r.phase == OptimizerKind::Adam ? "adam" : "sgd", r.lr, r.train_loss, r.dev_loss, r.dev_per,
                r.skipped, r.improved ? 1 : 0, r.seconds);
  return buf;
}

namespace {

bool feasible(const Utterance& u) { return !u.labels.empty() && u.features.frames() >= min_frames(u.labels); }

std::vector<CtcSegment> segments_for(const Batch& b) {
  const std::size_t frames = b.input.shape()[3];
  std::vector<CtcSegment> segs;
  for (std::size_t n = 0; n < b.lengths.size(); ++n) segs.push_back({n * frames, b.lengths[n], b.targets[n]});
  return segs;
}

}  // namespace

BatchGradients batch_gradients(const Model& model, std::span<const Utterance> data,
                               std::span<const std::size_t> indices, CtcReduction reduction, bool training,
                               std::uint64_t rng_seed, std::size_t workers) {
  if (indices.empty()) throw std::invalid_argument("batch_gradients: empty batch");
  const std::size_t shards = std::clamp<std::size_t>(workers, 1, indices.size());
  const double weight = reduction == CtcReduction::Mean ? 1.0 / static_cast<double>(indices.size()) : 1.0;

  std::vector<BatchGradients> partial(shards);
  std::vector<std::exception_ptr> errors(shards);
  auto run_shard = [&](std::size_t s) {
    try {
      const std::size_t lo = indices.size() * s / shards;
      const std::size_t hi = indices.size() * (s + 1) / shards;
      const Batch batch = make_batch(data, indices.subspan(lo, hi - lo));
      std::mt19937_64 rng(derive_seed(rng_seed, s));
      Tape tape;
      const auto fwd = model.forward(tape, batch.input, batch.lengths, training, rng);
      const auto segs = segments_for(batch);
      Var loss = ctc_loss(fwd.logits, segs, model.blank(), CtcReduction::Sum);
      partial[s].loss_sum = loss.value().item();
      tape.backward(scale(loss, weight));
      partial[s].grads = Model::gradients(tape, fwd);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  if (shards == 1) {
    run_shard(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t s = 0; s < shards; ++s) pool.emplace_back(run_shard, s);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  BatchGradients out = std::move(partial[0]);
  for (std::size_t s = 1; s < shards; ++s) {
    out.loss_sum += partial[s].loss_sum;
    for (std::size_t i = 0; i < out.grads.size(); ++i) out.grads[i] += partial[s].grads[i];
  }
  return out;
}

EvalResult evaluate(const Model& model, std::span<const Utterance> data, std::size_t batch_size, const PhoneMap* map) {
  EvalResult result;
  if (data.empty()) return result;
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  result.hypotheses.resize(data.size());
  const SymbolTable symbols = model.config().symbol_table();
  double loss_sum = 0.0;
  std::size_t scored = 0;
  std::mt19937_64 unused(0);
  for (const auto& idx : bucket_batches(data, all, batch_size, nullptr)) {
    const Batch batch = make_batch(data, idx);
    Tape tape;
    const auto fwd = model.forward(tape, batch.input, batch.lengths, false, unused);
    const Tensor& logits = fwd.logits.value();
    const std::size_t frames = batch.input.shape()[3];
    std::vector<CtcSegment> segs;
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const Labels path = frame_argmax(logits, n * frames, batch.lengths[n]);
      result.hypotheses[idx[n]] = symbols.decode(collapse(path, model.blank()));
      if (feasible(data[idx[n]])) {
        segs.push_back({n * frames, batch.lengths[n], batch.targets[n]});
      } else {
        ++result.skipped;
      }
    }
    if (!segs.empty()) {
      loss_sum += ctc_loss(fwd.logits, segs, model.blank(), CtcReduction::Sum).value().item();
      scored += segs.size();
    }
  }
  result.loss_mean = scored ? loss_sum / static_cast<double>(scored) : 0.0;
  std::vector<std::vector<std::string>> refs;
  refs.reserve(data.size());
  for (const auto& u : data) refs.push_back(u.phones);
  result.per = phone_error_rate(result.hypotheses, refs, map);
  return result;
}

std::vector<Labels> decode(const Model& model, std::span<const Utterance> data, std::size_t batch_size) {
  std::vector<Labels> out(data.size());
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::mt19937_64 unused(0);
  for (const auto& idx : bucket_batches(data, all, batch_size, nullptr)) {
    const Batch batch = make_batch(data, idx);
    Tape tape;
    const auto fwd = model.forward(tape, batch.input, batch.lengths, false, unused);
    const std::size_t frames = batch.input.shape()[3];
    for (std::size_t n = 0; n < idx.size(); ++n) {
      out[idx[n]] = collapse(frame_argmax(fwd.logits.value(), n * frames, batch.lengths[n]), model.blank());
    }
  }
  return out;
}

TrainSummary train(Model& model, std::span<const Utterance> train_set, std::span<const Utterance> dev_set,
                   const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (model.config().hash() != cfg.model.hash()) {
    throw std::invalid_argument("train: model was built from a different configuration");
  }
  if (train_set.empty()) throw DataError("train: training set is empty");
  std::ostream* log = options.log;
  const PhoneMap phone_map = cfg.phone_map.empty() ? PhoneMap() : PhoneMap::load(cfg.phone_map);

  TrainSummary summary;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (feasible(train_set[i])) {
      usable.push_back(i);
    } else {
      ++summary.skipped;
      if (log) {
        *log << "skip utt=" << train_set[i].id << " reason=infeasible-alignment frames="
             << train_set[i].features.frames() << " needed=" << min_frames(train_set[i].labels) << '\n';
      }
    }
  }
  if (usable.empty()) throw DataError("train: no utterance has a feasible alignment");
  const std::span<const Utterance> dev = dev_set.empty() ? train_set : dev_set;

  auto params = model.parameters();
  std::vector<Tensor*> values;
  std::vector<bool> regularized;
  std::vector<std::string> names;
  for (const auto& p : params) {
    values.push_back(p.value);
    regularized.push_back(p.regularized);
    names.push_back(p.name);
  }
  const std::vector<const Tensor*> const_values(values.begin(), values.end());

  OptimizerState opt;
  opt.adam = {cfg.adam_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  opt.sgd_lr = cfg.sgd_lr;
  TrainingProgress progress;
  std::vector<Tensor> best_params;
  if (!options.resume.empty()) {
    load_checkpoint(options.resume, model, opt, progress);
    opt.adam = {cfg.adam_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
    opt.sgd_lr = cfg.sgd_lr;
    const auto best_path = options.resume.parent_path() / "best.ckpt";
    if (std::filesystem::exists(best_path)) {
      Model best(model.config(), 0);
      OptimizerState unused_opt;
      TrainingProgress unused_progress;
      load_checkpoint(best_path, best, unused_opt, unused_progress);
      for (const auto& p : best.parameters()) best_params.push_back(*p.value);
    }
  }
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  const std::size_t total = cfg.epochs + cfg.fine_tune_epochs;
  std::size_t run_epochs = 0;
  for (std::size_t e = progress.epochs_completed; e < total && run_epochs < options.max_epochs; ++e, ++run_epochs) {
    const auto started = std::chrono::steady_clock::now();
    const bool adam_phase = e < cfg.epochs;
    const std::size_t phase_start = adam_phase ? 0 : cfg.epochs;
    if (cfg.patience > 0) {
      const std::int64_t anchor = std::max<std::int64_t>(progress.best_epoch, static_cast<std::int64_t>(phase_start) - 1);
      if (static_cast<std::int64_t>(e) - anchor > static_cast<std::int64_t>(cfg.patience)) {
        if (adam_phase && cfg.fine_tune_epochs > 0) {
          if (log) *log << "early-stop phase=adam epoch=" << e << '\n';
          e = cfg.epochs - 1;
          progress.epochs_completed = cfg.epochs;
          --run_epochs;  // the skip itself does not count as a trained epoch
          continue;
        }
        if (log) *log << "early-stop phase=" << (adam_phase ? "adam" : "sgd") << " epoch=" << e << '\n';
        break;
      }
    }
    const OptimizerKind phase = adam_phase ? OptimizerKind::Adam : OptimizerKind::Sgd;
    if (opt.mode != phase) {
      opt.mode = phase;
      opt.step = 0;
    }
    if (phase == OptimizerKind::Adam && opt.m.size() != values.size()) opt.reset_moments(const_values);

    std::mt19937_64 order_rng(derive_seed(cfg.seed, e, 0xba7c4));
    const auto batches = bucket_batches(train_set, usable, cfg.batch_size, &order_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      BatchGradients g = batch_gradients(model, train_set, batches[b], cfg.loss_reduction, true,
                                         derive_seed(cfg.seed, e, b, 0xd409), options.workers);
      loss_sum += g.loss_sum;
      add_l2(const_values, regularized, cfg.model.l2, g.grads);
      check_finite(g.grads, names);
      if (phase == OptimizerKind::Adam) {
        adam_step(values, g.grads, opt);
      } else {
        sgd_step(values, g.grads, opt);
      }
    }

    EpochRecord rec;
    rec.epoch = e + 1;
    rec.phase = phase;
    rec.lr = phase == OptimizerKind::Adam ? opt.adam.lr : opt.sgd_lr;
    rec.train_loss = loss_sum / static_cast<double>(usable.size());
    rec.skipped = summary.skipped;
    const EvalResult dev_eval = evaluate(model, dev, cfg.batch_size, &phone_map);
    rec.dev_loss = dev_eval.loss_mean;
    rec.dev_per = dev_eval.per;
    const double metric = cfg.early_stop == EarlyStopMetric::Per ? rec.dev_per : rec.dev_loss;
    if (metric < progress.best_metric) {
      rec.improved = true;
      progress.best_metric = metric;
      progress.best_epoch = static_cast<std::int64_t>(e);
      best_params.clear();
      for (const Tensor* v : values) best_params.push_back(*v);
    }
    progress.epochs_completed = e + 1;
    if (!options.out_dir.empty()) {
      save_checkpoint(options.out_dir / "last.ckpt", model, opt, progress);
      if (rec.improved) save_checkpoint(options.out_dir / "best.ckpt", model, opt, progress);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log) *log << format_epoch(rec) << std::endl;
    summary.epochs.push_back(rec);
  }

  summary.best_metric = progress.best_metric;
  summary.best_epoch = progress.best_epoch;
  if (cfg.restore_best && !best_params.empty()) {
    for (std::size_t i = 0; i < values.size(); ++i) *values[i] = best_params[i];
  }
  return summary;
}

}  // namespace qcnn
