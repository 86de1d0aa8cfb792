#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/oracles.hpp"
#include "qcnn/ctc.hpp"
#include "qcnn/errors.hpp"

using namespace qcnn;

namespace {

std::vector<double> softmax_row(const Tensor& logits, std::size_t t) {
  const std::size_t K = logits.dim(1);
  std::vector<double> p(K);
  double z = 0.0;
  for (std::size_t k = 0; k < K; ++k) z += std::exp(logits[t * K + k]);
  for (std::size_t k = 0; k < K; ++k) p[k] = std::exp(logits[t * K + k]) / z;
  return p;
}

}  // namespace

TEST_CASE("symbol table reserves a distinct blank") {
  const SymbolTable t({"a", "b", "c"});
  CHECK(t.size() == 4);
  CHECK(t.blank() == 3);
  CHECK(t.index_of("b") == 1);
  CHECK_THROWS_AS(t.index_of("zz"), std::out_of_range);
  const std::vector<std::string> names{"c", "a"};
  CHECK(t.decode(t.encode(names)) == names);
}

TEST_CASE("collapse") {
  const std::size_t z1 = 0, z2 = 1, z3 = 2, b = 3;
  const Labels want{z1, z2, z3};
  CHECK(collapse(std::vector<std::size_t>{z1, z2, b, z3, b}, b) == want);
  CHECK(collapse(std::vector<std::size_t>{z1, z2, z3, z3, b}, b) == want);
  CHECK(collapse(std::vector<std::size_t>{z1, b, z2, z3, z3}, b) == want);
  CHECK(collapse(std::vector<std::size_t>{b, b, b}, b).empty());
  CHECK(collapse(std::vector<std::size_t>{z1, b, z1}, b) == Labels{z1, z1});
  // Idempotent on blank-free, repeat-free sequences.
  CHECK(collapse(want, b) == want);
  CHECK(min_frames(Labels{0, 1, 2}) == 3);
  CHECK(min_frames(Labels{0, 0, 1, 1}) == 6);
}

TEST_CASE("hand-enumerated losses") {
  const Tensor one = oracle::random_tensor({1, 3}, 1);
  const auto p1 = softmax_row(one, 0);
  CHECK(ctc_loss(one, Labels{1}, 2).loss == doctest::Approx(-std::log(p1[1])).epsilon(1e-14));

  const Tensor two = oracle::random_tensor({2, 3}, 2);
  const auto a = softmax_row(two, 0), b = softmax_row(two, 1);
  const double p = a[0] * b[0] + a[0] * b[2] + a[2] * b[0];
  CHECK(ctc_loss(two, Labels{0}, 2).loss == doctest::Approx(-std::log(p)).epsilon(1e-14));
}

TEST_CASE("errors") {
  const Tensor logits = oracle::random_tensor({3, 4}, 3);
  CHECK_THROWS_AS(ctc_loss(logits, Labels{}, 3), std::invalid_argument);
  CHECK_THROWS_AS(ctc_loss(logits, Labels{3}, 3), std::invalid_argument);
  CHECK_THROWS_AS(ctc_loss(logits, Labels{0, 0, 1}, 3), InfeasibleAlignment);
  CHECK_NOTHROW(ctc_loss(logits, Labels{0, 1, 2}, 3));

  const Tensor other = oracle::random_tensor({5, 4}, 4);
  const std::vector<CtcExample> batch{{&other, {0, 1}}, {&logits, {1, 1, 2}}};
  try {
    batch_ctc_loss(batch, 3);
    FAIL("expected InfeasibleAlignment");
  } catch (const InfeasibleAlignment& e) {
    CHECK(e.example_index() == 1);
  }
}

TEST_CASE("forward-backward equals exhaustive enumeration") {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 150; ++n) {
    const std::size_t symbols = 1 + rng() % 4, frames = 1 + rng() % 7, m = 1 + rng() % 3;
    Labels target(m);
    for (auto& t : target) t = rng() % symbols;
    if (frames < min_frames(target)) continue;
    const Tensor logits = oracle::random_tensor({frames, symbols + 1}, rng(), -4, 4);
    CHECK(std::abs(ctc_loss(logits, target, symbols).loss - oracle::brute_force_ctc(logits, target, symbols)) < 1e-8);
  }
}

TEST_CASE("loss range and gradient") {
  const Tensor logits = oracle::random_tensor({6, 4}, 6, -2, 2);
  const CtcResult r = ctc_loss(logits, Labels{0, 2}, 3);
  CHECK(r.loss > 0.0);
  CHECK(std::exp(-r.loss) <= 1.0);
  // Rows of the gradient sum to zero (softmax minus a distribution).
  for (std::size_t t = 0; t < 6; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += r.grad.at({t, k});
    CHECK(std::abs(s) < 1e-12);
  }
  const auto g = oracle::finite_difference_check(
      [](Tape&, const std::vector<Var>& v) {
        const std::vector<CtcSegment> seg{{0, 6, {0, 2}}};
        return ctc_loss(v[0], seg, 3);
      },
      {logits});
  CHECK(g.max_rel_error < 1e-4);

  // Concentrating logits on a valid alignment lowers the loss.
  Tensor sharp = logits;
  const std::size_t path[] = {0, 0, 3, 2, 2, 3};
  double prev = ctc_loss(sharp, Labels{0, 2}, 3).loss;
  for (int step = 0; step < 5; ++step) {
    for (std::size_t t = 0; t < 6; ++t) sharp.at({t, path[t]}) += 1.0;
    const double now = ctc_loss(sharp, Labels{0, 2}, 3).loss;
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("best path decoding") {
  Tensor logits({4, 3});
  const std::size_t path[] = {0, 0, 2, 1};
  for (std::size_t t = 0; t < 4; ++t) logits.at({t, path[t]}) = 5.0;
  CHECK(best_path_decode(logits, 2) == Labels{0, 1});

  Tensor blanks({5, 3});
  for (std::size_t t = 0; t < 5; ++t) blanks.at({t, 2}) = 1.0;
  CHECK(best_path_decode(blanks, 2).empty());

  // Ties resolve to the lowest index.
  CHECK(frame_argmax(Tensor({1, 3}, 0.5), 0, 1) == Labels{0});

  std::mt19937_64 rng(7);
  for (int n = 0; n < 50; ++n) {
    const Tensor r = oracle::random_tensor({9, 4}, rng());
    std::vector<std::size_t> argmax(9);
    for (std::size_t t = 0; t < 9; ++t) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 4; ++k)
        if (r.at({t, k}) > r.at({t, best})) best = k;
      argmax[t] = best;
    }
    CHECK(best_path_decode(r, 3) == oracle::naive_collapse(argmax, 3));
  }
}

TEST_CASE("batch loss decomposes") {
  std::vector<Tensor> logits;
  std::vector<Labels> targets{{0}, {1, 2}, {2, 2}, {0, 1, 0}};
  for (int i = 0; i < 4; ++i) logits.push_back(oracle::random_tensor({7, 4}, 20 + i));
  std::vector<CtcExample> batch;
  double expect = 0.0;
  for (int i = 0; i < 4; ++i) {
    batch.push_back({&logits[i], targets[i]});
    expect += ctc_loss(logits[i], targets[i], 3).loss;
  }
  const BatchCtcResult r = batch_ctc_loss(batch, 3);
  CHECK(std::abs(r.sum - expect) < 1e-10);
  CHECK(std::abs(r.mean - expect / 4) < 1e-10);

  const std::vector<CtcExample> single{{&logits[1], targets[1]}};
  CHECK(batch_ctc_loss(single, 3).sum == ctc_loss(logits[1], targets[1], 3).loss);
  const std::vector<CtcExample> twice{{&logits[1], targets[1]}, {&logits[1], targets[1]}};
  CHECK(batch_ctc_loss(twice, 3).sum == 2.0 * ctc_loss(logits[1], targets[1], 3).loss);

  // Stacked tape version with padding rows that must get zero gradient.
  Tensor stacked({16, 4});
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t k = 0; k < 4; ++k) {
      stacked.at({t, k}) = logits[0].at({t, k});
      stacked.at({8 + t, k}) = logits[1].at({t, k});
    }
  Tape tape;
  Var v = tape.parameter(stacked);
  const std::vector<CtcSegment> segs{{0, 7, targets[0]}, {8, 7, targets[1]}};
  Var loss = ctc_loss(v, segs, 3, CtcReduction::Mean);
  const double pair = ctc_loss(logits[0], targets[0], 3).loss + ctc_loss(logits[1], targets[1], 3).loss;
  CHECK(std::abs(loss.value().item() - pair / 2) < 1e-12);
  tape.backward(loss);
  const Tensor g = tape.grad(v);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(g.at({7, k}) == 0.0);
    CHECK(g.at({15, k}) == 0.0);
  }
}
