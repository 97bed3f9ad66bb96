#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "l2s/training.hpp"

using l2s::Matrix;
using l2s::Rng;
namespace model = l2s::model;
namespace nc = l2s::nc;
namespace training = l2s::training;

namespace {

model::ModelConfig Tiny() {
  model::ModelConfig c;
  c.frame_dim = 4;
  c.n_mfcc = 3;
  c.d_z = 4;
  c.transformer.n_layers = 1;
  c.transformer.n_heads = 2;
  c.transformer.d_model = 8;
  c.transformer.d_ff = 16;
  return c;
}

std::vector<training::TrainingClip> Clips(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<training::TrainingClip> out;
  for (int i = 0; i < n; ++i) {
    Matrix frames = Matrix::NullaryExpr(8, 4, [&] { return rng.Normal(); });
    // Audio is a fixed linear function of the frames, so there is something to learn.
    Matrix mfcc = frames.leftCols(3) * 0.8 + frames.rightCols(3) * 0.3;
    out.push_back({frames, mfcc});
  }
  return out;
}

training::TrainConfig SmallRun(int steps) {
  training::TrainConfig c;
  c.steps = steps;
  c.batch_size = 2;
  c.lr = 3e-3;
  c.negatives = 3;
  return c;
}

std::vector<double> Joint(const std::vector<training::StepRecord>& h) {
  std::vector<double> out;
  for (const auto& r : h) out.push_back(r.losses.joint);
  return out;
}

}  // namespace

TEST_CASE("one Adam step by hand") {
  nc::ParamSet p;
  p.Add("w", {2}, {1.0, -1.0});
  auto st = training::OptState::ZerosLike(p);
  training::TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.clip_norm = 0.0;
  training::AdamStep(p, {{"w", {0.5, -2.0}}}, st, cfg);
  // First bias-corrected step moves each coordinate by lr * g / (|g| + eps').
  const auto w = p.Get("w").data();
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(-1.0 + 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
  CHECK(st.step == 1);
  CHECK(st.first_moment["w"][0] == doctest::Approx(0.05));
  CHECK(st.second_moment["w"][1] == doctest::Approx(0.001 * 4.0));

  // Second step against a hand-rolled recurrence.
  training::AdamStep(p, {{"w", {-1.0, 1.0}}}, st, cfg);
  const double m = 0.9 * 0.05 + 0.1 * -1.0;
  const double v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double first = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(p.Get("w").data()[0] == doctest::Approx(first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-13));
}

TEST_CASE("global norm clipping scales every gradient together") {
  nc::ParamSet a, b;
  a.Add("x", {1}, {0.0});
  a.Add("y", {1}, {0.0});
  b.Add("x", {1}, {0.0});
  b.Add("y", {1}, {0.0});
  training::TrainConfig cfg;
  cfg.clip_norm = 1.0;
  cfg.lr = 1.0;
  cfg.beta1 = 0.0;
  auto sa = training::OptState::ZerosLike(a);
  auto sb = training::OptState::ZerosLike(b);
  training::AdamStep(a, {{"x", {30.0}}, {"y", {40.0}}}, sa, cfg);
  training::AdamStep(b, {{"x", {0.6}}, {"y", {0.8}}}, sb, cfg);
  CHECK(sa.first_moment["x"][0] == doctest::Approx(0.6));
  CHECK(sa.first_moment["y"][0] == doctest::Approx(0.8));
  CHECK(a.Get("x").data()[0] == b.Get("x").data()[0]);
}

TEST_CASE("a non-finite gradient stops training and names the parameter") {
  nc::ParamSet p;
  p.Add("enc.w", {2}, {0.0, 0.0});
  auto st = training::OptState::ZerosLike(p);
  CHECK_THROWS_WITH_AS(
      training::AdamStep(p, {{"enc.w", {1.0, std::numeric_limits<double>::quiet_NaN()}}}, st, {}),
      doctest::Contains("enc.w"), std::runtime_error);
  CHECK(p.Get("enc.w").data()[0] == 0.0);
  CHECK(st.step == 0);
  CHECK_THROWS_AS(training::AdamStep(p, {}, st, {}), std::invalid_argument);
}

TEST_CASE("negatives are distinct, exclude the anchor, and cover the pool") {
  Rng rng(1);
  std::set<std::size_t> seen;
  for (int trial = 0; trial < 200; ++trial) {
    const auto neg = training::SampleNegatives(10, 4, 3, rng);
    REQUIRE(neg.size() == 3);
    const std::set<std::size_t> u(neg.begin(), neg.end());
    CHECK(u.size() == 3);
    CHECK(u.count(4) == 0);
    seen.insert(neg.begin(), neg.end());
  }
  CHECK(seen.size() == 9);
  CHECK_THROWS_AS(training::SampleNegatives(4, 0, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(training::SampleNegatives(1, 0, 0, rng), std::invalid_argument);
  const auto tri = training::MakeTriplets(3, 8, rng);
  CHECK(tri.size() == 3);
  CHECK(tri[0].negatives.size() == 2);
}

TEST_CASE("row dropout mask") {
  Rng rng(2);
  const Matrix m = training::RowDropoutMask(4000, 3, 0.3, rng);
  int zero_rows = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    CHECK((m.row(r).sum() == 0.0 || m.row(r).sum() == 3.0));
    zero_rows += m.row(r).sum() == 0.0;
  }
  CHECK(zero_rows / 4000.0 == doctest::Approx(0.3).epsilon(0.08));
  CHECK(training::RowDropoutMask(10, 2, 0.0, rng).sum() == 20.0);
}

TEST_CASE("KL warm-up ramps linearly then holds") {
  training::TrainConfig cfg;
  cfg.steps = 100;
  cfg.kl_warmup_frac = 0.2;
  CHECK(training::KlWeightAt(0, cfg) == 0.0);
  CHECK(training::KlWeightAt(10, cfg) == doctest::Approx(0.5));
  CHECK(training::KlWeightAt(20, cfg) == 1.0);
  CHECK(training::KlWeightAt(99, cfg) == 1.0);
  cfg.kl_warmup_frac = 0.0;
  CHECK(training::KlWeightAt(0, cfg) == 1.0);
}

TEST_CASE("config and dataset validation") {
  training::TrainConfig cfg;
  CHECK_NOTHROW(cfg.Validate());
  cfg.prev_frame_dropout = 1.0;
  CHECK_THROWS_AS(cfg.Validate(), std::invalid_argument);
  model::Model m(Tiny(), 1);
  CHECK_THROWS_AS(training::Trainer(m, {}, SmallRun(1)), std::invalid_argument);
  auto clips = Clips(1, 1);
  clips[0].mfcc = Matrix::Zero(8, 5);
  CHECK_THROWS_AS(training::Trainer(m, clips, SmallRun(1)), std::invalid_argument);
}

TEST_CASE("training lowers the loss") {
  model::Model m(Tiny(), 3);
  training::Trainer t(m, Clips(4, 3), SmallRun(600));
  const auto h = training::Train(t);
  REQUIRE(h.size() == 600);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += h[static_cast<std::size_t>(i)].losses.rec;
    tail += h[h.size() - 1 - static_cast<std::size_t>(i)].losses.rec;
  }
  CHECK(tail < 0.5 * head);
}

TEST_CASE("identical seeds give identical histories; resuming matches an uninterrupted run") {
  const auto clips = Clips(3, 4);
  model::Model a(Tiny(), 5), b(Tiny(), 5);
  training::Trainer ta(a, clips, SmallRun(12));
  training::Trainer tb(b, clips, SmallRun(12));
  const auto reference = Joint(training::Train(ta));
  CHECK(reference == Joint(training::Train(tb)));
  CHECK(a.params().SameValues(b.params()));

  // Interrupt after 5 steps, rebuild from a snapshot, continue.
  model::Model c(Tiny(), 5);
  training::Trainer tc(c, clips, SmallRun(12));
  int checkpoints = 0;
  std::vector<double> first;
  for (int i = 0; i < 5; ++i) first.push_back(tc.Step().joint);
  model::Model d(Tiny(), c.params().Clone(), c.stats());
  training::Trainer td(d, clips, SmallRun(12));
  td.opt_state() = tc.opt_state();
  td.rng().LoadState(tc.rng().SaveState());
  const auto rest = training::Train(td, {}, [&](const training::Trainer&) { ++checkpoints; });
  for (const auto& r : rest) first.push_back(r.losses.joint);
  CHECK(first == reference);
  CHECK(d.params().SameValues(b.params()));
  CHECK(checkpoints == 1);
}
