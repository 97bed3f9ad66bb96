#include <cmath>

#include "doctest.h"
#include "l2s/inference.hpp"
#include "l2s/rng.hpp"

using l2s::Matrix;
using l2s::Rng;
namespace inf = l2s::inference;
namespace model = l2s::model;
namespace dsp = l2s::dsp;

namespace {

model::Model TinyModel(std::uint64_t seed) {
  model::ModelConfig c;
  c.frame_dim = 4;
  c.n_mfcc = 13;
  c.d_z = 4;
  c.transformer.n_layers = 1;
  c.transformer.n_heads = 2;
  c.transformer.d_model = 8;
  c.transformer.d_ff = 16;
  model::Model m(c, seed);
  Rng rng(seed + 1);
  for (double& v : l2s::nc::Tensor(m.params().Get("decoder.start")).mutable_data()) v = rng.Normal();
  return m;
}

Matrix RandomFrames(Eigen::Index rows, std::uint64_t seed) {
  Rng rng(seed);
  return Matrix::NullaryExpr(rows, 4, [&] { return rng.Normal(); });
}

}  // namespace

TEST_CASE("window plans cover every frame with the requested overlap") {
  const auto p = inf::WindowPlan::Make(50, 24, 4);
  CHECK(p.starts == std::vector<std::size_t>{0, 20, 40});
  CHECK(p.lengths == std::vector<std::size_t>{24, 24, 10});
  for (std::size_t total = 1; total <= 120; ++total) {
    for (int v : {0, 1, 4, 23}) {
      const auto plan = inf::WindowPlan::Make(total, 24, v);
      CAPTURE(total);
      CAPTURE(v);
      CHECK(plan.starts.front() == 0);
      CHECK(plan.starts.back() + plan.lengths.back() == total);
      for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
        CHECK(plan.lengths[i] == 24);
        CHECK(plan.starts[i + 1] == plan.starts[i] + 24 - static_cast<std::size_t>(v));
      }
    }
  }
  CHECK_THROWS_AS(inf::WindowPlan::Make(10, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(inf::WindowPlan::Make(0, 4, 1), std::invalid_argument);
}

TEST_CASE("overlap merge crossfades linearly toward the newer window") {
  const auto plan = inf::WindowPlan::Make(10, 6, 2);  // starts 0, 4; lengths 6, 6
  const std::vector<Matrix> w = {Matrix::Constant(6, 1, 1.0), Matrix::Constant(6, 1, 4.0)};
  const Matrix m = inf::OverlapMerge(w, plan);
  CHECK(m(3, 0) == 1.0);
  CHECK(m(4, 0) == doctest::Approx(1.0 + 3.0 / 3.0));
  CHECK(m(5, 0) == doctest::Approx(1.0 + 3.0 * 2.0 / 3.0));
  CHECK(m(6, 0) == 4.0);
  // Windows that agree on the shared frames merge to the same sequence.
  Matrix truth(10, 2);
  for (int r = 0; r < 10; ++r) truth.row(r) << r, -r;
  const Matrix again = inf::OverlapMerge({truth.topRows(6), truth.bottomRows(6)}, plan);
  CHECK((again - truth).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(inf::OverlapMerge({truth.topRows(6)}, plan), std::invalid_argument);
  CHECK_THROWS_AS(inf::OverlapMerge({truth.topRows(6), truth.bottomRows(5)}, plan), std::invalid_argument);
}

TEST_CASE("rollout is a fixed point of teacher forcing") {
  const auto m = TinyModel(3);
  Rng rng(4);
  const Matrix z = Matrix::NullaryExpr(10, 4, [&] { return rng.Normal(); });
  const Matrix y = inf::Rollout(m, z);
  const auto tf_out = l2s::ToMatrix(
      model::Decode(model::ShiftRight(l2s::ToTensor(y), m.params()), l2s::ToTensor(z), m.params(), m.config()));
  CHECK((tf_out - y).cwiseAbs().maxCoeff() < 1e-10);
  // Row t depends only on z[0..t].
  Matrix z2 = z;
  z2.bottomRows(4).array() += 1.0;
  const Matrix y2 = inf::Rollout(m, z2);
  CHECK((y2.topRows(6) - y.topRows(6)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((y2.bottomRows(4) - y.bottomRows(4)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("feature prediction shape, determinism and latent modes") {
  const auto m = TinyModel(5);
  const Matrix frames = RandomFrames(30, 6);
  inf::InferenceConfig cfg;
  cfg.window_len = 12;
  cfg.overlap = 3;
  const Matrix a = inf::PredictFeatures(frames, m, cfg);
  CHECK(a.rows() == 30);
  CHECK(a.cols() == 13);
  CHECK((inf::PredictFeatures(frames, m, cfg) - a).cwiseAbs().maxCoeff() == 0.0);
  cfg.mode = inf::LatentMode::kSample;
  const Matrix s1 = inf::PredictFeatures(frames, m, cfg);
  CHECK((inf::PredictFeatures(frames, m, cfg) - s1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1 - a).cwiseAbs().maxCoeff() > 0.0);
  cfg.seed = 9;
  CHECK((inf::PredictFeatures(frames, m, cfg) - s1).cwiseAbs().maxCoeff() > 0.0);
  CHECK_THROWS_AS(inf::PredictWindow(frames, m, inf::LatentMode::kSample, nullptr), std::invalid_argument);
  cfg.overlap = 12;
  CHECK_THROWS_AS(inf::PredictFeatures(frames, m, cfg), std::invalid_argument);
}

TEST_CASE("video and audio rates line up") {
  dsp::AudioConfig audio;
  CHECK(inf::RateFactor(audio, 25) == 4);
  CHECK_THROWS_AS(inf::RateFactor(audio, 30), std::invalid_argument);
  Rng rng(7);
  dsp::Waveform w;
  w.samples.resize(20 * 640);
  for (auto& s : w.samples) s = 0.1 * rng.Normal();
  const Matrix v = inf::VideoRateMfcc(w, audio, 25, 20);
  CHECK(v.rows() == 20);
  CHECK(v.cols() == 13);
  CHECK_THROWS_AS(inf::VideoRateMfcc(w, audio, 25, 21), std::invalid_argument);
  const auto back = inf::FeaturesToWaveform(v, audio, 25, 1);
  CHECK(back.size() == 20 * 640);
  CHECK(back.sample_rate_hz == 16000);
  // Resynthesized speech re-analyses to nearby cepstra.
  const Matrix again = inf::VideoRateMfcc(back, audio, 25, 20);
  CHECK(again.rows() == 20);
}

TEST_CASE("speech prediction needs only frames") {
  const auto m = TinyModel(8);
  inf::InferenceConfig cfg;
  const auto w = inf::PredictSpeech(RandomFrames(30, 9), m, dsp::AudioConfig{}, cfg);
  CHECK(w.size() == 30 * 640);
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  CHECK(peak == doctest::Approx(1.0));
  CHECK_THROWS_AS(inf::PredictSpeech(Matrix(0, 4), m, dsp::AudioConfig{}, cfg), std::invalid_argument);
}
