#include <cmath>
#include <set>

#include "doctest.h"
#include "l2s/datagen.hpp"
#include "l2s/inference.hpp"

using l2s::Matrix;
namespace datagen = l2s::datagen;
namespace dsp = l2s::dsp;

TEST_CASE("clips are a pure function of their seed") {
  const datagen::DataConfig cfg;
  const auto alpha = datagen::MakeAlphabet(cfg);
  const auto a = datagen::GenClip(alpha, cfg, 6, 42);
  const auto b = datagen::GenClip(alpha, cfg, 6, 42);
  const auto c = datagen::GenClip(alpha, cfg, 6, 43);
  CHECK(a.symbols == b.symbols);
  CHECK(a.frames == b.frames);
  CHECK(a.audio.samples == b.audio.samples);
  CHECK(a.frames != c.frames);
  CHECK(a.frames.rows() == 24);
  CHECK(a.frames.cols() == 16);
  CHECK(a.audio.size() == 24 * 640);
  CHECK(datagen::MakeAlphabet(cfg).prototypes == alpha.prototypes);
}

TEST_CASE("every frame sits closest to its own symbol's prototype") {
  const datagen::DataConfig cfg;
  const auto alpha = datagen::MakeAlphabet(cfg);
  int total = 0, right = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto clip = datagen::GenClip(alpha, cfg, 6, seed);
    for (Eigen::Index r = 0; r < clip.frames.rows(); ++r) {
      right += alpha.NearestPrototype(clip.frames.row(r)) == clip.symbols[static_cast<std::size_t>(r / 4)];
      ++total;
    }
  }
  CHECK(right > 0.99 * total);
}

TEST_CASE("each symbol's audio peaks at one of its recipe frequencies") {
  const datagen::DataConfig cfg;
  const auto alpha = datagen::MakeAlphabet(cfg);
  dsp::AudioConfig ac;
  ac.frame_len = 512;
  ac.hop_len = 256;
  for (int k = 0; k < cfg.num_symbols; ++k) {
    const auto w = datagen::RenderAudio(alpha, cfg, std::vector<int>(8, k));
    const Eigen::RowVectorXd mag = dsp::Stft(w.samples, ac).cwiseAbs().colwise().mean();
    Eigen::Index peak = 0;
    mag.maxCoeff(&peak);
    const double peak_hz = static_cast<double>(peak) * 16000.0 / 512.0;
    const auto& r = alpha.recipes[static_cast<std::size_t>(k)];
    const double nearest = std::min({std::abs(peak_hz - r.f0_hz), std::abs(peak_hz - r.f1_hz),
                                     std::abs(peak_hz - r.f2_hz)});
    CAPTURE(k);
    CHECK(nearest <= 16000.0 / 512.0);
  }
}

TEST_CASE("audio-side labels are recoverable from video-rate MFCC") {
  const datagen::DataConfig cfg;
  const auto alpha = datagen::MakeAlphabet(cfg);
  const dsp::AudioConfig ac;
  // Class means from one set of clips, nearest-mean labels on another.
  Matrix sums = Matrix::Zero(cfg.num_symbols, ac.n_mfcc);
  std::vector<int> counts(static_cast<std::size_t>(cfg.num_symbols), 0);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto clip = datagen::GenClip(alpha, cfg, 6, seed);
    const Matrix m = l2s::inference::VideoRateMfcc(clip.audio, ac, cfg.fps, 24);
    for (Eigen::Index r = 0; r < 24; ++r) {
      const int s = clip.symbols[static_cast<std::size_t>(r / 4)];
      sums.row(s) += m.row(r);
      ++counts[static_cast<std::size_t>(s)];
    }
  }
  for (int s = 0; s < cfg.num_symbols; ++s) {
    REQUIRE(counts[static_cast<std::size_t>(s)] > 0);
    sums.row(s) /= counts[static_cast<std::size_t>(s)];
  }
  int total = 0, right = 0;
  for (std::uint64_t seed = 1000; seed < 1040; ++seed) {
    const auto clip = datagen::GenClip(alpha, cfg, 6, seed);
    const Matrix m = l2s::inference::VideoRateMfcc(clip.audio, ac, cfg.fps, 24);
    for (Eigen::Index r = 0; r < 24; ++r) {
      Eigen::Index best = 0;
      (sums.rowwise() - m.row(r)).rowwise().squaredNorm().minCoeff(&best);
      right += best == clip.symbols[static_cast<std::size_t>(r / 4)];
      ++total;
    }
  }
  CHECK(right > 0.95 * total);
}

TEST_CASE("dataset plans are disjoint, sized by the fractions and reproducible") {
  const datagen::DataConfig cfg;
  const auto alpha = datagen::MakeAlphabet(cfg);
  const auto p = datagen::PlanDataset(alpha, cfg, 500, {}, 1);
  CHECK(p.train.size() == 400);
  CHECK(p.val.size() == 50);
  CHECK(p.test.size() == 50);
  std::set<std::string> ids;
  std::set<int> train_symbols;
  for (const auto* split : {&p.train, &p.val, &p.test})
    for (const auto& e : *split) ids.insert(e.id);
  CHECK(ids.size() == 500);
  for (const auto& e : p.train) train_symbols.insert(e.symbols.begin(), e.symbols.end());
  CHECK(train_symbols.size() == static_cast<std::size_t>(cfg.num_symbols));

  const auto q = datagen::PlanDataset(alpha, cfg, 500, {}, 1);
  CHECK(q.test.front().seed == p.test.front().seed);
  CHECK(q.test.front().symbols == p.test.front().symbols);
  const auto clip = datagen::RealizeClip(alpha, cfg, p.val[3]);
  CHECK(clip.symbols == p.val[3].symbols);
  auto tampered = p.val[3];
  tampered.symbols[0] = (tampered.symbols[0] + 1) % cfg.num_symbols;
  CHECK_THROWS_AS(datagen::RealizeClip(alpha, cfg, tampered), std::runtime_error);
  CHECK_THROWS_AS(datagen::PlanDataset(alpha, cfg, 10, {0.5, 0.5, 0.5}, 1), std::invalid_argument);
}

TEST_CASE("symbol strings") {
  CHECK(datagen::SymbolsToString({3, 0, 7}) == "3-0-7");
  CHECK(datagen::SymbolsFromString("3-0-7") == std::vector<int>{3, 0, 7});
  CHECK_THROWS_AS(datagen::SymbolsFromString("3--7"), std::invalid_argument);
  CHECK_THROWS_AS(datagen::SymbolsFromString("3-x"), std::invalid_argument);
}

TEST_CASE("config validation") {
  datagen::DataConfig cfg;
  cfg.fps = 20;
  CHECK_NOTHROW(cfg.Validate());
  cfg.fps = 7;
  CHECK_THROWS_AS(cfg.Validate(), std::invalid_argument);
  cfg = {};
  cfg.num_symbols = 1;
  CHECK_THROWS_AS(datagen::MakeAlphabet(cfg), std::invalid_argument);
}
