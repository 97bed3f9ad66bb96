#include <cmath>
#include <numbers>

#include "doctest.h"
#include "l2s/metrics.hpp"
#include "l2s/rng.hpp"

using l2s::Matrix;
using l2s::Rng;
namespace dsp = l2s::dsp;
namespace metrics = l2s::metrics;

namespace {

constexpr double kPi = std::numbers::pi;

// Harmonic "voiced" bursts at a syllabic rate with silent gaps, 16 kHz.
dsp::Waveform SpeechLike(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  const int fs = 16000;
  dsp::Waveform w;
  w.samples.resize(static_cast<std::size_t>(seconds * fs));
  double phase = 0.0;
  for (std::size_t n = 0; n < w.samples.size(); ++n) {
    const double t = static_cast<double>(n) / fs;
    const double f0 = 120.0 + 30.0 * std::sin(2 * kPi * 0.7 * t);
    phase += 2 * kPi * f0 / fs;
    const double syll = std::max(0.0, std::sin(2 * kPi * 3.0 * t));
    const double gate = std::fmod(t, 1.0) < 0.8 ? 1.0 : 0.0;
    double v = 0.0;
    for (int h = 1; h <= 20; ++h) v += std::sin(h * phase) / h * (1.0 + 0.5 * std::sin(2 * kPi * (0.3 * h) * t));
    w.samples[n] = gate * syll * syll * v + 0.02 * gate * syll * rng.Normal();
  }
  return w;
}

dsp::Waveform AddNoise(const dsp::Waveform& clean, double snr_db, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> noise(clean.size());
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = rng.Normal();
    ps += clean.samples[i] * clean.samples[i];
    pn += noise[i] * noise[i];
  }
  const double g = std::sqrt(ps / pn / std::pow(10.0, snr_db / 10.0));
  dsp::Waveform out = clean;
  for (std::size_t i = 0; i < noise.size(); ++i) out.samples[i] += g * noise[i];
  return out;
}

double Pearson(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sab += (a(i) - ma) * (b(i) - mb);
    saa += (a(i) - ma) * (a(i) - ma);
    sbb += (b(i) - mb) * (b(i) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("resampling keeps constants exact and tones accurate") {
  dsp::Waveform dc{std::vector<double>(1601, 0.5), 16000};
  const auto r = metrics::Resample(dc, 10000);
  CHECK(r.sample_rate_hz == 10000);
  CHECK(r.size() == 1001);  // ceil(1601 * 10 / 16)
  for (double v : r.samples) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  dsp::Waveform tone{std::vector<double>(16000), 16000};
  for (std::size_t n = 0; n < tone.size(); ++n) tone.samples[n] = std::sin(2 * kPi * 1000.0 * n / 16000.0);
  const auto rt = metrics::Resample(tone, 10000);
  double worst = 0.0;
  for (std::size_t m = 200; m + 200 < rt.size(); ++m)
    worst = std::max(worst, std::abs(rt.samples[m] - std::sin(2 * kPi * 1000.0 * m / 10000.0)));
  CHECK(worst < 1e-3);

  const auto same = metrics::Resample(tone, 16000);
  CHECK(same.samples == tone.samples);
  CHECK_THROWS_AS(metrics::Resample(tone, 4000), std::invalid_argument);
}

TEST_CASE("third-octave bands are contiguous, disjoint and ordered") {
  metrics::IntelligibilityConfig cfg;
  const Matrix bands = metrics::ThirdOctaveBands(cfg);
  CHECK(bands.rows() == 15);
  CHECK(bands.cols() == 257);
  Eigen::Index prev_end = 0;
  for (Eigen::Index b = 0; b < bands.rows(); ++b) {
    Eigen::Index first = -1, last = -1;
    for (Eigen::Index k = 0; k < bands.cols(); ++k) {
      if (bands(b, k) == 1.0) {
        if (first < 0) first = k;
        last = k;
      } else {
        CHECK(bands(b, k) == 0.0);
      }
    }
    REQUIRE(first >= 0);
    CHECK(bands.row(b).sum() == static_cast<double>(last - first + 1));
    CHECK(first >= prev_end);
    prev_end = last + 1;
  }
  CHECK(bands.colwise().sum().maxCoeff() == 1.0);
}

TEST_CASE("identical signals score one") {
  const auto x = SpeechLike(3.0, 1);
  CHECK(std::abs(metrics::Stoi(x, x) - 1.0) < 1e-9);
  CHECK(std::abs(metrics::Estoi(x, x) - 1.0) < 1e-9);
}

TEST_CASE("scores fall strictly as the noise rises") {
  const auto x = SpeechLike(3.0, 2);
  double last_stoi = 1.0, last_estoi = 1.0;
  for (double snr : {30.0, 20.0, 10.0, 0.0, -10.0}) {
    const auto y = AddNoise(x, snr, 3);
    const double s = metrics::Stoi(x, y), e = metrics::Estoi(x, y);
    CAPTURE(snr);
    CHECK(s < last_stoi);
    CHECK(e < last_estoi);
    last_stoi = s;
    last_estoi = e;
  }
  CHECK(last_stoi < 0.7);
}

TEST_CASE("degraded gain does not matter; a silent degraded signal scores zero") {
  const auto x = SpeechLike(2.0, 4);
  const auto y = AddNoise(x, 5.0, 5);
  auto y3 = y;
  for (auto& v : y3.samples) v *= 3.0;
  CHECK(metrics::Stoi(x, y3) == doctest::Approx(metrics::Stoi(x, y)).epsilon(1e-9));
  CHECK(metrics::Estoi(x, y3) == doctest::Approx(metrics::Estoi(x, y)).epsilon(1e-9));
  const dsp::Waveform silent{std::vector<double>(x.size(), 0.0), 16000};
  CHECK(metrics::Stoi(x, silent) == 0.0);
  CHECK(metrics::Estoi(x, silent) == 0.0);
}

TEST_CASE("envelope scores by hand") {
  metrics::IntelligibilityConfig cfg;
  const int frames = 32;
  Matrix x(2, frames), y(2, frames);
  for (int t = 0; t < frames; ++t) {
    x(0, t) = 10.0 + std::sin(0.4 * t);
    y(0, t) = 10.0 + std::cos(0.3 * t);
    x(1, t) = 5.0 + 0.1 * t;
    y(1, t) = 4.0 + 0.1 * t + 0.5 * std::sin(t);
  }
  // Per-segment, per-band correlation, then the mean; the clip bound is far away here.
  double want = 0.0;
  for (int m = 30; m <= frames; ++m)
    for (int b = 0; b < 2; ++b) want += Pearson(x.row(b).segment(m - 30, 30), y.row(b).segment(m - 30, 30));
  want /= 3 * 2;
  CHECK(metrics::StoiFromEnvelopes(x, y, cfg) == doctest::Approx(want).epsilon(1e-12));

  // ESTOI ignores per-band gain and offset.
  Matrix ya = x;
  ya.row(0) = 3.0 * x.row(0).array() + 2.0;
  ya.row(1) = 0.5 * x.row(1).array() - 1.0;
  CHECK(metrics::EstoiFromEnvelopes(x, ya, cfg) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(metrics::StoiFromEnvelopes(x.leftCols(29), y.leftCols(29), cfg), std::invalid_argument);
  CHECK_THROWS_AS(metrics::EstoiFromEnvelopes(x, y.leftCols(31), cfg), std::invalid_argument);
}

TEST_CASE("clipping limits how far a degraded envelope can exceed the clean one") {
  metrics::IntelligibilityConfig cfg;
  Matrix x = Matrix::Constant(1, 30, 1.0);
  Matrix y = Matrix::Constant(1, 30, 1.0);
  x(0, 0) = 1.1;
  y(0, 29) = 1000.0;  // after energy normalization this spike exceeds the clip bound
  const double s = metrics::StoiFromEnvelopes(x, y, cfg);
  CHECK(std::isfinite(s));
  CHECK(s > -1.0);
  CHECK(s < 1.0);
}

TEST_CASE("silence removal drops quiet clean frames from both signals") {
  metrics::IntelligibilityConfig cfg;
  std::vector<double> clean(128 * 40, 0.0), degraded(128 * 40, 0.0);
  Rng rng(6);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const bool loud = i < 128 * 20;
    clean[i] = (loud ? 1.0 : 1e-4) * rng.Normal();
    degraded[i] = rng.Normal();
  }
  std::vector<double> c, d;
  metrics::RemoveSilentFrames(clean, degraded, cfg, &c, &d);
  CHECK(c.size() == d.size());
  CHECK(c.size() < clean.size());
  CHECK(c.size() > 128 * 15);
}

TEST_CASE("inputs must agree and be long enough") {
  const auto x = SpeechLike(2.0, 7);
  auto shorter = x;
  shorter.samples.pop_back();
  CHECK_THROWS_AS(metrics::Stoi(x, shorter), std::invalid_argument);
  auto other_rate = x;
  other_rate.sample_rate_hz = 8000;
  CHECK_THROWS_AS(metrics::Estoi(x, other_rate), std::invalid_argument);
  dsp::Waveform tiny{std::vector<double>(3000, 0.1), 16000};
  for (std::size_t i = 0; i < tiny.size(); ++i) tiny.samples[i] = std::sin(0.05 * static_cast<double>(i));
  CHECK_THROWS_WITH_AS(metrics::Stoi(tiny, tiny), doctest::Contains("active"), std::invalid_argument);
}
