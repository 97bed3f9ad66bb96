#include "l2s/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <stdexcept>
#include <string>

namespace l2s::metrics {
namespace {

constexpr int kZeroCrossings = 24;
constexpr double kKaiserBeta = 8.6;
constexpr double kRolloff = 0.95;

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double Kaiser(double x) {  // x in [-1, 1]
  const double r = std::max(0.0, 1.0 - x * x);
  return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(r)) / std::cyl_bessel_i(0.0, kKaiserBeta);
}

// Symmetric Hann of length n without its zero end points.
std::vector<double> TrimmedHann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1));
  }
  return w;
}

void CheckInputs(const dsp::Waveform& clean, const dsp::Waveform& degraded) {
  if (clean.sample_rate_hz != degraded.sample_rate_hz) {
    throw std::invalid_argument("intelligibility: sample rates differ (" +
                                std::to_string(clean.sample_rate_hz) + " vs " +
                                std::to_string(degraded.sample_rate_hz) + ")");
  }
  if (clean.size() != degraded.size()) {
    throw std::invalid_argument("intelligibility: lengths differ (" + std::to_string(clean.size()) +
                                " vs " + std::to_string(degraded.size()) + ")");
  }
}

void CheckEnvelopes(const Matrix& x, const Matrix& y, const IntelligibilityConfig& cfg) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument("intelligibility: envelope shapes differ");
  }
  if (x.cols() < cfg.segment_frames) {
    throw std::invalid_argument("intelligibility: " + std::to_string(x.cols()) +
                                " active frames, need at least " + std::to_string(cfg.segment_frames));
  }
}

// Zero-norm vectors normalize to zero, so they contribute nothing.
Eigen::RowVectorXd CenterAndNormalize(const Eigen::RowVectorXd& v) {
  Eigen::RowVectorXd c = v.array() - v.mean();
  const double n = c.norm();
  return n > 0.0 ? Eigen::RowVectorXd(c / n) : Eigen::RowVectorXd::Zero(v.size());
}

struct Envelopes {
  Matrix clean;
  Matrix degraded;
};

Envelopes Analyze(const dsp::Waveform& clean, const dsp::Waveform& degraded,
                  const IntelligibilityConfig& cfg) {
  CheckInputs(clean, degraded);
  const auto x = Resample(clean, cfg.sample_rate_hz);
  const auto y = Resample(degraded, cfg.sample_rate_hz);
  std::vector<double> xs, ys;
  RemoveSilentFrames(x.samples, y.samples, cfg, &xs, &ys);
  Envelopes e{BandEnvelopes(xs, cfg), BandEnvelopes(ys, cfg)};
  CheckEnvelopes(e.clean, e.degraded, cfg);
  return e;
}

}  // namespace

dsp::Waveform Resample(const dsp::Waveform& w, int target_hz) {
  if (target_hz < 8000) throw std::invalid_argument("resample: target rate must be at least 8 kHz");
  if (w.sample_rate_hz <= 0) throw std::invalid_argument("resample: source rate must be positive");
  if (w.sample_rate_hz == target_hz) return w;
  const long g = std::gcd(static_cast<long>(w.sample_rate_hz), static_cast<long>(target_hz));
  const long up = target_hz / g;
  const long down = w.sample_rate_hz / g;
  // Cutoff in cycles per input sample, below both Nyquist rates.
  const double fc = kRolloff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = kZeroCrossings / fc;  // in input samples
  const long n_in = static_cast<long>(w.size());
  const long n_out = (n_in * up + down - 1) / down;

  // Output sample m sits at input position m*down/up = base + phase/up.
  // The kernel for each of the `up` phases is computed once.
  const long reach = static_cast<long>(std::ceil(half_width));
  const long taps = 2 * reach + 1;
  std::vector<double> table(static_cast<std::size_t>(up * taps));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    for (long j = 0; j < taps; ++j) {
      const double tau = static_cast<double>(j - reach) - frac;  // input index minus position
      table[static_cast<std::size_t>(p * taps + j)] =
          std::abs(tau) >= half_width ? 0.0 : fc * Sinc(fc * tau) * Kaiser(tau / half_width);
    }
  }

  std::vector<double> out(static_cast<std::size_t>(n_out));
  for (long m = 0; m < n_out; ++m) {
    const long base = m * down / up;
    const long phase = m * down % up;
    const double* h = &table[static_cast<std::size_t>(phase * taps)];
    double acc = 0.0, weight = 0.0;
    for (long j = 0; j < taps; ++j) {
      const long k = base + j - reach;
      if (k < 0 || k >= n_in) continue;
      acc += h[j] * w.samples[static_cast<std::size_t>(k)];
      weight += h[j];
    }
    out[static_cast<std::size_t>(m)] = weight != 0.0 ? acc / weight : 0.0;
  }
  return dsp::Waveform{std::move(out), target_hz};
}

Matrix ThirdOctaveBands(const IntelligibilityConfig& cfg) {
  const int bins = cfg.n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.n_fft;
  Matrix obm = Matrix::Zero(cfg.num_bands, bins);
  auto nearest_bin = [&](double hz) {
    return static_cast<int>(std::clamp(std::lround(hz / bin_hz), 0L, static_cast<long>(bins - 1)));
  };
  for (int b = 0; b < cfg.num_bands; ++b) {
    const double lo = cfg.min_center_hz * std::pow(2.0, (2.0 * b - 1.0) / 6.0);
    const double hi = cfg.min_center_hz * std::pow(2.0, (2.0 * b + 1.0) / 6.0);
    for (int k = nearest_bin(lo); k < nearest_bin(hi); ++k) obm(b, k) = 1.0;
  }
  return obm;
}

void RemoveSilentFrames(const std::vector<double>& clean, const std::vector<double>& degraded,
                        const IntelligibilityConfig& cfg, std::vector<double>* clean_out,
                        std::vector<double>* degraded_out) {
  if (clean.size() != degraded.size()) throw std::invalid_argument("remove_silent_frames: length mismatch");
  const auto flen = static_cast<std::size_t>(cfg.frame_len);
  const auto hop = static_cast<std::size_t>(cfg.hop_len);
  const auto window = TrimmedHann(cfg.frame_len);
  const std::size_t frames = clean.size() < flen ? 0 : 1 + (clean.size() - flen) / hop;
  std::vector<double> energy_db(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double e = 0.0;
    for (std::size_t n = 0; n < flen; ++n) {
      const double v = window[n] * clean[t * hop + n];
      e += v * v;
    }
    energy_db[t] = 20.0 * std::log10(std::sqrt(e) + 1e-300);
  }
  std::vector<std::size_t> keep;
  if (frames > 0) {
    const double max_db = *std::max_element(energy_db.begin(), energy_db.end());
    for (std::size_t t = 0; t < frames; ++t) {
      if (energy_db[t] > max_db - cfg.dynamic_range_db) keep.push_back(t);
    }
  }
  const std::size_t len = keep.empty() ? 0 : (keep.size() - 1) * hop + flen;
  clean_out->assign(len, 0.0);
  degraded_out->assign(len, 0.0);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t n = 0; n < flen; ++n) {
      (*clean_out)[i * hop + n] += window[n] * clean[keep[i] * hop + n];
      (*degraded_out)[i * hop + n] += window[n] * degraded[keep[i] * hop + n];
    }
  }
}

Matrix BandEnvelopes(const std::vector<double>& samples, const IntelligibilityConfig& cfg) {
  const Matrix obm = ThirdOctaveBands(cfg);
  const ComplexMatrix spec = dsp::WindowedRfft(samples, TrimmedHann(cfg.frame_len), cfg.hop_len, cfg.n_fft);
  const Matrix power = spec.cwiseAbs2();       // frames x bins
  return (obm * power.transpose()).cwiseSqrt();  // bands x frames
}

double StoiFromEnvelopes(const Matrix& x, const Matrix& y, const IntelligibilityConfig& cfg) {
  CheckEnvelopes(x, y, cfg);
  const Eigen::Index n = cfg.segment_frames;
  const double clip = 1.0 + std::pow(10.0, -cfg.clip_db / 20.0);
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index m = n; m <= x.cols(); ++m) {
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      const Eigen::RowVectorXd xs = x.row(b).segment(m - n, n);
      const Eigen::RowVectorXd ys = y.row(b).segment(m - n, n);
      const double yn = ys.norm();
      // Scale the degraded envelope to the clean energy, then clip it.
      Eigen::RowVectorXd yp = yn > 0.0 ? Eigen::RowVectorXd(ys * (xs.norm() / yn)) : ys;
      yp = yp.cwiseMin(xs * clip);
      total += CenterAndNormalize(xs).dot(CenterAndNormalize(yp));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double EstoiFromEnvelopes(const Matrix& x, const Matrix& y, const IntelligibilityConfig& cfg) {
  CheckEnvelopes(x, y, cfg);
  const Eigen::Index n = cfg.segment_frames;
  const Eigen::Index bands = x.rows();
  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index m = n; m <= x.cols(); ++m) {
    Matrix xs = x.middleCols(m - n, n);
    Matrix ys = y.middleCols(m - n, n);
    // Rows (band envelopes over time) first, then columns (spectra).
    for (Eigen::Index b = 0; b < bands; ++b) {
      xs.row(b) = CenterAndNormalize(xs.row(b));
      ys.row(b) = CenterAndNormalize(ys.row(b));
    }
    double seg = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      const Eigen::RowVectorXd xc = CenterAndNormalize(xs.col(t).transpose());
      const Eigen::RowVectorXd yc = CenterAndNormalize(ys.col(t).transpose());
      seg += xc.dot(yc);
    }
    total += seg / static_cast<double>(n);
    ++count;
  }
  return total / static_cast<double>(count);
}

double Stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded, const IntelligibilityConfig& cfg) {
  const auto e = Analyze(clean, degraded, cfg);
  return StoiFromEnvelopes(e.clean, e.degraded, cfg);
}

double Estoi(const dsp::Waveform& clean, const dsp::Waveform& degraded, const IntelligibilityConfig& cfg) {
  const auto e = Analyze(clean, degraded, cfg);
  return EstoiFromEnvelopes(e.clean, e.degraded, cfg);
}

}  // namespace l2s::metrics
