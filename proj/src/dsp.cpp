#include "l2s/dsp.hpp"

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "l2s/rng.hpp"

namespace l2s::dsp {
namespace {

// FFTW plans are created once per size under a lock; executing a plan on
// caller-owned buffers is thread-safe.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const FftPlans& PlansFor(int n) {
  static std::mutex mu;
  static std::map<int, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(static_cast<std::size_t>(n));
  std::vector<fftw_complex> cplx(static_cast<std::size_t>(n / 2 + 1));
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real.data(), cplx.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans.inverse = fftw_plan_dft_c2r_1d(n, cplx.data(), real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, plans).first->second;
}

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// || |est| - target || / ||target|| over the full two-sided spectrum: the
// interior bins of a one-sided spectrum stand for two bins each. In this
// norm the overlap-add inverse is an exact least-squares projection, which
// is what makes the Griffin-Lim error non-increasing.
double SpectralConvergence(const ComplexMatrix& est, const Matrix& target) {
  const Eigen::Index last = target.cols() - 1;
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    for (Eigen::Index k = 0; k <= last; ++k) {
      const double w = (k == 0 || k == last) ? 1.0 : 2.0;
      const double d = std::abs(est(t, k)) - target(t, k);
      num += w * d * d;
      den += w * target(t, k) * target(t, k);
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

void AudioConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("AudioConfig: " + msg); };
  if (sample_rate_hz <= 0) fail("sample_rate_hz must be positive");
  if (hop_len <= 0) fail("hop_len must be positive");
  if (hop_len > frame_len) fail("hop_len must not exceed frame_len");
  if (frame_len > n_fft) fail("frame_len must not exceed n_fft");
  if (!IsPowerOfTwo(n_fft)) fail("n_fft must be a power of two");
  if (n_mels <= 0 || n_mfcc <= 0) fail("n_mels and n_mfcc must be positive");
  if (n_mfcc > n_mels) fail("n_mfcc must not exceed n_mels");
  if (!(fmin_hz >= 0.0 && fmin_hz < fmax_hz)) fail("need 0 <= fmin < fmax");
  if (fmax_hz > sample_rate_hz / 2.0) fail("fmax must not exceed the Nyquist frequency");
  if (!(log_floor > 0.0)) fail("log_floor must be positive");
  if (griffin_lim_iters < 0) fail("griffin_lim_iters must be non-negative");
}

std::vector<double> HannWindow(int length) {
  // Periodic Hann: squared copies at hop = length/4 sum to a constant.
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n < length; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  }
  return w;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t NumFrames(std::size_t num_samples, const AudioConfig& cfg) {
  const auto frame = static_cast<std::size_t>(cfg.frame_len);
  if (num_samples < frame) return 0;
  return 1 + (num_samples - frame) / static_cast<std::size_t>(cfg.hop_len);
}

ComplexMatrix Stft(const Waveform& w, const AudioConfig& cfg) { return Stft(w.samples, cfg); }

ComplexMatrix Stft(const std::vector<double>& samples, const AudioConfig& cfg) {
  cfg.Validate();
  if (NumFrames(samples.size(), cfg) == 0) {
    throw std::invalid_argument("stft: signal of " + std::to_string(samples.size()) +
                                " samples is shorter than one frame (" +
                                std::to_string(cfg.frame_len) + ")");
  }
  return WindowedRfft(samples, HannWindow(cfg.frame_len), cfg.hop_len, cfg.n_fft);
}

ComplexMatrix WindowedRfft(const std::vector<double>& samples, const std::vector<double>& window,
                           int hop, int n_fft) {
  const std::size_t flen = window.size();
  if (!IsPowerOfTwo(n_fft) || flen == 0 || flen > static_cast<std::size_t>(n_fft) || hop < 1) {
    throw std::invalid_argument("windowed_rfft: need 0 < window <= n_fft (a power of two), hop >= 1");
  }
  const std::size_t frames =
      samples.size() < flen ? 0 : 1 + (samples.size() - flen) / static_cast<std::size_t>(hop);
  const auto& plans = PlansFor(n_fft);
  const int bins = n_fft / 2 + 1;
  ComplexMatrix out(static_cast<Eigen::Index>(frames), bins);
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<fftw_complex> spec(static_cast<std::size_t>(bins));
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const std::size_t start = t * static_cast<std::size_t>(hop);
    for (std::size_t n = 0; n < flen; ++n) buf[n] = samples[start + n] * window[n];
    fftw_execute_dft_r2c(plans.forward, buf.data(), spec.data());
    for (int k = 0; k < bins; ++k) {
      out(static_cast<Eigen::Index>(t), k) = {spec[static_cast<std::size_t>(k)][0], spec[static_cast<std::size_t>(k)][1]};
    }
  }
  return out;
}

std::vector<double> Istft(const ComplexMatrix& spec, const AudioConfig& cfg) {
  cfg.Validate();
  if (spec.cols() != cfg.n_bins()) {
    throw std::invalid_argument("istft: expected " + std::to_string(cfg.n_bins()) + " bins, got " +
                                std::to_string(spec.cols()));
  }
  const auto frames = static_cast<std::size_t>(spec.rows());
  if (frames == 0) return {};
  const auto hop = static_cast<std::size_t>(cfg.hop_len);
  const auto flen = static_cast<std::size_t>(cfg.frame_len);
  const std::size_t length = (frames - 1) * hop + flen;
  const auto window = HannWindow(cfg.frame_len);
  const auto& plans = PlansFor(cfg.n_fft);

  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  std::vector<double> buf(static_cast<std::size_t>(cfg.n_fft));
  std::vector<fftw_complex> bins(static_cast<std::size_t>(cfg.n_bins()));
  const double inv_n = 1.0 / cfg.n_fft;
  for (std::size_t t = 0; t < frames; ++t) {
    for (int k = 0; k < cfg.n_bins(); ++k) {
      const auto v = spec(static_cast<Eigen::Index>(t), k);
      bins[static_cast<std::size_t>(k)][0] = v.real();
      bins[static_cast<std::size_t>(k)][1] = v.imag();
    }
    fftw_execute_dft_c2r(plans.inverse, bins.data(), buf.data());
    for (std::size_t n = 0; n < flen; ++n) {
      out[t * hop + n] += buf[n] * inv_n * window[n];
      norm[t * hop + n] += window[n] * window[n];
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    out[i] = norm[i] > 1e-10 ? out[i] / norm[i] : 0.0;
  }
  return out;
}

Matrix MelFilterbank(const AudioConfig& cfg) {
  cfg.Validate();
  const int bins = cfg.n_bins();
  const double mel_lo = HzToMel(cfg.fmin_hz);
  const double mel_hi = HzToMel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));
  }
  Matrix fb = Matrix::Zero(cfg.n_mels, bins);
  const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.n_fft;
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb(m, k) = w;
    }
    if (fb.row(m).sum() <= 0.0) {
      throw std::invalid_argument("mel_filterbank: filter " + std::to_string(m) +
                                  " covers no FFT bin; n_mels=" + std::to_string(cfg.n_mels) +
                                  " is too large for n_fft=" + std::to_string(cfg.n_fft));
    }
  }
  return fb;
}

Matrix DctMatrix(int n_out, int n_in) {
  Matrix d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n) {
      d(k, n) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
    }
  }
  return d;
}

Matrix Mfcc(const Waveform& w, const AudioConfig& cfg) {
  const ComplexMatrix spec = Stft(w, cfg);
  const Matrix power = spec.cwiseAbs2();
  const Matrix fb = MelFilterbank(cfg);
  Matrix log_mel = (power * fb.transpose()).cwiseMax(cfg.log_floor).array().log().matrix();
  return log_mel * DctMatrix(cfg.n_mfcc, cfg.n_mels).transpose();
}

Spectrogram InvertMfcc(const Matrix& mfcc, const AudioConfig& cfg) {
  cfg.Validate();
  if (mfcc.cols() != cfg.n_mfcc) {
    throw std::invalid_argument("invert_mfcc: expected " + std::to_string(cfg.n_mfcc) +
                                " coefficients per frame, got " + std::to_string(mfcc.cols()));
  }
  // Truncated orthonormal DCT: its transpose zero-pads the missing coefficients.
  const Matrix log_mel = mfcc * DctMatrix(cfg.n_mfcc, cfg.n_mels);
  const Matrix mel_energy = log_mel.array().exp().matrix();
  const Matrix fb = MelFilterbank(cfg);
  const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  const Matrix power = (mel_energy * pinv.transpose()).cwiseMax(0.0);
  return Spectrogram{power.cwiseSqrt()};
}

void PeakNormalize(std::vector<double>& samples) {
  double peak = 0.0;
  for (double v : samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : samples) v /= peak;
  }
}

Waveform GriffinLim(const Spectrogram& target, const AudioConfig& cfg, int iters,
                    std::uint64_t seed, std::vector<double>* convergence) {
  if (iters < 0) throw std::invalid_argument("griffin_lim: iters must be non-negative");
  const Matrix& mags = target.mags;
  if (mags.cols() != cfg.n_bins()) {
    throw std::invalid_argument("griffin_lim: expected " + std::to_string(cfg.n_bins()) +
                                " bins, got " + std::to_string(mags.cols()));
  }
  if ((mags.array() < 0.0).any()) throw std::invalid_argument("griffin_lim: negative magnitude");

  Rng rng(seed);
  ComplexMatrix spec(mags.rows(), mags.cols());
  for (Eigen::Index t = 0; t < mags.rows(); ++t) {
    for (Eigen::Index k = 0; k < mags.cols(); ++k) {
      spec(t, k) = std::polar(mags(t, k), 2.0 * std::numbers::pi * rng.Uniform());
    }
  }
  if (convergence) convergence->clear();
  std::vector<double> x = Istft(spec, cfg);
  for (int it = 0; it < iters; ++it) {
    const ComplexMatrix est = Stft(x, cfg);
    if (convergence) convergence->push_back(SpectralConvergence(est, mags));
    for (Eigen::Index t = 0; t < est.rows(); ++t) {
      for (Eigen::Index k = 0; k < est.cols(); ++k) {
        const double a = std::abs(est(t, k));
        spec(t, k) = a > 0.0 ? est(t, k) * (mags(t, k) / a) : std::complex<double>(mags(t, k), 0.0);
      }
    }
    x = Istft(spec, cfg);
  }
  if (convergence && !x.empty()) {
    convergence->push_back(SpectralConvergence(Stft(x, cfg), mags));
  }
  PeakNormalize(x);
  return Waveform{std::move(x), cfg.sample_rate_hz};
}

}  // namespace l2s::dsp
