#pragma once

// Short-time analysis and MFCC features, plus the inverse path used for
// synthesis: MFCC -> mel energies -> linear magnitudes -> Griffin-Lim.

#include <cstdint>
#include <vector>

#include "l2s/matrix.hpp"

namespace l2s::dsp {

struct AudioConfig {
  int sample_rate_hz = 16000;
  int frame_len = 400;
  int hop_len = 160;
  int n_fft = 512;
  int n_mels = 40;
  int n_mfcc = 13;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;
  int griffin_lim_iters = 60;

  // Throws std::invalid_argument describing the first violated constraint.
  void Validate() const;
  int n_bins() const { return n_fft / 2 + 1; }

  bool operator==(const AudioConfig&) const = default;
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

// Non-negative magnitudes, frames x (n_fft/2 + 1).
struct Spectrogram {
  Matrix mags;
};

std::vector<double> HannWindow(int length);
double HzToMel(double hz);
double MelToHz(double mel);

// Frame count for a signal of `num_samples` samples (0 if shorter than a frame).
std::size_t NumFrames(std::size_t num_samples, const AudioConfig& cfg);

ComplexMatrix Stft(const Waveform& w, const AudioConfig& cfg);
ComplexMatrix Stft(const std::vector<double>& samples, const AudioConfig& cfg);

// Frames of len(window) samples every `hop`, windowed, zero-padded to n_fft;
// frames x (n_fft/2 + 1). Trailing samples that do not fill a frame are dropped.
ComplexMatrix WindowedRfft(const std::vector<double>& samples, const std::vector<double>& window,
                           int hop, int n_fft);

// Weighted overlap-add inverse; output has (T-1)*hop + frame_len samples.
std::vector<double> Istft(const ComplexMatrix& spec, const AudioConfig& cfg);

Matrix MelFilterbank(const AudioConfig& cfg);

// DCT-II matrix with orthonormal rows, n_out x n_in.
Matrix DctMatrix(int n_out, int n_in);

// T x n_mfcc cepstra of the log mel power spectrum.
Matrix Mfcc(const Waveform& w, const AudioConfig& cfg);

Spectrogram InvertMfcc(const Matrix& mfcc, const AudioConfig& cfg);

// Phase reconstruction. When `convergence` is non-null it receives the
// spectral convergence || |STFT(x_k)| - target || / || target || for
// k = 0..iters (x_k is the k-th ISTFT; norms over the two-sided spectrum).
Waveform GriffinLim(const Spectrogram& target, const AudioConfig& cfg, int iters,
                    std::uint64_t seed, std::vector<double>* convergence = nullptr);

// Scales so that max |sample| is 1; all-zero input is returned unchanged.
void PeakNormalize(std::vector<double>& samples);

}  // namespace l2s::dsp
