#pragma once

// Short-time objective intelligibility (STOI) and its extended variant
// (ESTOI). Both compare one-third-octave band envelopes of a clean and a
// degraded signal over 384 ms segments after dropping silent clean frames.

#include <vector>

#include "l2s/dsp.hpp"
#include "l2s/matrix.hpp"

namespace l2s::metrics {

struct IntelligibilityConfig {
  int sample_rate_hz = 10000;
  int frame_len = 256;
  int hop_len = 128;
  int n_fft = 512;
  int num_bands = 15;
  double min_center_hz = 150.0;
  int segment_frames = 30;       // 30 frames at a 128-sample hop = 384 ms
  double dynamic_range_db = 40.0;
  double clip_db = -15.0;        // beta
};

// Windowed-sinc rational resampler (Kaiser window). Output has
// ceil(n * target / source) samples; near the edges the kernel is
// renormalized over the available input so constants stay constant.
dsp::Waveform Resample(const dsp::Waveform& w, int target_hz);

// Band-assignment matrix (num_bands x n_fft/2+1) of 0/1 entries.
Matrix ThirdOctaveBands(const IntelligibilityConfig& cfg);

// Drops frames of `clean` whose energy is more than dynamic_range_db below
// the loudest one, drops the same frames of `degraded`, and overlap-adds the
// survivors back into two signals.
void RemoveSilentFrames(const std::vector<double>& clean, const std::vector<double>& degraded,
                        const IntelligibilityConfig& cfg, std::vector<double>* clean_out,
                        std::vector<double>* degraded_out);

// Band envelopes, num_bands x frames.
Matrix BandEnvelopes(const std::vector<double>& samples, const IntelligibilityConfig& cfg);

// Scores from envelopes that are already silence-trimmed (bands x frames).
// Each needs at least segment_frames frames.
double StoiFromEnvelopes(const Matrix& clean, const Matrix& degraded, const IntelligibilityConfig& cfg);
double EstoiFromEnvelopes(const Matrix& clean, const Matrix& degraded, const IntelligibilityConfig& cfg);

// Full measures. Inputs must share a sample rate and length; both are
// resampled to the analysis rate. Throws std::invalid_argument when fewer
// than one segment of active frames remains.
double Stoi(const dsp::Waveform& clean, const dsp::Waveform& degraded,
            const IntelligibilityConfig& cfg = {});
double Estoi(const dsp::Waveform& clean, const dsp::Waveform& degraded,
             const IntelligibilityConfig& cfg = {});

}  // namespace l2s::metrics
