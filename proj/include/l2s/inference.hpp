#pragma once

// Speech prediction from frame features alone: sliding windows over the
// video, one latent per frame from the video-side Gaussian, autoregressive
// MFCC rollout, crossfaded window merge, and Griffin-Lim synthesis.

#include <cstdint>
#include <vector>

#include "l2s/dsp.hpp"
#include "l2s/matrix.hpp"
#include "l2s/model.hpp"

namespace l2s {
class Rng;
}

namespace l2s::inference {

enum class LatentMode { kMean, kSample };

struct InferenceConfig {
  int window_len = 24;
  int overlap = 4;
  int video_fps = 25;
  LatentMode mode = LatentMode::kMean;
  std::uint64_t seed = 0;  // latent sampling and Griffin-Lim phase

  void Validate() const;
};

struct WindowPlan {
  int window_len = 0;
  int overlap = 0;
  std::vector<std::size_t> starts;
  std::vector<std::size_t> lengths;
  std::size_t total = 0;

  // Windows of window_len frames advancing by window_len - overlap; the last
  // one is truncated at the end of the sequence.
  static WindowPlan Make(std::size_t total_frames, int window_len, int overlap);
  std::size_t size() const { return starts.size(); }
};

// Teacher-forcing-free decoding of standardized MFCC rows given latents z
// (T x d_z). Row t is produced from the start vector, rows 0..t-1 already
// produced, and z[0..t].
Matrix Rollout(const model::Model& model, const Matrix& z);

// Raw MFCC rows (window length x n_mfcc) for one window of frames.
Matrix PredictWindow(const Matrix& frames, const model::Model& model, LatentMode mode, Rng* rng);

// Joins per-window predictions; the `overlap` shared frames are crossfaded linearly.
Matrix OverlapMerge(const std::vector<Matrix>& windows, const WindowPlan& plan);

// Per-frame MFCC for a whole frame sequence.
Matrix PredictFeatures(const Matrix& frames, const model::Model& model, const InferenceConfig& cfg);

// Audio-rate MFCC frames per video frame (sample_rate / (fps * hop), must be integral).
std::size_t RateFactor(const dsp::AudioConfig& audio, int video_fps);

// Ground-truth MFCC at video rate: the waveform is padded by
// (frame_len - hop)/2 samples on each side so each video frame owns exactly
// RateFactor analysis frames, which are then averaged.
Matrix VideoRateMfcc(const dsp::Waveform& audio, const dsp::AudioConfig& cfg, int video_fps,
                     std::size_t video_frames);

// Inverse of VideoRateMfcc up to phase: repeat rows to audio rate, invert
// the MFCC, run Griffin-Lim and trim the analysis padding. The result has
// video_frames * sample_rate / fps samples, peak-normalized.
dsp::Waveform FeaturesToWaveform(const Matrix& video_rate_mfcc, const dsp::AudioConfig& cfg,
                                 int video_fps, std::uint64_t phase_seed);

// Frames in, waveform out; there is deliberately no audio input.
dsp::Waveform PredictSpeech(const Matrix& frames, const model::Model& model,
                            const dsp::AudioConfig& audio, const InferenceConfig& cfg);

}  // namespace l2s::inference
