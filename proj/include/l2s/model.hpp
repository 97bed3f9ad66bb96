#pragma once

// Cross-modal latent model: a frame embedder and video encoder produce the
// video-conditioned Gaussian (prior side), an MFCC encoder produces the audio
// posterior, and a causal decoder generates MFCC frames from latent samples.
//
// The decoder works on standardized MFCCs; FeatureStats holds the per-
// coefficient mean and spread used to move between raw and standardized values.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l2s/latent.hpp"
#include "l2s/matrix.hpp"
#include "l2s/params.hpp"
#include "l2s/transformer.hpp"

namespace l2s {
class Rng;
}

namespace l2s::model {

using nc::ParamSet;
using nc::Tensor;

struct ModelConfig {
  int frame_dim = 16;
  int n_mfcc = 13;
  int d_z = 32;
  tf::TransformerConfig transformer;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureStats Identity(int dim);
  // Column means and standard deviations (floored at 1e-3) over all rows.
  static FeatureStats Fit(std::span<const Matrix> sequences);
  Matrix Standardize(const Matrix& raw) const;
  Matrix Restore(const Matrix& standardized) const;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const ModelConfig& cfg, ParamSet params, FeatureStats stats);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  FeatureStats& stats() { return stats_; }
  const FeatureStats& stats() const { return stats_; }

 private:
  ModelConfig cfg_;
  ParamSet params_;
  FeatureStats stats_;
};

// Registers every parameter of the architecture under stable names.
ParamSet InitParams(const ModelConfig& cfg, Rng& rng);

struct LossBreakdown {
  double rec = 0.0;
  double kl = 0.0;
  double met = 0.0;
  double joint = 0.0;
};

struct LossWeights {
  double metric_weight = 3.0;  // weight on the sync loss in the joint objective
  double kl_weight = 1.0;
  double margin = 1.0;         // distance margin inside the sync loss
};

// One anchor timestep and the out-of-sync timesteps paired with it.
struct SyncTriplet {
  std::size_t anchor = 0;
  std::vector<std::size_t> negatives;
};

// Affine frame embedding plus positional encoding, T x d_model.
Tensor EmbedFrames(const Tensor& frames, const ParamSet& params, const ModelConfig& cfg);
Tensor EmbedAudio(const Tensor& mfcc, const ParamSet& params, const ModelConfig& cfg);

latent::GaussianSequence EncodeVideo(const Tensor& frames, const ParamSet& params,
                                     const ModelConfig& cfg, Rng* dropout_rng = nullptr);
latent::GaussianSequence EncodeAudio(const Tensor& mfcc, const ParamSet& params,
                                     const ModelConfig& cfg, Rng* dropout_rng = nullptr);

// Decoder input for teacher forcing: the learned start vector followed by
// mfcc rows 0..T-2.
Tensor ShiftRight(const Tensor& mfcc, const ParamSet& params);

// Predicted (standardized) MFCC rows from previous rows and latent samples z.
Tensor Decode(const Tensor& prev_mfcc, const Tensor& z, const ParamSet& params,
              const ModelConfig& cfg, Rng* dropout_rng = nullptr);

// Mean squared error over all entries.
Tensor ReconstructionLoss(const Tensor& pred, const Tensor& target);

// (1/2N) sum_n max(0, J_n)^2 with
// J_n = D(F_i,S_i) + log sum_j [exp(margin - D(F_i,S_j)) + exp(margin - D(S_i,S_j))],
// D the Euclidean distance between rows.
Tensor MetricLoss(const Tensor& frame_emb, const Tensor& audio_emb,
                  std::span<const SyncTriplet> triplets, double margin);

struct ForwardResult {
  LossBreakdown losses;
  Tensor joint;  // graph root for Backward()
  latent::GaussianSequence video;
  latent::GaussianSequence audio;
  Tensor prediction;
};

// Both encoders, a posterior sample via `noise`, a teacher-forced decoder
// pass, and the joint objective rec + kl_weight * kl + metric_weight * met.
// `prev_mask` (T x n_mfcc, optional) multiplies the decoder's shifted input;
// training zeroes whole rows of it so the decoder cannot lean on the
// previous frame alone.
ForwardResult ForwardLosses(const Tensor& frames, const Tensor& mfcc, const ParamSet& params,
                            const ModelConfig& cfg, const Tensor& noise,
                            std::span<const SyncTriplet> triplets, const LossWeights& weights,
                            Rng* dropout_rng = nullptr, const Tensor* prev_mask = nullptr);

// Average-pools T_a audio-rate rows into T_video groups of floor(T_a/T_video)
// rows; the last group absorbs the remainder.
Matrix AlignRates(const Matrix& mfcc, std::size_t video_frames);

// Repeats each row `factor` times (video rate back to audio rate).
Matrix RepeatRows(const Matrix& features, std::size_t factor);

}  // namespace l2s::model
