#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "l2s/matrix.hpp"
#include "l2s/model.hpp"
#include "l2s/rng.hpp"

namespace l2s::training {

struct TrainConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int steps = 1500;
  std::uint64_t seed = 1;
  double margin = 1.0;
  double metric_weight = 3.0;  // picked by held-out ESTOI; 0.3 to 3 perform alike
  double kl_warmup_frac = 0.2;
  double clip_norm = 1.0;
  int negatives = 4;
  double prev_frame_dropout = 0.5;  // probability a decoder input row is zeroed
  int checkpoint_every = 500;

  void Validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct OptState {
  std::map<std::string, std::vector<double>> first_moment;
  std::map<std::string, std::vector<double>> second_moment;
  std::int64_t step = 0;

  static OptState ZerosLike(const nc::ParamSet& params);
  bool operator==(const OptState&) const = default;
};

using Gradients = std::map<std::string, std::vector<double>>;

// One fixed-length training example at video rate; mfcc is standardized.
struct TrainingClip {
  Matrix frames;
  Matrix mfcc;
};

std::vector<std::size_t> SampleNegatives(std::size_t length, std::size_t anchor, std::size_t k,
                                         Rng& rng);

// T x width mask whose rows are all 0 with probability `rate`, else all 1.
Matrix RowDropoutMask(std::size_t length, std::size_t width, double rate, Rng& rng);

// Every timestep as an anchor with k sampled negatives.
std::vector<model::SyncTriplet> MakeTriplets(std::size_t length, std::size_t k, Rng& rng);

// Linear 0 -> 1 over the first kl_warmup_frac of the run, then 1.
double KlWeightAt(std::int64_t step, const TrainConfig& cfg);

// Clips the global gradient norm to cfg.clip_norm (when positive), then
// applies one bias-corrected Adam update in place. Throws on a non-finite
// gradient, naming the parameter.
void AdamStep(nc::ParamSet& params, const Gradients& grads, OptState& state, const TrainConfig& cfg);

// Runs the optimization loop. The model's parameter storage is updated in
// place; optimizer state, RNG and step counter are exposed for checkpointing
// and resumption.
class Trainer {
 public:
  Trainer(model::Model& model, std::vector<TrainingClip> clips, const TrainConfig& cfg);

  // One optimizer step on a sampled batch; returns the batch-mean losses.
  model::LossBreakdown Step();

  std::int64_t step() const { return state_.step; }
  const TrainConfig& config() const { return cfg_; }
  OptState& opt_state() { return state_; }
  const OptState& opt_state() const { return state_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  model::Model& model_;
  std::vector<TrainingClip> clips_;
  TrainConfig cfg_;
  OptState state_;
  Rng rng_;
};

struct StepRecord {
  std::int64_t step = 0;
  model::LossBreakdown losses;
  double wall_ms = 0.0;
};

using StepCallback = std::function<void(const StepRecord&)>;
using CheckpointCallback = std::function<void(const Trainer&)>;

// Steps `trainer` until cfg.steps, invoking `on_checkpoint` every
// checkpoint_every steps and once at the end.
std::vector<StepRecord> Train(Trainer& trainer, const StepCallback& on_step = {},
                              const CheckpointCallback& on_checkpoint = {});

}  // namespace l2s::training
