#include "l2s/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "l2s/latent.hpp"

namespace l2s::training {

void TrainConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TrainConfig: " + msg); };
  if (!(lr >= 0.0)) fail("lr must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0,1)");
  if (!(eps > 0.0)) fail("eps must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (steps < 0) fail("steps must be non-negative");
  if (negatives < 1) fail("negatives must be positive");
  if (!(prev_frame_dropout >= 0.0 && prev_frame_dropout < 1.0)) fail("prev_frame_dropout must be in [0,1)");
  if (kl_warmup_frac < 0.0 || kl_warmup_frac > 1.0) fail("kl_warmup_frac must be in [0,1]");
  if (checkpoint_every < 0) fail("checkpoint_every must be non-negative");
}

OptState OptState::ZerosLike(const nc::ParamSet& params) {
  OptState s;
  for (const auto& [name, t] : params.entries()) {
    s.first_moment[name].assign(t.size(), 0.0);
    s.second_moment[name].assign(t.size(), 0.0);
  }
  return s;
}

std::vector<std::size_t> SampleNegatives(std::size_t length, std::size_t anchor, std::size_t k,
                                         Rng& rng) {
  if (length < 2) throw std::invalid_argument("sample_negatives: need T >= 2");
  if (anchor >= length) throw std::invalid_argument("sample_negatives: anchor out of range");
  if (k > length - 1) {
    throw std::invalid_argument("sample_negatives: k=" + std::to_string(k) + " exceeds the " +
                                std::to_string(length - 1) + " available negatives");
  }
  // Partial Fisher-Yates over the T-1 candidates.
  std::vector<std::size_t> pool;
  pool.reserve(length - 1);
  for (std::size_t j = 0; j < length; ++j) {
    if (j != anchor) pool.push_back(j);
  }
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t pick = i + rng.Below(pool.size() - i);
    std::swap(pool[i], pool[pick]);
  }
  pool.resize(k);
  return pool;
}

std::vector<model::SyncTriplet> MakeTriplets(std::size_t length, std::size_t k, Rng& rng) {
  std::vector<model::SyncTriplet> out;
  out.reserve(length);
  const std::size_t usable = std::min(k, length - 1);
  for (std::size_t i = 0; i < length; ++i) out.push_back({i, SampleNegatives(length, i, usable, rng)});
  return out;
}

Matrix RowDropoutMask(std::size_t length, std::size_t width, double rate, Rng& rng) {
  Matrix mask = Matrix::Ones(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(width));
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    if (rng.Uniform() < rate) mask.row(r).setZero();
  }
  return mask;
}

double KlWeightAt(std::int64_t step, const TrainConfig& cfg) {
  const double warmup = cfg.kl_warmup_frac * cfg.steps;
  if (warmup <= 0.0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / warmup);
}

void AdamStep(nc::ParamSet& params, const Gradients& grads, OptState& state, const TrainConfig& cfg) {
  double sq_norm = 0.0;
  for (const auto& [name, t] : params.entries()) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("adam_step: no gradient for '" + name + "'");
    if (it->second.size() != t.size()) {
      throw std::invalid_argument("adam_step: gradient for '" + name + "' has wrong size");
    }
    for (double g : it->second) {
      if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in '" + name + "'");
      sq_norm += g * g;
    }
  }
  const double norm = std::sqrt(sq_norm);
  const double clip = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, t] : params.entries()) {
    auto& m = state.first_moment[name];
    auto& v = state.second_moment[name];
    if (m.size() != t.size()) m.assign(t.size(), 0.0);
    if (v.size() != t.size()) v.assign(t.size(), 0.0);
    const auto& g = grads.at(name);
    auto values = nc::Tensor(t).mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

Trainer::Trainer(model::Model& model, std::vector<TrainingClip> clips, const TrainConfig& cfg)
    : model_(model),
      clips_(std::move(clips)),
      cfg_(cfg),
      state_(OptState::ZerosLike(model.params())),
      rng_(cfg.seed) {
  cfg_.Validate();
  if (clips_.empty()) throw std::invalid_argument("train: empty dataset");
  const auto& mc = model_.config();
  for (const auto& c : clips_) {
    if (c.frames.rows() != c.mfcc.rows() || c.frames.rows() < 2) {
      throw std::invalid_argument("train: clip frames/mfcc must share a length of at least 2");
    }
    if (c.frames.cols() != mc.frame_dim || c.mfcc.cols() != mc.n_mfcc) {
      throw std::invalid_argument("train: clip feature widths do not match the model");
    }
  }
}

model::LossBreakdown Trainer::Step() {
  const auto& mc = model_.config();
  const std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
  model::LossWeights weights;
  weights.metric_weight = cfg_.metric_weight;
  weights.kl_weight = KlWeightAt(state_.step, cfg_);
  weights.margin = cfg_.margin;

  Gradients sum;
  for (const auto& [name, t] : model_.params().entries()) sum[name].assign(t.size(), 0.0);
  model::LossBreakdown mean;
  Rng* dropout_rng = mc.transformer.dropout_rate > 0.0 ? &rng_ : nullptr;

  for (std::size_t b = 0; b < batch; ++b) {
    const TrainingClip& clip = clips_[rng_.Below(clips_.size())];
    const std::size_t len = static_cast<std::size_t>(clip.frames.rows());
    const auto noise = latent::SampleNoise(len, static_cast<std::size_t>(mc.d_z), rng_);
    const auto triplets = MakeTriplets(len, static_cast<std::size_t>(cfg_.negatives), rng_);
    std::optional<nc::Tensor> mask;
    if (cfg_.prev_frame_dropout > 0.0) {
      mask = ToTensor(RowDropoutMask(len, static_cast<std::size_t>(mc.n_mfcc), cfg_.prev_frame_dropout, rng_));
    }

    const nc::ParamSet local = model_.params().Fork();
    auto result = model::ForwardLosses(ToTensor(clip.frames), ToTensor(clip.mfcc), local, mc, noise,
                                       triplets, weights, dropout_rng, mask ? &*mask : nullptr);
    nc::Backward(result.joint);
    for (const auto& [name, t] : local.entries()) {
      const auto g = t.grad();
      auto& acc = sum[name];
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
    mean.rec += result.losses.rec;
    mean.kl += result.losses.kl;
    mean.met += result.losses.met;
    mean.joint += result.losses.joint;
  }
  const double inv = 1.0 / static_cast<double>(batch);
  for (auto& [name, g] : sum) {
    for (double& x : g) x *= inv;
  }
  mean.rec *= inv;
  mean.kl *= inv;
  mean.met *= inv;
  mean.joint *= inv;

  AdamStep(model_.params(), sum, state_, cfg_);
  return mean;
}

std::vector<StepRecord> Train(Trainer& trainer, const StepCallback& on_step,
                              const CheckpointCallback& on_checkpoint) {
  std::vector<StepRecord> history;
  const auto& cfg = trainer.config();
  while (trainer.step() < cfg.steps) {
    const auto t0 = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.step = trainer.step();
    rec.losses = trainer.Step();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
    if (on_step) on_step(rec);
    if (on_checkpoint && cfg.checkpoint_every > 0 && trainer.step() % cfg.checkpoint_every == 0 &&
        trainer.step() < cfg.steps) {
      on_checkpoint(trainer);
    }
  }
  if (on_checkpoint) on_checkpoint(trainer);
  return history;
}

}  // namespace l2s::training
