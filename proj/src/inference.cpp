#include "l2s/inference.hpp"

#include <stdexcept>
#include <string>

#include "l2s/latent.hpp"
#include "l2s/rng.hpp"

namespace l2s::inference {

void InferenceConfig::Validate() const {
  if (window_len < 1) throw std::invalid_argument("InferenceConfig: window_len must be positive");
  if (overlap < 0 || overlap >= window_len) {
    throw std::invalid_argument("InferenceConfig: overlap must be in [0, window_len)");
  }
  if (video_fps < 1) throw std::invalid_argument("InferenceConfig: video_fps must be positive");
}

WindowPlan WindowPlan::Make(std::size_t total_frames, int window_len, int overlap) {
  if (window_len < 1 || overlap < 0 || overlap >= window_len) {
    throw std::invalid_argument("window plan: need 0 <= overlap < window_len");
  }
  if (total_frames == 0) throw std::invalid_argument("window plan: empty sequence");
  WindowPlan plan;
  plan.window_len = window_len;
  plan.overlap = overlap;
  plan.total = total_frames;
  const auto w = static_cast<std::size_t>(window_len);
  const auto advance = static_cast<std::size_t>(window_len - overlap);
  for (std::size_t start = 0;; start += advance) {
    const std::size_t len = std::min(w, total_frames - start);
    plan.starts.push_back(start);
    plan.lengths.push_back(len);
    if (start + len >= total_frames) break;
  }
  return plan;
}

Matrix Rollout(const model::Model& model, const Matrix& z) {
  const auto& cfg = model.config();
  const nc::ParamSet params = model.params().Fork(false);
  const Eigen::Index len = z.rows();
  const nc::Tensor z_t = ToTensor(z);
  const auto start = params.Get("decoder.start").data();

  // Decoder input: start vector, then previously generated rows. Rows past
  // the current step are zero and, by causality, never influence it.
  Matrix prev = Matrix::Zero(len, cfg.n_mfcc);
  for (Eigen::Index c = 0; c < cfg.n_mfcc; ++c) prev(0, c) = start[static_cast<std::size_t>(c)];
  Matrix out(len, cfg.n_mfcc);
  for (Eigen::Index t = 0; t < len; ++t) {
    const Matrix step = ToMatrix(model::Decode(ToTensor(prev), z_t, params, cfg));
    out.row(t) = step.row(t);
    if (t + 1 < len) prev.row(t + 1) = step.row(t);
  }
  return out;
}

Matrix PredictWindow(const Matrix& frames, const model::Model& model, LatentMode mode, Rng* rng) {
  if (frames.rows() == 0) throw std::invalid_argument("predict_window: empty window");
  const auto& cfg = model.config();
  const nc::ParamSet params = model.params().Fork(false);
  const auto g = model::EncodeVideo(ToTensor(frames), params, cfg);
  Matrix z = ToMatrix(g.mu);
  if (mode == LatentMode::kSample) {
    if (!rng) throw std::invalid_argument("predict_window: sampling mode needs an rng");
    const auto noise = latent::SampleNoise(g.length(), g.dim(), *rng);
    z = ToMatrix(latent::Reparameterize(g, noise));
  }
  return model.stats().Restore(Rollout(model, z));
}

Matrix OverlapMerge(const std::vector<Matrix>& windows, const WindowPlan& plan) {
  if (windows.size() != plan.size() || windows.empty()) {
    throw std::invalid_argument("overlap_merge: " + std::to_string(windows.size()) +
                                " windows for a plan of " + std::to_string(plan.size()));
  }
  const Eigen::Index cols = windows.front().cols();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (static_cast<std::size_t>(windows[i].rows()) != plan.lengths[i] || windows[i].cols() != cols) {
      throw std::invalid_argument("overlap_merge: window " + std::to_string(i) +
                                  " does not match the plan");
    }
  }
  const auto v = static_cast<std::size_t>(plan.overlap);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(plan.total), cols);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t start = plan.starts[i];
    for (std::size_t r = 0; r < plan.lengths[i]; ++r) {
      const auto dst = static_cast<Eigen::Index>(start + r);
      const auto src = windows[i].row(static_cast<Eigen::Index>(r));
      if (i > 0 && r < v) {
        const double w = static_cast<double>(r + 1) / static_cast<double>(v + 1);
        out.row(dst) = (1.0 - w) * out.row(dst) + w * src;
      } else {
        out.row(dst) = src;
      }
    }
  }
  return out;
}

Matrix PredictFeatures(const Matrix& frames, const model::Model& model, const InferenceConfig& cfg) {
  cfg.Validate();
  const auto plan = WindowPlan::Make(static_cast<std::size_t>(frames.rows()), cfg.window_len, cfg.overlap);
  Rng rng(cfg.seed);
  std::vector<Matrix> windows;
  windows.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const Matrix w = frames.middleRows(static_cast<Eigen::Index>(plan.starts[i]),
                                       static_cast<Eigen::Index>(plan.lengths[i]));
    windows.push_back(PredictWindow(w, model, cfg.mode, &rng));
  }
  return OverlapMerge(windows, plan);
}

std::size_t RateFactor(const dsp::AudioConfig& audio, int video_fps) {
  const long denom = static_cast<long>(video_fps) * audio.hop_len;
  if (video_fps < 1 || audio.sample_rate_hz % denom != 0) {
    throw std::invalid_argument("rate factor: sample rate " + std::to_string(audio.sample_rate_hz) +
                                " is not a multiple of fps*hop = " + std::to_string(denom));
  }
  return static_cast<std::size_t>(audio.sample_rate_hz / denom);
}

Matrix VideoRateMfcc(const dsp::Waveform& audio, const dsp::AudioConfig& cfg, int video_fps,
                     std::size_t video_frames) {
  const std::size_t factor = RateFactor(cfg, video_fps);
  const auto pad = static_cast<std::size_t>(cfg.frame_len - cfg.hop_len);
  dsp::Waveform padded;
  padded.sample_rate_hz = audio.sample_rate_hz;
  padded.samples.assign(pad / 2, 0.0);
  padded.samples.insert(padded.samples.end(), audio.samples.begin(), audio.samples.end());
  padded.samples.resize(padded.samples.size() + pad - pad / 2, 0.0);
  const Matrix mfcc = dsp::Mfcc(padded, cfg);
  const std::size_t needed = factor * video_frames;
  if (static_cast<std::size_t>(mfcc.rows()) < needed) {
    throw std::invalid_argument("video_rate_mfcc: audio too short for " + std::to_string(video_frames) +
                                " video frames");
  }
  return model::AlignRates(mfcc.topRows(static_cast<Eigen::Index>(needed)), video_frames);
}

dsp::Waveform FeaturesToWaveform(const Matrix& video_rate_mfcc, const dsp::AudioConfig& cfg,
                                 int video_fps, std::uint64_t phase_seed) {
  const std::size_t factor = RateFactor(cfg, video_fps);
  const Matrix audio_rate = model::RepeatRows(video_rate_mfcc, factor);
  const auto spec = dsp::InvertMfcc(audio_rate, cfg);
  dsp::Waveform w = dsp::GriffinLim(spec, cfg, cfg.griffin_lim_iters, phase_seed);
  const auto pad = static_cast<std::size_t>(cfg.frame_len - cfg.hop_len) / 2;
  const std::size_t length = static_cast<std::size_t>(video_rate_mfcc.rows()) *
                             static_cast<std::size_t>(cfg.sample_rate_hz / video_fps);
  std::vector<double> trimmed(w.samples.begin() + static_cast<std::ptrdiff_t>(pad),
                              w.samples.begin() + static_cast<std::ptrdiff_t>(pad + length));
  dsp::PeakNormalize(trimmed);
  return dsp::Waveform{std::move(trimmed), cfg.sample_rate_hz};
}

dsp::Waveform PredictSpeech(const Matrix& frames, const model::Model& model,
                            const dsp::AudioConfig& audio, const InferenceConfig& cfg) {
  if (frames.rows() == 0) throw std::invalid_argument("predict_speech: no frames");
  const Matrix features = PredictFeatures(frames, model, cfg);
  return FeaturesToWaveform(features, audio, cfg.video_fps, cfg.seed);
}

}  // namespace l2s::inference
