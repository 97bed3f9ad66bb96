#include "l2s/pipeline.hpp"

#include <filesystem>
#include <stdexcept>

#include "l2s/inference.hpp"
#include "l2s/io.hpp"
#include "l2s/metrics.hpp"
#include "l2s/rng.hpp"

namespace l2s::pipeline {
namespace {

namespace fs = std::filesystem;

constexpr const char* kSplitFiles[] = {"train.txt", "val.txt", "test.txt"};

std::vector<PreparedClip> Realize(const std::vector<datagen::ManifestEntry>& entries,
                                  const datagen::SymbolAlphabet& alphabet, const RunConfig& cfg) {
  std::vector<PreparedClip> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    auto c = datagen::RealizeClip(alphabet, cfg.data, e);
    out.push_back(Prepare(e.id, std::move(c.frames), std::move(c.audio), std::move(c.symbols), cfg));
  }
  return out;
}

void Summarize(EvalScores& s) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < s.stoi.size(); ++i) {
    a += s.stoi[i];
    b += s.estoi[i];
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, s.stoi.size()));
  s.mean_stoi = a / n;
  s.mean_estoi = b / n;
}

}  // namespace

PreparedClip Prepare(std::string id, Matrix frames, dsp::Waveform audio, std::vector<int> symbols,
                     const RunConfig& cfg) {
  if (frames.cols() != cfg.model.frame_dim) {
    throw std::invalid_argument("clip " + id + ": frames have " + std::to_string(frames.cols()) +
                                " columns, model expects " + std::to_string(cfg.model.frame_dim));
  }
  if (audio.sample_rate_hz != cfg.audio.sample_rate_hz) {
    throw std::invalid_argument("clip " + id + ": audio is at " + std::to_string(audio.sample_rate_hz) +
                                " Hz, config expects " + std::to_string(cfg.audio.sample_rate_hz));
  }
  PreparedClip c;
  c.mfcc = inference::VideoRateMfcc(audio, cfg.audio, cfg.inference.video_fps,
                                    static_cast<std::size_t>(frames.rows()));
  c.id = std::move(id);
  c.frames = std::move(frames);
  c.audio = std::move(audio);
  c.symbols = std::move(symbols);
  return c;
}

Dataset GenerateDataset(const RunConfig& cfg) {
  cfg.Validate();
  const auto alphabet = datagen::MakeAlphabet(cfg.data);
  const auto plan = datagen::PlanDataset(alphabet, cfg.data, cfg.num_clips, cfg.split, cfg.data_seed);
  return {Realize(plan.train, alphabet, cfg), Realize(plan.val, alphabet, cfg),
          Realize(plan.test, alphabet, cfg)};
}

void WriteDataset(const std::string& dir, const RunConfig& cfg) {
  cfg.Validate();
  const auto alphabet = datagen::MakeAlphabet(cfg.data);
  const auto plan = datagen::PlanDataset(alphabet, cfg.data, cfg.num_clips, cfg.split, cfg.data_seed);
  fs::create_directories(fs::path(dir) / "clips");
  const std::vector<datagen::ManifestEntry>* splits[] = {&plan.train, &plan.val, &plan.test};
  for (int s = 0; s < 3; ++s) {
    for (const auto& e : *splits[s]) {
      const auto clip = datagen::RealizeClip(alphabet, cfg.data, e);
      io::WriteFeatureMatrix((fs::path(dir) / e.frames_path).string(), clip.frames);
      io::WriteWav((fs::path(dir) / e.wav_path).string(), clip.audio);
    }
    io::WriteManifest((fs::path(dir) / kSplitFiles[s]).string(), *splits[s]);
  }
  SaveConfig((fs::path(dir) / "config.json").string(), cfg);
}

Dataset LoadDataset(const std::string& dir, const RunConfig& cfg) {
  Dataset d;
  std::vector<PreparedClip>* splits[] = {&d.train, &d.val, &d.test};
  for (int s = 0; s < 3; ++s) {
    const auto path = fs::path(dir) / kSplitFiles[s];
    if (!fs::exists(path)) throw std::runtime_error("dataset: missing " + path.string());
    for (const auto& e : io::ReadManifest(path.string())) {
      Matrix frames = io::ReadFeatureMatrix((fs::path(dir) / e.frames_path).string());
      dsp::Waveform audio = io::ReadWav((fs::path(dir) / e.wav_path).string());
      splits[s]->push_back(Prepare(e.id, std::move(frames), std::move(audio), e.symbols, cfg));
    }
  }
  if (d.train.empty()) throw std::runtime_error("dataset: " + dir + " has no training clips");
  return d;
}

model::FeatureStats FitStats(const std::vector<PreparedClip>& clips) {
  std::vector<Matrix> seqs;
  seqs.reserve(clips.size());
  for (const auto& c : clips) seqs.push_back(c.mfcc);
  return model::FeatureStats::Fit(seqs);
}

std::vector<training::TrainingClip> TrainingClips(const std::vector<PreparedClip>& clips,
                                                  const model::FeatureStats& stats) {
  std::vector<training::TrainingClip> out;
  out.reserve(clips.size());
  for (const auto& c : clips) out.push_back({c.frames, stats.Standardize(c.mfcc)});
  return out;
}

EvalScores Evaluate(const model::Model& model, const std::vector<PreparedClip>& clips,
                    const RunConfig& cfg, FrameControl control, std::uint64_t control_seed) {
  EvalScores s;
  Rng rng(control_seed);
  for (const auto& c : clips) {
    Matrix frames = c.frames;
    if (control == FrameControl::kShuffled) {
      for (Eigen::Index i = frames.rows(); i > 1; --i) {
        const auto j = static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(i)));
        frames.row(i - 1).swap(frames.row(j));
      }
    }
    const auto pred = inference::PredictSpeech(frames, model, cfg.audio, cfg.inference);
    s.stoi.push_back(metrics::Stoi(c.audio, pred));
    s.estoi.push_back(metrics::Estoi(c.audio, pred));
  }
  Summarize(s);
  return s;
}

EvalScores EvaluateResynthesis(const std::vector<PreparedClip>& clips, const RunConfig& cfg) {
  EvalScores s;
  for (const auto& c : clips) {
    const auto w = inference::FeaturesToWaveform(c.mfcc, cfg.audio, cfg.inference.video_fps, cfg.inference.seed);
    s.stoi.push_back(metrics::Stoi(c.audio, w));
    s.estoi.push_back(metrics::Estoi(c.audio, w));
  }
  Summarize(s);
  return s;
}

}  // namespace l2s::pipeline
