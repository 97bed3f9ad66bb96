// Command-line front end: dataset generation, feature extraction, training,
// synthesis, evaluation and loss plots.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "l2s/checkpoint.hpp"
#include "l2s/config.hpp"
#include "l2s/inference.hpp"
#include "l2s/io.hpp"
#include "l2s/metrics.hpp"
#include "l2s/pipeline.hpp"
#include "l2s/report.hpp"
#include "l2s/training.hpp"

namespace fs = std::filesystem;

namespace {

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("no such file: " + path);
}

l2s::RunConfig ConfigOrDefault(const std::string& path) {
  if (path.empty()) return l2s::RunConfig{};
  RequireFile(path);
  return l2s::LoadConfig(path);
}

int GenData(const std::string& out, int clips, std::uint64_t seed, const std::string& cfg_path) {
  auto cfg = ConfigOrDefault(cfg_path);
  if (clips > 0) cfg.num_clips = clips;
  cfg.data_seed = seed;
  l2s::pipeline::WriteDataset(out, cfg);
  std::cout << "wrote " << cfg.num_clips << " clips to " << out << "\n";
  return 0;
}

int Extract(const std::string& wav, const std::string& out, const std::string& cfg_path, int video_frames) {
  RequireFile(wav);
  const auto cfg = ConfigOrDefault(cfg_path);
  const auto w = l2s::io::ReadWav(wav);
  if (w.sample_rate_hz != cfg.audio.sample_rate_hz) {
    throw std::runtime_error(wav + " is at " + std::to_string(w.sample_rate_hz) + " Hz; config expects " +
                             std::to_string(cfg.audio.sample_rate_hz));
  }
  const l2s::Matrix m =
      video_frames > 0
          ? l2s::inference::VideoRateMfcc(w, cfg.audio, cfg.inference.video_fps,
                                          static_cast<std::size_t>(video_frames))
          : l2s::dsp::Mfcc(w, cfg.audio);
  l2s::io::WriteFeatureMatrix(out, m);
  std::cout << "wrote " << m.rows() << " x " << m.cols() << " MFCC to " << out << "\n";
  return 0;
}

int Train(const std::string& data, const std::string& out, const std::string& cfg_path, bool resume,
          int steps_override) {
  l2s::RunConfig cfg;
  std::optional<l2s::io::Checkpoint> previous;
  if (resume) {
    RequireFile(out);
    previous = l2s::io::LoadCheckpoint(out);
    cfg = previous->config;
  } else if (!cfg_path.empty()) {
    cfg = ConfigOrDefault(cfg_path);
  } else if (fs::exists(fs::path(data) / "config.json")) {
    cfg = l2s::LoadConfig((fs::path(data) / "config.json").string());
  }
  if (steps_override >= 0) cfg.train.steps = steps_override;
  cfg.Validate();

  const auto dataset = l2s::pipeline::LoadDataset(data, cfg);
  l2s::model::Model model = previous ? l2s::io::RestoreModel(*previous)
                                     : l2s::model::Model(cfg.model, cfg.train.seed);
  if (!previous) model.stats() = l2s::pipeline::FitStats(dataset.train);
  l2s::training::Trainer trainer(model, l2s::pipeline::TrainingClips(dataset.train, model.stats()),
                                 cfg.train);
  if (previous) l2s::io::RestoreTrainer(*previous, trainer);

  const std::string csv_path = out + ".losses.csv";
  std::ofstream csv(csv_path, resume ? std::ios::app : std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  if (!resume) l2s::io::WriteLossHeader(csv);

  std::cout << "training on " << dataset.train.size() << " clips, steps " << trainer.step() << ".."
            << cfg.train.steps << "\n";
  auto on_step = [&](const l2s::training::StepRecord& r) {
    l2s::io::WriteLossRow(csv, r);
    if (r.step % 50 == 0 || r.step + 1 == cfg.train.steps) {
      std::cout << "step " << std::setw(5) << r.step << "  joint " << std::setprecision(5) << r.losses.joint
                << "  rec " << r.losses.rec << "  kl " << r.losses.kl << "  sync " << r.losses.met << "\n"
                << std::flush;
    }
  };
  auto on_checkpoint = [&](const l2s::training::Trainer& t) {
    csv.flush();
    l2s::io::SaveCheckpoint(out, l2s::io::Capture(cfg, model, &t));
  };
  l2s::training::Train(trainer, on_step, on_checkpoint);
  std::cout << "saved " << out << "\n";
  return 0;
}

int Synth(const std::string& ckpt_path, const std::string& frames_path, const std::string& out,
          bool stochastic, std::optional<std::uint64_t> seed) {
  RequireFile(ckpt_path);
  RequireFile(frames_path);
  const auto ckpt = l2s::io::LoadCheckpoint(ckpt_path);
  const auto model = l2s::io::RestoreModel(ckpt);
  auto icfg = ckpt.config.inference;
  if (stochastic) icfg.mode = l2s::inference::LatentMode::kSample;
  if (seed) icfg.seed = *seed;
  const l2s::Matrix frames = l2s::io::ReadFeatureMatrix(frames_path);
  const auto w = l2s::inference::PredictSpeech(frames, model, ckpt.config.audio, icfg);
  l2s::io::WriteWav(out, w);
  std::cout << "wrote " << w.size() << " samples to " << out << "\n";
  return 0;
}

int Eval(const std::string& manifest, const std::string& out) {
  RequireFile(manifest);
  const auto pairs = l2s::io::ReadEvalManifest(manifest);
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  csv << "id,stoi,estoi\n" << std::setprecision(10);
  for (const auto& p : pairs) {
    const auto clean = l2s::io::ReadWav(p.clean_path);
    const auto degraded = l2s::io::ReadWav(p.degraded_path);
    csv << p.id << ',' << l2s::metrics::Stoi(clean, degraded) << ',' << l2s::metrics::Estoi(clean, degraded)
        << '\n';
  }
  std::cout << "scored " << pairs.size() << " pairs into " << out << "\n";
  return 0;
}

int Report(const std::string& losses, const std::string& out) {
  RequireFile(losses);
  const auto history = l2s::io::ReadLossCsv(losses);
  std::ofstream svg(out);
  if (!svg) throw std::runtime_error("cannot write " + out);
  svg << l2s::io::LossCurveSvg(history);
  std::cout << "plotted " << history.size() << " steps into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-specific lip-to-speech: data, training, synthesis and evaluation"};
  app.require_subcommand(1);

  std::string out, cfg_path, data, wav, ckpt, frames, manifest, losses;
  int clips = 0, video_frames = 0, steps = -1;
  std::uint64_t seed = 1;
  bool resume = false, stochastic = false;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic paired dataset");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--clips", clips, "Number of clips (default from config)");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--cfg", cfg_path, "JSON config");

  auto* extract = app.add_subcommand("extract", "Compute MFCC features of a WAV file");
  extract->add_option("--wav", wav, "Input WAV (PCM16 mono)")->required();
  extract->add_option("--out", out, "Output FTF1 file")->required();
  extract->add_option("--cfg", cfg_path, "JSON config");
  extract->add_option("--video-frames", video_frames, "Average to this many video-rate frames");

  auto* train = app.add_subcommand("train", "Train a model on a generated dataset");
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--out", out, "Checkpoint path")->required();
  train->add_option("--cfg", cfg_path, "JSON config (default: DATA/config.json)");
  train->add_option("--steps", steps, "Override train.steps");
  train->add_flag("--resume", resume, "Continue from the checkpoint at --out");

  auto* synth = app.add_subcommand("synth", "Predict speech from frame features");
  synth->add_option("--ckpt", ckpt, "Checkpoint")->required();
  synth->add_option("--frames", frames, "FTF1 frame features (T x frame_dim)")->required();
  synth->add_option("--out", out, "Output WAV")->required();
  synth->add_flag("--stochastic", stochastic, "Sample latents instead of using the mean");
  auto* synth_seed = synth->add_option("--seed", seed, "Sampling and phase seed");

  auto* eval = app.add_subcommand("eval", "STOI/ESTOI for (clean, degraded) WAV pairs");
  eval->add_option("--manifest", manifest, "CSV manifest")->required();
  eval->add_option("--out", out, "Report CSV")->required();

  auto* report = app.add_subcommand("report", "Plot a loss CSV as SVG");
  report->add_option("--losses", losses, "Loss CSV written by train")->required();
  report->add_option("--out", out, "Output SVG")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return GenData(out, clips, seed, cfg_path);
    if (extract->parsed()) return Extract(wav, out, cfg_path, video_frames);
    if (train->parsed()) return Train(data, out, cfg_path, resume, steps);
    if (synth->parsed()) {
      return Synth(ckpt, frames, out, stochastic,
                   synth_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
    if (eval->parsed()) return Eval(manifest, out);
    if (report->parsed()) return Report(losses, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
