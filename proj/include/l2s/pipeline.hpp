#pragma once

// Glue between datasets, training and evaluation, shared by the CLI, the
// acceptance suite and the Python module.

#include <cstdint>
#include <string>
#include <vector>

#include "l2s/config.hpp"
#include "l2s/datagen.hpp"
#include "l2s/model.hpp"
#include "l2s/training.hpp"

namespace l2s::pipeline {

struct PreparedClip {
  std::string id;
  Matrix frames;         // T x frame_dim
  dsp::Waveform audio;
  Matrix mfcc;           // T x n_mfcc, raw (unstandardized) at video rate
  std::vector<int> symbols;
};

struct Dataset {
  std::vector<PreparedClip> train;
  std::vector<PreparedClip> val;
  std::vector<PreparedClip> test;
};

PreparedClip Prepare(std::string id, Matrix frames, dsp::Waveform audio, std::vector<int> symbols,
                     const RunConfig& cfg);

// Generates the configured synthetic dataset in memory.
Dataset GenerateDataset(const RunConfig& cfg);

// Writes clips (FTF1 frames, WAV audio), train/val/test manifests and the
// effective config.json under `dir`.
void WriteDataset(const std::string& dir, const RunConfig& cfg);

// Reads a directory produced by WriteDataset. Audio passes through 16-bit
// PCM on disk, so features differ slightly from GenerateDataset's.
Dataset LoadDataset(const std::string& dir, const RunConfig& cfg);

model::FeatureStats FitStats(const std::vector<PreparedClip>& clips);
std::vector<training::TrainingClip> TrainingClips(const std::vector<PreparedClip>& clips,
                                                  const model::FeatureStats& stats);

enum class FrameControl {
  kNone,
  kShuffled,  // frame rows permuted within each clip (fixed seed)
};

struct EvalScores {
  std::vector<double> stoi;
  std::vector<double> estoi;
  double mean_stoi = 0.0;
  double mean_estoi = 0.0;
};

// Synthesizes each clip from its frames and scores it against the clip's audio.
EvalScores Evaluate(const model::Model& model, const std::vector<PreparedClip>& clips,
                    const RunConfig& cfg, FrameControl control = FrameControl::kNone,
                    std::uint64_t control_seed = 0);

// Scores resynthesis from the true features: the ceiling the vocoder path allows.
EvalScores EvaluateResynthesis(const std::vector<PreparedClip>& clips, const RunConfig& cfg);

}  // namespace l2s::pipeline
