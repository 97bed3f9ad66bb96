#pragma once

// Synthetic paired sequences: each symbol has a visual prototype (the frame
// features shown while it is "spoken") and a harmonic audio recipe. Clips are
// aligned by construction, frames_per_symbol video frames per symbol.

#include <cstdint>
#include <string>
#include <vector>

#include "l2s/dsp.hpp"
#include "l2s/matrix.hpp"

namespace l2s::datagen {

struct DataConfig {
  int num_symbols = 8;
  int frame_dim = 16;
  int frames_per_symbol = 4;
  int fps = 25;
  int symbols_per_clip = 6;
  int sample_rate_hz = 16000;
  double frame_jitter = 0.05;
  double crossfade_ms = 5.0;
  std::uint64_t alphabet_seed = 7;

  void Validate() const;
  int samples_per_frame() const { return sample_rate_hz / fps; }
  int frames_per_clip() const { return frames_per_symbol * symbols_per_clip; }
  bool operator==(const DataConfig&) const = default;
};

// Fundamental plus two formant-like partials; amplitudes relative to `level`.
struct AudioRecipe {
  double f0_hz = 0.0;
  double f1_hz = 0.0;
  double f2_hz = 0.0;
  double level = 0.0;
};

struct SymbolAlphabet {
  Matrix prototypes;  // K x frame_dim
  std::vector<AudioRecipe> recipes;

  std::size_t size() const { return recipes.size(); }
  // Index of the prototype closest to `frame` in L2.
  int NearestPrototype(const Eigen::Ref<const Eigen::RowVectorXd>& frame) const;
};

SymbolAlphabet MakeAlphabet(const DataConfig& cfg);

struct Clip {
  Matrix frames;  // (symbols * frames_per_symbol) x frame_dim
  dsp::Waveform audio;
  std::vector<int> symbols;
};

Clip GenClip(const SymbolAlphabet& alphabet, const DataConfig& cfg, int length_symbols,
             std::uint64_t seed);

// Audio for a given symbol sequence (deterministic; no randomness involved).
dsp::Waveform RenderAudio(const SymbolAlphabet& alphabet, const DataConfig& cfg,
                          const std::vector<int>& symbols);

struct ManifestEntry {
  std::string id;
  std::string frames_path;
  std::string wav_path;
  std::vector<int> symbols;
  std::uint64_t seed = 0;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetPlan {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> val;
  std::vector<ManifestEntry> test;
};

// Assigns clip ids, per-clip seeds, relative file paths and disjoint splits,
// and draws each clip's symbol sequence.
DatasetPlan PlanDataset(const SymbolAlphabet& alphabet, const DataConfig& cfg, int n_clips,
                        const SplitFractions& fractions, std::uint64_t seed);

// Regenerates the clip an entry describes.
Clip RealizeClip(const SymbolAlphabet& alphabet, const DataConfig& cfg, const ManifestEntry& entry);

std::string SymbolsToString(const std::vector<int>& symbols);
std::vector<int> SymbolsFromString(const std::string& text);

}  // namespace l2s::datagen
