#pragma once

// The complete set of hyperparameters for a run. Every field has a default;
// a JSON config file only needs the keys it changes, and unknown keys are
// rejected so typos do not silently fall back to defaults.
//
// Schema (all sections optional):
//   audio:     sample_rate_hz frame_len hop_len n_fft n_mels n_mfcc fmin_hz
//              fmax_hz log_floor griffin_lim_iters
//   data:      num_symbols frame_dim frames_per_symbol fps symbols_per_clip
//              sample_rate_hz frame_jitter crossfade_ms alphabet_seed
//              num_clips seed split {train val test}
//   model:     frame_dim n_mfcc d_z n_layers n_heads d_model d_ff
//              dropout_rate max_len
//   train:     lr beta1 beta2 eps batch_size steps seed margin metric_weight
//              kl_warmup_frac clip_norm negatives prev_frame_dropout
//              checkpoint_every
//   inference: window_len overlap video_fps mode ("mean"|"sample") seed

#include <cstdint>
#include <string>

#include "l2s/datagen.hpp"
#include "l2s/dsp.hpp"
#include "l2s/inference.hpp"
#include "l2s/model.hpp"
#include "l2s/training.hpp"

namespace l2s {

struct RunConfig {
  dsp::AudioConfig audio;
  datagen::DataConfig data;
  int num_clips = 500;
  std::uint64_t data_seed = 1;
  datagen::SplitFractions split;
  model::ModelConfig model;
  training::TrainConfig train;
  inference::InferenceConfig inference;

  // Cross-section consistency (feature widths, rates) plus each section's own checks.
  void Validate() const;
};

std::string ConfigToJson(const RunConfig& cfg);
// Throws std::invalid_argument on malformed JSON, wrong types or unknown keys.
RunConfig ConfigFromJson(const std::string& text);

RunConfig LoadConfig(const std::string& path);
void SaveConfig(const std::string& path, const RunConfig& cfg);

}  // namespace l2s
