#pragma once

// Binary checkpoints: everything needed to resume training or to run
// inference, stored so that loading reproduces every double bit for bit.
//
// Layout (little-endian): "L2SCKPT\0", u32 version, str config_json,
// u64 step, str rng_state, stats (u64 n, n f64 mean, n f64 scale),
// u64 tensor count, then per tensor: str name, u32 rank, rank u64 dims,
// f64 values, f64 first moment, f64 second moment. Strings are a u64 length
// followed by raw bytes.

#include <cstdint>
#include <string>
#include <vector>

#include "l2s/config.hpp"
#include "l2s/model.hpp"
#include "l2s/training.hpp"

namespace l2s::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  nc::ParamSet params;
  model::FeatureStats stats;
  training::OptState opt;
  std::string rng_state;  // empty for an untrained model
};

// Snapshot of a model, and of the trainer driving it when one is given.
Checkpoint Capture(const RunConfig& cfg, const model::Model& model,
                   const training::Trainer* trainer = nullptr);

// A model that owns a copy of the checkpoint's parameters.
model::Model RestoreModel(const Checkpoint& ckpt);

// Moves optimizer moments, step and RNG state into `trainer`.
void RestoreTrainer(const Checkpoint& ckpt, training::Trainer& trainer);

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes);

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);

// Byte-level equality of the encoded form.
bool SameCheckpoint(const Checkpoint& a, const Checkpoint& b);

}  // namespace l2s::io
