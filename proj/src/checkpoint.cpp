#include "l2s/checkpoint.hpp"

#include <filesystem>

#include "byte_io.hpp"
#include "l2s/io.hpp"

namespace l2s::io {
namespace {

const std::string kMagic("L2SCKPT\0", 8);

}  // namespace

Checkpoint Capture(const RunConfig& cfg, const model::Model& model, const training::Trainer* trainer) {
  Checkpoint c;
  c.config = cfg;
  c.params = model.params().Clone();
  c.stats = model.stats();
  if (trainer) {
    c.opt = trainer->opt_state();
    c.rng_state = trainer->rng().SaveState();
  } else {
    c.opt = training::OptState::ZerosLike(c.params);
  }
  return c;
}

model::Model RestoreModel(const Checkpoint& ckpt) {
  return model::Model(ckpt.config.model, ckpt.params.Clone(), ckpt.stats);
}

void RestoreTrainer(const Checkpoint& ckpt, training::Trainer& trainer) {
  trainer.opt_state() = ckpt.opt;
  if (!ckpt.rng_state.empty()) trainer.rng().LoadState(ckpt.rng_state);
}

std::vector<std::uint8_t> EncodeCheckpoint(const Checkpoint& ckpt) {
  detail::ByteWriter out;
  out.Raw(kMagic);
  out.U32(kCheckpointVersion);
  out.Str(ConfigToJson(ckpt.config));
  out.U64(static_cast<std::uint64_t>(ckpt.opt.step));
  out.Str(ckpt.rng_state);
  if (ckpt.stats.mean.size() != ckpt.stats.scale.size()) {
    throw std::invalid_argument("checkpoint: feature stats mean/scale sizes differ");
  }
  out.U64(ckpt.stats.mean.size());
  for (double v : ckpt.stats.mean) out.F64(v);
  for (double v : ckpt.stats.scale) out.F64(v);
  out.U64(ckpt.params.size());
  for (const auto& [name, t] : ckpt.params.entries()) {
    out.Str(name);
    out.U32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) out.U64(d);
    const auto values = t.data();
    auto moment = [&](const std::map<std::string, std::vector<double>>& m) {
      auto it = m.find(name);
      if (it == m.end() || it->second.size() != values.size()) {
        throw std::invalid_argument("checkpoint: optimizer state missing for '" + name + "'");
      }
      for (double v : it->second) out.F64(v);
    };
    for (double v : values) out.F64(v);
    moment(ckpt.opt.first_moment);
    moment(ckpt.opt.second_moment);
  }
  return std::move(out.bytes());
}

Checkpoint DecodeCheckpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "checkpoint");
  if (bytes.size() < kMagic.size() || in.Raw(kMagic.size()) != kMagic) in.Fail("bad magic");
  const std::uint32_t version = in.U32();
  if (version != kCheckpointVersion) in.Fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  try {
    c.config = ConfigFromJson(in.Str());
  } catch (const std::invalid_argument& e) {
    in.Fail(std::string("embedded config: ") + e.what());
  }
  c.opt.step = static_cast<std::int64_t>(in.U64());
  c.rng_state = in.Str();
  const std::size_t n_stats = in.Count(16);
  c.stats.mean.resize(n_stats);
  c.stats.scale.resize(n_stats);
  for (double& v : c.stats.mean) v = in.F64();
  for (double& v : c.stats.scale) v = in.F64();
  const std::size_t n_tensors = in.Count(1);
  for (std::size_t i = 0; i < n_tensors; ++i) {
    const std::string name = in.Str();
    const std::uint32_t rank = in.U32();
    nc::Shape shape;
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(static_cast<std::size_t>(in.U64()));
      count *= shape.back();
      if (count > in.remaining()) in.Fail("tensor '" + name + "' exceeds file size");
    }
    if (count * 24 > in.remaining()) in.Fail("tensor '" + name + "' truncated");
    std::vector<double> values(count), m(count), v(count);
    for (double& x : values) x = in.F64();
    for (double& x : m) x = in.F64();
    for (double& x : v) x = in.F64();
    if (c.params.Has(name)) in.Fail("duplicate tensor '" + name + "'");
    c.params.Add(name, shape, std::move(values));
    c.opt.first_moment[name] = std::move(m);
    c.opt.second_moment[name] = std::move(v);
  }
  if (in.remaining() != 0) in.Fail("trailing bytes");
  return c;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  // Write-then-rename so an interrupted save never leaves a torn file.
  const std::string tmp = path + ".tmp";
  WriteBytes(tmp, EncodeCheckpoint(ckpt));
  std::filesystem::rename(tmp, path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  try {
    return DecodeCheckpoint(ReadBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

bool SameCheckpoint(const Checkpoint& a, const Checkpoint& b) {
  return EncodeCheckpoint(a) == EncodeCheckpoint(b);
}

}  // namespace l2s::io
