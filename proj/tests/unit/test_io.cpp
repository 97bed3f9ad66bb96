#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "l2s/checkpoint.hpp"
#include "l2s/config.hpp"
#include "l2s/io.hpp"
#include "l2s/report.hpp"

namespace fs = std::filesystem;
namespace io = l2s::io;
namespace dsp = l2s::dsp;
using l2s::Matrix;
using l2s::Rng;

namespace {

// Fresh directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(fs::current_path().string())) ^
            static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)));
    path = fs::temp_directory_path() / ("l2s_io_" + std::to_string(rng.NextU64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void PutU16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v & 0xff);
  b[at + 1] = static_cast<std::uint8_t>(v >> 8);
}

l2s::RunConfig TinyRun() {
  l2s::RunConfig c;
  c.data.frame_dim = 4;
  c.model.frame_dim = 4;
  c.model.d_z = 4;
  c.model.transformer.n_layers = 1;
  c.model.transformer.n_heads = 2;
  c.model.transformer.d_model = 8;
  c.model.transformer.d_ff = 8;
  c.train.steps = 6;
  c.train.batch_size = 2;
  return c;
}

std::vector<l2s::training::TrainingClip> Clips() {
  Rng rng(3);
  std::vector<l2s::training::TrainingClip> out;
  for (int i = 0; i < 3; ++i) {
    out.push_back({Matrix::NullaryExpr(8, 4, [&] { return rng.Normal(); }),
                   Matrix::NullaryExpr(8, 13, [&] { return rng.Normal(); })});
  }
  return out;
}

}  // namespace

TEST_CASE("wav round trip is within one quantization step") {
  Rng rng(1);
  dsp::Waveform w;
  w.samples.resize(1001);
  for (auto& s : w.samples) s = std::clamp(0.4 * rng.Normal(), -1.0, 1.0);
  w.samples[0] = 1.5;   // saturates
  w.samples[1] = -1.0;  // exactly representable
  const auto back = io::DecodeWav(io::EncodeWav(w));
  REQUIRE(back.size() == w.size());
  CHECK(back.sample_rate_hz == 16000);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0);
  for (std::size_t i = 2; i < w.size(); ++i) {
    const double want = std::min(w.samples[i], 32767.0 / 32768.0);  // +1.0 saturates
    CHECK(std::abs(back.samples[i] - want) <= 0.5 / 32768.0 + 1e-15);
  }

  TempDir dir;
  io::WriteWav(dir / "one.wav", dsp::Waveform{{0.25}, 8000});
  const auto one = io::ReadWav(dir / "one.wav");
  CHECK(one.size() == 1);
  CHECK(one.sample_rate_hz == 8000);
  CHECK(one.samples[0] == 0.25);
}

TEST_CASE("unsupported or damaged wav content is rejected") {
  const auto good = io::EncodeWav(dsp::Waveform{std::vector<double>(10, 0.1), 16000});
  auto stereo = good;
  PutU16(stereo, 22, 2);
  CHECK_THROWS_WITH_AS(io::DecodeWav(stereo), doctest::Contains("mono"), io::FormatError);
  auto eight_bit = good;
  PutU16(eight_bit, 34, 8);
  CHECK_THROWS_AS(io::DecodeWav(eight_bit), io::FormatError);
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::DecodeWav(bad_magic), io::FormatError);
  const std::vector<std::uint8_t> truncated(good.begin(), good.end() - 3);
  CHECK_THROWS_AS(io::DecodeWav(truncated), io::FormatError);
  CHECK_THROWS(io::ReadWav("/nonexistent/dir/file.wav"));
}

TEST_CASE("feature files round trip through float32") {
  Matrix m(3, 2);
  m << 0.5, -1.25, 3.0, 1e-3, 7.0, -0.1;
  TempDir dir;
  io::WriteFeatureMatrix(dir / "f.ftf", m);
  const Matrix back = io::ReadFeatureMatrix(dir / "f.ftf");
  REQUIRE(back.rows() == 3);
  REQUIRE(back.cols() == 2);
  for (Eigen::Index i = 0; i < m.size(); ++i) CHECK(back.data()[i] == static_cast<double>(static_cast<float>(m.data()[i])));

  io::FeatureFile f{{2, 2, 2}, std::vector<float>(8, 1.5f)};
  const auto bytes = io::EncodeFeatures(f);
  CHECK(bytes.size() == 4 + 4 + 12 + 32);
  CHECK(std::memcmp(bytes.data(), "FTF1", 4) == 0);
  const auto g = io::DecodeFeatures(bytes);
  CHECK(g.dims == f.dims);
  CHECK(g.values == f.values);
  auto short_payload = bytes;
  short_payload.pop_back();
  CHECK_THROWS_AS(io::DecodeFeatures(short_payload), io::FormatError);
  CHECK_THROWS_AS(io::EncodeFeatures({{2, 3}, std::vector<float>(5)}), std::invalid_argument);
}

TEST_CASE("config JSON round trip, partial files and unknown keys") {
  auto cfg = TinyRun();
  cfg.train.lr = 1.2345678901234567e-4;
  cfg.inference.mode = l2s::inference::LatentMode::kSample;
  const auto back = l2s::ConfigFromJson(l2s::ConfigToJson(cfg));
  CHECK(l2s::ConfigToJson(back) == l2s::ConfigToJson(cfg));
  CHECK(back.train.lr == cfg.train.lr);
  CHECK(back.inference.mode == l2s::inference::LatentMode::kSample);

  const auto partial = l2s::ConfigFromJson(R"({"train": {"steps": 7}})");
  CHECK(partial.train.steps == 7);
  CHECK(partial.train.lr == l2s::training::TrainConfig{}.lr);
  CHECK_THROWS_WITH_AS(l2s::ConfigFromJson(R"({"train": {"stepz": 7}})"), doctest::Contains("stepz"),
                       std::invalid_argument);
  CHECK_THROWS_AS(l2s::ConfigFromJson(R"({"train": {"steps": "many"}})"), std::invalid_argument);
  CHECK_THROWS_AS(l2s::ConfigFromJson("{"), std::invalid_argument);
  CHECK_THROWS_AS(l2s::ConfigFromJson(R"({"inference": {"mode": "median"}})"), std::invalid_argument);
  // Cross-section consistency: the model must consume the generated frames.
  CHECK_THROWS_AS(l2s::ConfigFromJson(R"({"model": {"frame_dim": 5}})"), std::invalid_argument);

  TempDir dir;
  l2s::SaveConfig(dir / "c.json", cfg);
  CHECK(l2s::ConfigToJson(l2s::LoadConfig(dir / "c.json")) == l2s::ConfigToJson(cfg));
}

TEST_CASE("checkpoints round trip bit for bit and resume training exactly") {
  const auto cfg = TinyRun();
  l2s::model::Model m(cfg.model, 11);
  l2s::training::Trainer t(m, Clips(), cfg.train);
  for (int i = 0; i < 3; ++i) t.Step();
  const auto ck = io::Capture(cfg, m, &t);
  const auto bytes = io::EncodeCheckpoint(ck);
  const auto back = io::DecodeCheckpoint(bytes);
  CHECK(io::EncodeCheckpoint(back) == bytes);
  CHECK(io::SameCheckpoint(ck, back));
  CHECK(back.params.SameValues(m.params()));
  CHECK(back.opt == t.opt_state());
  CHECK(back.rng_state == t.rng().SaveState());

  TempDir dir;
  io::SaveCheckpoint(dir / "a.ckpt", ck);
  CHECK(io::ReadBytes(dir / "a.ckpt") == bytes);
  CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

  // Continue the original; separately restore and continue the copy.
  const auto loaded = io::LoadCheckpoint(dir / "a.ckpt");
  auto restored = io::RestoreModel(loaded);
  l2s::training::Trainer t2(restored, Clips(), loaded.config.train);
  io::RestoreTrainer(loaded, t2);
  CHECK(t2.step() == 3);
  for (int i = 0; i < 3; ++i) CHECK(t.Step().joint == t2.Step().joint);
  CHECK(restored.params().SameValues(m.params()));

  auto corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(io::DecodeCheckpoint(corrupt), io::FormatError);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
  CHECK_THROWS_AS(io::DecodeCheckpoint(cut), io::FormatError);

  const auto untrained = io::Capture(cfg, l2s::model::Model(cfg.model, 12));
  CHECK(untrained.rng_state.empty());
  CHECK(io::DecodeCheckpoint(io::EncodeCheckpoint(untrained)).params.SameValues(untrained.params));
}

TEST_CASE("dataset manifests round trip") {
  std::vector<l2s::datagen::ManifestEntry> entries = {
      {"clip_00000", "clips/clip_00000.ftf", "clips/clip_00000.wav", {1, 2, 3}, 99},
      {"clip_00001", "clips/clip_00001.ftf", "clips/clip_00001.wav", {0}, 5}};
  TempDir dir;
  io::WriteManifest(dir / "m.txt", entries);
  const auto back = io::ReadManifest(dir / "m.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "clip_00000");
  CHECK(back[0].wav_path == "clips/clip_00000.wav");
  CHECK(back[0].symbols == std::vector<int>{1, 2, 3});
  CHECK(back[1].seed == 0);
}

TEST_CASE("loss CSV keeps full precision") {
  std::vector<l2s::training::StepRecord> h(3);
  for (int i = 0; i < 3; ++i) {
    h[static_cast<std::size_t>(i)].step = i;
    h[static_cast<std::size_t>(i)].losses = {0.1 / (i + 1), 1.0 / 3.0, 2e-17, std::acos(-1.0) * i};
    h[static_cast<std::size_t>(i)].wall_ms = 12.5;
  }
  TempDir dir;
  {
    std::ofstream out(dir / "l.csv");
    io::WriteLossHeader(out);
    for (const auto& r : h) io::WriteLossRow(out, r);
  }
  const auto back = io::ReadLossCsv(dir / "l.csv");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].step == h[i].step);
    CHECK(back[i].losses.rec == h[i].losses.rec);
    CHECK(back[i].losses.kl == h[i].losses.kl);
    CHECK(back[i].losses.met == h[i].losses.met);
    CHECK(back[i].losses.joint == h[i].losses.joint);
  }
}

TEST_CASE("evaluation manifests accept two or three columns") {
  TempDir dir;
  {
    std::ofstream out(dir / "pairs.csv");
    out << "# reference,prediction\nclean,degraded\n\na.wav,b.wav\nx,/abs/c.wav,d.wav\n";
  }
  const auto pairs = io::ReadEvalManifest(dir / "pairs.csv");
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].id == "0");
  CHECK(pairs[0].clean_path == dir / "a.wav");
  CHECK(pairs[1].id == "x");
  CHECK(pairs[1].clean_path == "/abs/c.wav");
  CHECK(pairs[1].degraded_path == dir / "d.wav");
  {
    std::ofstream out(dir / "bad.csv");
    out << "a.wav\n";
  }
  CHECK_THROWS_AS(io::ReadEvalManifest(dir / "bad.csv"), io::FormatError);
}

TEST_CASE("loss curve svg") {
  std::vector<l2s::training::StepRecord> h;
  for (int i = 0; i < 20; ++i) {
    l2s::training::StepRecord r;
    r.step = i;
    r.losses = {1.0 / (i + 1), 0.0, 0.5, 1.0 / (i + 1) + 0.05};
    h.push_back(r);
  }
  const std::string svg = io::LossCurveSvg(h);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t at = svg.find("<polyline"); at != std::string::npos; at = svg.find("<polyline", at + 1)) ++lines;
  CHECK(lines == 4);
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
}
