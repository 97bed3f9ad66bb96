#include "l2s/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace l2s {
namespace {

using nlohmann::json;

// Reads `key` from `obj` into `field` when present and marks it consumed.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = root.at(name);
    if (!obj_.is_object()) throw std::invalid_argument("config: '" + name + "' must be an object");
  }

  template <typename T>
  void Get(const char* key, T& field) {
    if (!obj_.contains(key)) return;
    seen_.push_back(key);
    try {
      field = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json& Sub(const char* key) {
    seen_.push_back(key);
    return obj_.at(key);
  }
  bool Has(const char* key) const { return obj_.contains(key); }

  void RejectUnknown() const {
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw std::invalid_argument("config: unknown key " + name_ + "." + key);
      }
    }
  }

 private:
  std::string name_;
  json obj_ = json::object();
  std::vector<std::string> seen_;
};

}  // namespace

void RunConfig::Validate() const {
  audio.Validate();
  data.Validate();
  model.Validate();
  train.Validate();
  inference.Validate();
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (model.frame_dim != data.frame_dim) fail("model.frame_dim must equal data.frame_dim");
  if (model.n_mfcc != audio.n_mfcc) fail("model.n_mfcc must equal audio.n_mfcc");
  if (data.sample_rate_hz != audio.sample_rate_hz) fail("data and audio sample rates differ");
  if (data.fps != inference.video_fps) fail("data.fps must equal inference.video_fps");
  if (num_clips < 1) fail("num_clips must be positive");
  inference::RateFactor(audio, inference.video_fps);
  if (model.transformer.max_len < data.frames_per_clip() ||
      model.transformer.max_len < inference.window_len) {
    fail("model.max_len is shorter than a clip or window");
  }
}

std::string ConfigToJson(const RunConfig& c) {
  json j;
  const auto& a = c.audio;
  j["audio"] = {{"sample_rate_hz", a.sample_rate_hz}, {"frame_len", a.frame_len},
                {"hop_len", a.hop_len},               {"n_fft", a.n_fft},
                {"n_mels", a.n_mels},                 {"n_mfcc", a.n_mfcc},
                {"fmin_hz", a.fmin_hz},               {"fmax_hz", a.fmax_hz},
                {"log_floor", a.log_floor},           {"griffin_lim_iters", a.griffin_lim_iters}};
  const auto& d = c.data;
  j["data"] = {{"num_symbols", d.num_symbols},
               {"frame_dim", d.frame_dim},
               {"frames_per_symbol", d.frames_per_symbol},
               {"fps", d.fps},
               {"symbols_per_clip", d.symbols_per_clip},
               {"sample_rate_hz", d.sample_rate_hz},
               {"frame_jitter", d.frame_jitter},
               {"crossfade_ms", d.crossfade_ms},
               {"alphabet_seed", d.alphabet_seed},
               {"num_clips", c.num_clips},
               {"seed", c.data_seed},
               {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}}};
  const auto& m = c.model;
  j["model"] = {{"frame_dim", m.frame_dim},
                {"n_mfcc", m.n_mfcc},
                {"d_z", m.d_z},
                {"n_layers", m.transformer.n_layers},
                {"n_heads", m.transformer.n_heads},
                {"d_model", m.transformer.d_model},
                {"d_ff", m.transformer.d_ff},
                {"dropout_rate", m.transformer.dropout_rate},
                {"max_len", m.transformer.max_len}};
  const auto& t = c.train;
  j["train"] = {{"lr", t.lr},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"eps", t.eps},
                {"batch_size", t.batch_size},
                {"steps", t.steps},
                {"seed", t.seed},
                {"margin", t.margin},
                {"metric_weight", t.metric_weight},
                {"kl_warmup_frac", t.kl_warmup_frac},
                {"clip_norm", t.clip_norm},
                {"negatives", t.negatives},
                {"prev_frame_dropout", t.prev_frame_dropout},
                {"checkpoint_every", t.checkpoint_every}};
  const auto& i = c.inference;
  j["inference"] = {{"window_len", i.window_len},
                    {"overlap", i.overlap},
                    {"video_fps", i.video_fps},
                    {"mode", i.mode == inference::LatentMode::kMean ? "mean" : "sample"},
                    {"seed", i.seed}};
  // Doubles are written in their shortest exactly-round-tripping form.
  return j.dump(2);
}

RunConfig ConfigFromJson(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "audio" && key != "data" && key != "model" && key != "train" && key != "inference") {
      throw std::invalid_argument("config: unknown section '" + key + "'");
    }
  }
  RunConfig c;
  {
    Section s(j, "audio");
    auto& a = c.audio;
    s.Get("sample_rate_hz", a.sample_rate_hz);
    s.Get("frame_len", a.frame_len);
    s.Get("hop_len", a.hop_len);
    s.Get("n_fft", a.n_fft);
    s.Get("n_mels", a.n_mels);
    s.Get("n_mfcc", a.n_mfcc);
    s.Get("fmin_hz", a.fmin_hz);
    s.Get("fmax_hz", a.fmax_hz);
    s.Get("log_floor", a.log_floor);
    s.Get("griffin_lim_iters", a.griffin_lim_iters);
    s.RejectUnknown();
  }
  {
    Section s(j, "data");
    auto& d = c.data;
    s.Get("num_symbols", d.num_symbols);
    s.Get("frame_dim", d.frame_dim);
    s.Get("frames_per_symbol", d.frames_per_symbol);
    s.Get("fps", d.fps);
    s.Get("symbols_per_clip", d.symbols_per_clip);
    s.Get("sample_rate_hz", d.sample_rate_hz);
    s.Get("frame_jitter", d.frame_jitter);
    s.Get("crossfade_ms", d.crossfade_ms);
    s.Get("alphabet_seed", d.alphabet_seed);
    s.Get("num_clips", c.num_clips);
    s.Get("seed", c.data_seed);
    if (s.Has("split")) {
      Section sp(json{{"split", s.Sub("split")}}, "split");
      sp.Get("train", c.split.train);
      sp.Get("val", c.split.val);
      sp.Get("test", c.split.test);
      sp.RejectUnknown();
    }
    s.RejectUnknown();
  }
  {
    Section s(j, "model");
    auto& m = c.model;
    s.Get("frame_dim", m.frame_dim);
    s.Get("n_mfcc", m.n_mfcc);
    s.Get("d_z", m.d_z);
    s.Get("n_layers", m.transformer.n_layers);
    s.Get("n_heads", m.transformer.n_heads);
    s.Get("d_model", m.transformer.d_model);
    s.Get("d_ff", m.transformer.d_ff);
    s.Get("dropout_rate", m.transformer.dropout_rate);
    s.Get("max_len", m.transformer.max_len);
    s.RejectUnknown();
  }
  {
    Section s(j, "train");
    auto& t = c.train;
    s.Get("lr", t.lr);
    s.Get("beta1", t.beta1);
    s.Get("beta2", t.beta2);
    s.Get("eps", t.eps);
    s.Get("batch_size", t.batch_size);
    s.Get("steps", t.steps);
    s.Get("seed", t.seed);
    s.Get("margin", t.margin);
    s.Get("metric_weight", t.metric_weight);
    s.Get("kl_warmup_frac", t.kl_warmup_frac);
    s.Get("clip_norm", t.clip_norm);
    s.Get("negatives", t.negatives);
    s.Get("prev_frame_dropout", t.prev_frame_dropout);
    s.Get("checkpoint_every", t.checkpoint_every);
    s.RejectUnknown();
  }
  {
    Section s(j, "inference");
    auto& i = c.inference;
    s.Get("window_len", i.window_len);
    s.Get("overlap", i.overlap);
    s.Get("video_fps", i.video_fps);
    std::string mode = i.mode == inference::LatentMode::kMean ? "mean" : "sample";
    s.Get("mode", mode);
    if (mode == "mean") {
      i.mode = inference::LatentMode::kMean;
    } else if (mode == "sample") {
      i.mode = inference::LatentMode::kSample;
    } else {
      throw std::invalid_argument("config: inference.mode must be \"mean\" or \"sample\"");
    }
    s.Get("seed", i.seed);
    s.RejectUnknown();
  }
  c.Validate();
  return c;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str());
}

void SaveConfig(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << ConfigToJson(cfg) << "\n";
}

}  // namespace l2s
