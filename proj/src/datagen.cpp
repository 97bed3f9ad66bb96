#include "l2s/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "l2s/rng.hpp"

namespace l2s::datagen {
namespace {

std::vector<double> LogSpaced(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = lo * std::pow(hi / lo, f);
  }
  return out;
}

void Shuffle(std::vector<double>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.Below(i)]);
}

std::vector<int> DrawSymbols(int count, int num_symbols, Rng& rng) {
  std::vector<int> s(static_cast<std::size_t>(count));
  for (auto& x : s) x = static_cast<int>(rng.Below(static_cast<std::uint64_t>(num_symbols)));
  return s;
}

}  // namespace

void DataConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("DataConfig: " + msg); };
  if (num_symbols < 2) fail("need at least two symbols");
  if (frame_dim < 1 || frames_per_symbol < 1 || symbols_per_clip < 1) fail("sizes must be positive");
  if (fps < 1 || sample_rate_hz < 1 || sample_rate_hz % fps != 0) {
    fail("sample_rate_hz must be a positive multiple of fps");
  }
  if (frame_jitter < 0.0 || crossfade_ms < 0.0) fail("jitter and crossfade must be non-negative");
}

int SymbolAlphabet::NearestPrototype(const Eigen::Ref<const Eigen::RowVectorXd>& frame) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
    const double d = (prototypes.row(k) - frame).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

SymbolAlphabet MakeAlphabet(const DataConfig& cfg) {
  cfg.Validate();
  Rng rng(cfg.alphabet_seed);
  const auto k = static_cast<std::size_t>(cfg.num_symbols);
  SymbolAlphabet a;
  // Standard-normal prototypes in 16 dimensions sit ~5.7 apart; redraw on
  // the rare draw that violates the minimum separation.
  for (;;) {
    a.prototypes.resize(cfg.num_symbols, cfg.frame_dim);
    for (Eigen::Index r = 0; r < a.prototypes.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.prototypes.cols(); ++c) a.prototypes(r, c) = rng.Normal();
    }
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.prototypes.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < a.prototypes.rows(); ++j) {
        min_d = std::min(min_d, (a.prototypes.row(i) - a.prototypes.row(j)).norm());
      }
    }
    if (min_d > 0.5) break;
  }
  auto f0 = LogSpaced(110.0, 240.0, k);
  auto f1 = LogSpaced(400.0, 1100.0, k);
  auto f2 = LogSpaced(1300.0, 3400.0, k);
  Shuffle(f1, rng);
  Shuffle(f2, rng);
  for (std::size_t i = 0; i < k; ++i) {
    a.recipes.push_back({f0[i], f1[i], f2[i], rng.Uniform(0.5, 0.9)});
  }
  return a;
}

dsp::Waveform RenderAudio(const SymbolAlphabet& alphabet, const DataConfig& cfg,
                          const std::vector<int>& symbols) {
  const long per_symbol = static_cast<long>(cfg.samples_per_frame()) * cfg.frames_per_symbol;
  const long total = per_symbol * static_cast<long>(symbols.size());
  const long half_fade = static_cast<long>(std::lround(cfg.crossfade_ms * 1e-3 * cfg.sample_rate_hz / 2.0));
  const double sr = cfg.sample_rate_hz;
  std::vector<double> out(static_cast<std::size_t>(total), 0.0);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    if (symbols[k] < 0 || static_cast<std::size_t>(symbols[k]) >= alphabet.size()) {
      throw std::out_of_range("render_audio: symbol " + std::to_string(symbols[k]) + " not in alphabet");
    }
    const AudioRecipe& r = alphabet.recipes[static_cast<std::size_t>(symbols[k])];
    const long start = static_cast<long>(k) * per_symbol;
    const long end = start + per_symbol;
    for (long n = std::max(0L, start - half_fade); n < std::min(total, end + half_fade); ++n) {
      double env = 1.0;
      if (half_fade > 0) {
        const double rise = static_cast<double>(n - (start - half_fade)) / (2.0 * half_fade);
        const double fall = static_cast<double>((end + half_fade) - n) / (2.0 * half_fade);
        env = std::clamp(std::min(rise, fall), 0.0, 1.0);
      }
      const double t = static_cast<double>(n - start) / sr;
      const double w = 2.0 * std::numbers::pi * t;
      const double tone = 0.5 * std::sin(w * r.f0_hz) + 0.3 * std::sin(w * r.f1_hz) +
                          0.2 * std::sin(w * r.f2_hz);
      out[static_cast<std::size_t>(n)] += r.level * env * tone;
    }
  }
  return dsp::Waveform{std::move(out), cfg.sample_rate_hz};
}

Clip GenClip(const SymbolAlphabet& alphabet, const DataConfig& cfg, int length_symbols,
             std::uint64_t seed) {
  cfg.Validate();
  if (length_symbols < 1) throw std::invalid_argument("gen_clip: length must be at least one symbol");
  Rng rng(seed);
  Clip clip;
  clip.symbols = DrawSymbols(length_symbols, static_cast<int>(alphabet.size()), rng);
  const Eigen::Index rows = static_cast<Eigen::Index>(length_symbols) * cfg.frames_per_symbol;
  clip.frames.resize(rows, alphabet.prototypes.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto sym = clip.symbols[static_cast<std::size_t>(r / cfg.frames_per_symbol)];
    for (Eigen::Index c = 0; c < clip.frames.cols(); ++c) {
      clip.frames(r, c) = alphabet.prototypes(sym, c) + cfg.frame_jitter * rng.Normal();
    }
  }
  clip.audio = RenderAudio(alphabet, cfg, clip.symbols);
  return clip;
}

DatasetPlan PlanDataset(const SymbolAlphabet& alphabet, const DataConfig& cfg, int n_clips,
                        const SplitFractions& fractions, std::uint64_t seed) {
  if (n_clips < 0) throw std::invalid_argument("gen_dataset: negative clip count");
  const double total = fractions.train + fractions.val + fractions.test;
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("gen_dataset: split fractions must be non-negative and sum to 1");
  }
  Rng rng(seed);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < n_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "clip_%05d", i);
    ManifestEntry e;
    e.id = id;
    e.frames_path = "clips/" + e.id + ".ftf";
    e.wav_path = "clips/" + e.id + ".wav";
    e.seed = rng.NextU64();
    Rng clip_rng(e.seed);
    e.symbols = DrawSymbols(cfg.symbols_per_clip, static_cast<int>(alphabet.size()), clip_rng);
    entries.push_back(std::move(e));
  }
  for (std::size_t i = entries.size(); i > 1; --i) std::swap(entries[i - 1], entries[rng.Below(i)]);
  const auto n = static_cast<std::size_t>(n_clips);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n_clips));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(fractions.val * n_clips)));
  DatasetPlan plan;
  plan.train.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.val.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_train),
                  entries.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  plan.test.assign(entries.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), entries.end());
  auto by_id = [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; };
  std::sort(plan.train.begin(), plan.train.end(), by_id);
  std::sort(plan.val.begin(), plan.val.end(), by_id);
  std::sort(plan.test.begin(), plan.test.end(), by_id);
  return plan;
}

Clip RealizeClip(const SymbolAlphabet& alphabet, const DataConfig& cfg, const ManifestEntry& entry) {
  Clip c = GenClip(alphabet, cfg, cfg.symbols_per_clip, entry.seed);
  if (c.symbols != entry.symbols) {
    throw std::runtime_error("realize_clip: manifest symbols for " + entry.id +
                             " do not match its seed");
  }
  return c;
}

std::string SymbolsToString(const std::vector<int>& symbols) {
  std::ostringstream os;
  for (std::size_t i = 0; i < symbols.size(); ++i) os << (i ? "-" : "") << symbols[i];
  return os.str();
}

std::vector<int> SymbolsFromString(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, '-')) {
    if (tok.empty()) throw std::invalid_argument("symbols: empty token in '" + text + "'");
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v < 0) throw std::invalid_argument("symbols: bad token '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace l2s::datagen
