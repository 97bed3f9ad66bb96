#include "l2s/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "byte_io.hpp"

namespace l2s::io {
namespace {

using detail::ByteReader;
using detail::ByteWriter;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(Trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::vector<std::uint8_t> ReadBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteBytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::uint8_t> EncodeWav(const dsp::Waveform& w) {
  if (w.sample_rate_hz <= 0) throw std::invalid_argument("write_wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  ByteWriter out;
  out.Raw("RIFF");
  out.U32(36 + data_bytes);
  out.Raw("WAVE");
  out.Raw("fmt ");
  out.U32(16);
  out.U16(1);  // PCM
  out.U16(1);  // mono
  out.U32(static_cast<std::uint32_t>(w.sample_rate_hz));
  out.U32(static_cast<std::uint32_t>(w.sample_rate_hz) * 2);
  out.U16(2);
  out.U16(16);
  out.Raw("data");
  out.U32(data_bytes);
  for (double s : w.samples) {
    if (std::isnan(s)) throw std::invalid_argument("write_wav: NaN sample");
    const double q = std::clamp(std::nearbyint(s * 32768.0), -32768.0, 32767.0);
    out.U16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return std::move(out.bytes());
}

dsp::Waveform DecodeWav(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes, "wav");
  if (bytes.size() < 12) in.Fail("too short for a RIFF header");
  if (in.Raw(4) != "RIFF") in.Fail("missing RIFF tag");
  in.U32();
  if (in.Raw(4) != "WAVE") in.Fail("not a WAVE file");
  bool have_fmt = false;
  std::uint32_t rate = 0;
  while (in.remaining() >= 8) {
    const std::string id = in.Raw(4);
    const std::uint32_t size = in.U32();
    if (size > in.remaining()) in.Fail("chunk '" + id + "' overruns the file");
    if (id == "fmt ") {
      if (size < 16) in.Fail("fmt chunk too small");
      const std::uint16_t format = in.U16();
      const std::uint16_t channels = in.U16();
      rate = in.U32();
      in.U32();
      in.U16();
      const std::uint16_t bits = in.U16();
      if (format != 1 && format != 0xFFFE) in.Fail("unsupported encoding " + std::to_string(format) + " (need PCM)");
      if (channels != 1) in.Fail(std::to_string(channels) + " channels; only mono is supported");
      if (bits != 16) in.Fail(std::to_string(bits) + "-bit samples; only 16-bit PCM is supported");
      if (rate == 0) in.Fail("zero sample rate");
      in.Skip(size - 16);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) in.Fail("data chunk before fmt chunk");
      if (size % 2 != 0) in.Fail("odd data size for 16-bit samples");
      dsp::Waveform w;
      w.sample_rate_hz = static_cast<int>(rate);
      w.samples.resize(size / 2);
      for (auto& s : w.samples) s = static_cast<std::int16_t>(in.U16()) / 32768.0;
      return w;
    } else {
      in.Skip(size);
    }
    if (size % 2 == 1 && in.remaining() > 0) in.Skip(1);
  }
  in.Fail(have_fmt ? "no data chunk" : "no fmt chunk");
}

dsp::Waveform ReadWav(const std::string& path) {
  try {
    return DecodeWav(ReadBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void WriteWav(const std::string& path, const dsp::Waveform& w) { WriteBytes(path, EncodeWav(w)); }

std::vector<std::uint8_t> EncodeFeatures(const FeatureFile& f) {
  std::size_t count = 1;
  for (auto d : f.dims) count *= d;
  if (count != f.values.size()) {
    throw std::invalid_argument("ftf: dims describe " + std::to_string(count) + " values, got " +
                                std::to_string(f.values.size()));
  }
  ByteWriter out;
  out.Raw("FTF1");
  out.U32(static_cast<std::uint32_t>(f.dims.size()));
  for (auto d : f.dims) out.U32(d);
  for (float v : f.values) out.F32(v);
  return std::move(out.bytes());
}

FeatureFile DecodeFeatures(const std::vector<std::uint8_t>& bytes) {
  ByteReader in(bytes, "ftf");
  if (bytes.size() < 8 || in.Raw(4) != "FTF1") in.Fail("missing FTF1 magic");
  const std::uint32_t rank = in.U32();
  if (rank > in.remaining() / 4) in.Fail("rank " + std::to_string(rank) + " exceeds file size");
  FeatureFile f;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    f.dims.push_back(in.U32());
    count *= f.dims.back();
    if (count > bytes.size()) in.Fail("dims exceed file size");
  }
  if (in.remaining() != count * 4) {
    in.Fail("payload is " + std::to_string(in.remaining()) + " bytes, dims require " +
            std::to_string(count * 4));
  }
  f.values.resize(count);
  for (auto& v : f.values) v = in.F32();
  return f;
}

void WriteFeatureMatrix(const std::string& path, const Matrix& m) {
  FeatureFile f;
  f.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  f.values.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) f.values.push_back(static_cast<float>(m(r, c)));
  }
  WriteBytes(path, EncodeFeatures(f));
}

Matrix ReadFeatureMatrix(const std::string& path) {
  FeatureFile f;
  try {
    f = DecodeFeatures(ReadBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (f.dims.size() != 2) {
    throw FormatError(path + ": expected a rank-2 feature file, got rank " + std::to_string(f.dims.size()));
  }
  Matrix m(f.dims[0], f.dims[1]);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f.values[static_cast<std::size_t>(i)];
  return m;
}

void WriteManifest(const std::string& path, const std::vector<datagen::ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& e : entries) {
    out << e.id << ' ' << e.frames_path << ' ' << e.wav_path << ' '
        << datagen::SymbolsToString(e.symbols) << '\n';
  }
}

std::vector<datagen::ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<datagen::ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::istringstream ls(line);
    datagen::ManifestEntry e;
    std::string symbols, extra;
    if (!(ls >> e.id >> e.frames_path >> e.wav_path >> symbols) || (ls >> extra)) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 'id frames wav symbols'");
    }
    e.symbols = datagen::SymbolsFromString(symbols);
    out.push_back(std::move(e));
  }
  return out;
}

void WriteLossHeader(std::ostream& out) { out << "step,rec,kl,met,joint,wall_ms\n"; }

void WriteLossRow(std::ostream& out, const training::StepRecord& rec) {
  const auto& l = rec.losses;
  out << rec.step << ',' << std::setprecision(17) << l.rec << ',' << l.kl << ',' << l.met << ','
      << l.joint << ',' << std::setprecision(6) << rec.wall_ms << '\n';
}

std::vector<training::StepRecord> ReadLossCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<training::StepRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty() || line_no == 1) continue;
    const auto cells = SplitCsv(line);
    if (cells.size() != 6) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    }
    training::StepRecord r;
    try {
      r.step = std::stoll(cells[0]);
      r.losses.rec = std::stod(cells[1]);
      r.losses.kl = std::stod(cells[2]);
      r.losses.met = std::stod(cells[3]);
      r.losses.joint = std::stod(cells[4]);
      r.wall_ms = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric value");
    }
    out.push_back(r);
  }
  return out;
}

std::vector<EvalPair> ReadEvalManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  std::vector<EvalPair> out;
  std::string line;
  int line_no = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = SplitCsv(t);
    if (cells.size() != 2 && cells.size() != 3) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
    }
    const std::string& clean = cells[cells.size() - 2];
    const std::string& degraded = cells.back();
    if (clean == "clean" && degraded == "degraded") continue;
    if (clean.empty() || degraded.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": empty path");
    }
    EvalPair p;
    p.id = cells.size() == 3 ? cells[0] : std::to_string(row);
    p.clean_path = resolve(clean);
    p.degraded_path = resolve(degraded);
    out.push_back(std::move(p));
    ++row;
  }
  return out;
}

}  // namespace l2s::io
