#pragma once

// On-disk formats. All binary formats are little-endian regardless of host.
//
//   WAV   RIFF/WAVE, PCM 16-bit mono. Samples map to [-1, 1) by 1/32768.
//   FTF1  "FTF1", u32 rank, rank x u32 dims, row-major f32 payload.
//   CSV   losses (step,rec,kl,met,joint,wall_ms), eval reports (id,stoi,estoi).
//   Text  dataset manifests, one clip per line: id frames_path wav_path symbols.

#include <cstdint>
#include <string>
#include <vector>

#include "l2s/datagen.hpp"
#include "l2s/dsp.hpp"
#include "l2s/matrix.hpp"
#include "l2s/training.hpp"

namespace l2s::io {

// Malformed or unsupported file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

dsp::Waveform ReadWav(const std::string& path);
// Rounds to nearest and saturates at the int16 range.
void WriteWav(const std::string& path, const dsp::Waveform& w);

std::vector<std::uint8_t> EncodeWav(const dsp::Waveform& w);
dsp::Waveform DecodeWav(const std::vector<std::uint8_t>& bytes);

struct FeatureFile {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

std::vector<std::uint8_t> EncodeFeatures(const FeatureFile& f);
FeatureFile DecodeFeatures(const std::vector<std::uint8_t>& bytes);

// Rank-2 convenience wrappers; values pass through float32.
void WriteFeatureMatrix(const std::string& path, const Matrix& m);
Matrix ReadFeatureMatrix(const std::string& path);

std::vector<std::uint8_t> ReadBytes(const std::string& path);
void WriteBytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

void WriteManifest(const std::string& path, const std::vector<datagen::ManifestEntry>& entries);
// Seeds are not stored in manifests; they come back as 0.
std::vector<datagen::ManifestEntry> ReadManifest(const std::string& path);

void WriteLossHeader(std::ostream& out);
void WriteLossRow(std::ostream& out, const training::StepRecord& rec);
std::vector<training::StepRecord> ReadLossCsv(const std::string& path);

struct EvalPair {
  std::string id;
  std::string clean_path;
  std::string degraded_path;
};

// Rows are "clean,degraded" (id = 0-based row index) or "id,clean,degraded".
// Blank lines and lines starting with '#' are skipped, as is a header row
// whose path columns read "clean" and "degraded". Relative paths resolve
// against the manifest's directory.
std::vector<EvalPair> ReadEvalManifest(const std::string& path);

}  // namespace l2s::io
