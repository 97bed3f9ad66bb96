#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "l2s/checkpoint.hpp"
#include "l2s/config.hpp"
#include "l2s/dsp.hpp"
#include "l2s/inference.hpp"
#include "l2s/io.hpp"
#include "l2s/latent.hpp"
#include "l2s/metrics.hpp"
#include "l2s/model.hpp"
#include "l2s/pipeline.hpp"
#include "l2s/training.hpp"

namespace py = pybind11;
using l2s::Matrix;

namespace {

l2s::RunConfig ParseConfig(const std::optional<std::string>& json) {
  l2s::RunConfig cfg = json ? l2s::ConfigFromJson(*json) : l2s::RunConfig{};
  cfg.Validate();
  return cfg;
}

py::array_t<double> ToArray(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

l2s::dsp::Waveform ToWaveform(const std::vector<double>& samples, int rate) { return {samples, rate}; }

class PyModel {
 public:
  explicit PyModel(l2s::io::Checkpoint ckpt) : config_(ckpt.config), model_(l2s::io::RestoreModel(ckpt)) {}

  static PyModel Load(const std::string& path) { return PyModel(l2s::io::LoadCheckpoint(path)); }

  py::array_t<double> PredictSpeech(const Matrix& frames, bool stochastic, std::uint64_t seed) const {
    auto inf = config_.inference;
    inf.mode = stochastic ? l2s::inference::LatentMode::kSample : l2s::inference::LatentMode::kMean;
    inf.seed = seed;
    l2s::dsp::Waveform w;
    {
      py::gil_scoped_release release;
      w = l2s::inference::PredictSpeech(frames, model_, config_.audio, inf);
    }
    return ToArray(w.samples);
  }

  Matrix PredictFeatures(const Matrix& frames) const {
    py::gil_scoped_release release;
    return l2s::inference::PredictFeatures(frames, model_, config_.inference);
  }

  std::string ConfigJson() const { return l2s::ConfigToJson(config_); }
  int sample_rate() const { return config_.audio.sample_rate_hz; }

 private:
  l2s::RunConfig config_;
  l2s::model::Model model_;
};

}  // namespace

PYBIND11_MODULE(_l2s, m) {
  m.doc() = "Lip-to-speech synthesis core (C++).";

  py::register_exception<l2s::nc::DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("default_config", [] { return l2s::ConfigToJson(l2s::RunConfig{}); },
        "Default run configuration as a JSON string.");
  m.def(
      "normalize_config", [](const std::string& json) { return l2s::ConfigToJson(ParseConfig(json)); },
      py::arg("config"), "Fills defaults and validates; raises ValueError on unknown keys or bad values.");

  m.def(
      "mfcc",
      [](const std::vector<double>& samples, int sample_rate, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        return l2s::dsp::Mfcc(ToWaveform(samples, sample_rate), cfg.audio);
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("config") = py::none(),
      "Analysis-rate MFCC, one row per STFT frame.");
  m.def(
      "video_rate_mfcc",
      [](const std::vector<double>& samples, std::size_t video_frames, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        return l2s::inference::VideoRateMfcc(ToWaveform(samples, cfg.audio.sample_rate_hz), cfg.audio,
                                             cfg.inference.video_fps, video_frames);
      },
      py::arg("samples"), py::arg("video_frames"), py::arg("config") = py::none());
  m.def(
      "features_to_waveform",
      [](const Matrix& mfcc, std::uint64_t seed, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        l2s::dsp::Waveform w;
        {
          py::gil_scoped_release release;
          w = l2s::inference::FeaturesToWaveform(mfcc, cfg.audio, cfg.inference.video_fps, seed);
        }
        return ToArray(w.samples);
      },
      py::arg("mfcc"), py::arg("seed") = 0, py::arg("config") = py::none(),
      "Video-rate MFCC to a peak-normalized waveform via Griffin-Lim.");
  m.def(
      "griffin_lim",
      [](const Matrix& magnitudes, int iters, std::uint64_t seed, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        std::vector<double> conv;
        l2s::dsp::Waveform w;
        {
          py::gil_scoped_release release;
          w = l2s::dsp::GriffinLim(l2s::dsp::Spectrogram{magnitudes}, cfg.audio, iters, seed, &conv);
        }
        return py::make_tuple(ToArray(w.samples), ToArray(conv));
      },
      py::arg("magnitudes"), py::arg("iters"), py::arg("seed") = 0, py::arg("config") = py::none(),
      "Returns (samples, spectral convergence per iteration).");
  m.def(
      "stft_magnitude",
      [](const std::vector<double>& samples, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        return Matrix(l2s::dsp::Stft(samples, cfg.audio).cwiseAbs());
      },
      py::arg("samples"), py::arg("config") = py::none());

  m.def(
      "stoi",
      [](const std::vector<double>& clean, const std::vector<double>& degraded, int sample_rate) {
        return l2s::metrics::Stoi(ToWaveform(clean, sample_rate), ToWaveform(degraded, sample_rate));
      },
      py::arg("clean"), py::arg("degraded"), py::arg("sample_rate") = 16000);
  m.def(
      "estoi",
      [](const std::vector<double>& clean, const std::vector<double>& degraded, int sample_rate) {
        return l2s::metrics::Estoi(ToWaveform(clean, sample_rate), ToWaveform(degraded, sample_rate));
      },
      py::arg("clean"), py::arg("degraded"), py::arg("sample_rate") = 16000);

  m.def(
      "kl_divergence",
      [](const Matrix& mu_q, const Matrix& logvar_q, const Matrix& mu_p, const Matrix& logvar_p) {
        const l2s::latent::GaussianSequence q{l2s::ToTensor(mu_q), l2s::ToTensor(logvar_q)};
        const l2s::latent::GaussianSequence p{l2s::ToTensor(mu_p), l2s::ToTensor(logvar_p)};
        return l2s::latent::KlDivergence(q, p).item();
      },
      py::arg("mu_q"), py::arg("logvar_q"), py::arg("mu_p"), py::arg("logvar_p"),
      "KL(q || p) between diagonal Gaussian sequences, summed over dimensions, averaged over rows.");
  m.def(
      "sync_loss",
      [](const Matrix& frame_emb, const Matrix& audio_emb, double margin) {
        std::vector<l2s::model::SyncTriplet> triplets;
        const auto n = static_cast<std::size_t>(frame_emb.rows());
        for (std::size_t i = 0; i < n; ++i) {
          l2s::model::SyncTriplet t{i, {}};
          for (std::size_t j = 0; j < n; ++j)
            if (j != i) t.negatives.push_back(j);
          triplets.push_back(std::move(t));
        }
        return l2s::model::MetricLoss(l2s::ToTensor(frame_emb), l2s::ToTensor(audio_emb), triplets, margin)
            .item();
      },
      py::arg("frame_emb"), py::arg("audio_emb"), py::arg("margin") = 1.0,
      "Sync loss with every other timestep as a negative.");

  m.def(
      "generate_dataset",
      [](const std::string& out_dir, std::optional<std::string> config) {
        const auto cfg = ParseConfig(config);
        py::gil_scoped_release release;
        l2s::pipeline::WriteDataset(out_dir, cfg);
      },
      py::arg("out_dir"), py::arg("config") = py::none());
  m.def(
      "train",
      [](const std::string& data_dir, const std::string& checkpoint, std::optional<std::string> config,
         std::optional<int> steps) {
        auto cfg = ParseConfig(config);
        if (steps) cfg.train.steps = *steps;
        cfg.Validate();
        std::vector<l2s::training::StepRecord> history;
        {
          py::gil_scoped_release release;
          const auto data = l2s::pipeline::LoadDataset(data_dir, cfg);
          l2s::model::Model model(cfg.model, cfg.train.seed);
          model.stats() = l2s::pipeline::FitStats(data.train);
          l2s::training::Trainer trainer(model, l2s::pipeline::TrainingClips(data.train, model.stats()),
                                         cfg.train);
          history = l2s::training::Train(trainer);
          l2s::io::SaveCheckpoint(checkpoint, l2s::io::Capture(cfg, model, &trainer));
        }
        py::list rows;
        for (const auto& r : history) {
          py::dict d;
          d["step"] = r.step;
          d["rec"] = r.losses.rec;
          d["kl"] = r.losses.kl;
          d["sync"] = r.losses.met;
          d["joint"] = r.losses.joint;
          rows.append(d);
        }
        return rows;
      },
      py::arg("data_dir"), py::arg("checkpoint"), py::arg("config") = py::none(), py::arg("steps") = py::none(),
      "Trains from scratch on a generated dataset and writes a checkpoint; returns the per-step losses.");

  m.def("read_frames", &l2s::io::ReadFeatureMatrix, py::arg("path"), "Reads an FTF1 feature file.");
  m.def(
      "read_wav",
      [](const std::string& path) {
        const auto w = l2s::io::ReadWav(path);
        return py::make_tuple(ToArray(w.samples), w.sample_rate_hz);
      },
      py::arg("path"), "Returns (samples in [-1, 1], sample_rate).");
  m.def(
      "write_wav",
      [](const std::string& path, const std::vector<double>& samples, int sample_rate) {
        l2s::io::WriteWav(path, ToWaveform(samples, sample_rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000, "16-bit PCM mono.");

  py::class_<PyModel>(m, "Model")
      .def_static("load", &PyModel::Load, py::arg("path"))
      .def("predict_speech", &PyModel::PredictSpeech, py::arg("frames"), py::arg("stochastic") = false,
           py::arg("seed") = 0)
      .def("predict_features", &PyModel::PredictFeatures, py::arg("frames"))
      .def_property_readonly("config", &PyModel::ConfigJson)
      .def_property_readonly("sample_rate", &PyModel::sample_rate);
}
