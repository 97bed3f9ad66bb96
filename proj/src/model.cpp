#include "l2s/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "l2s/rng.hpp"

namespace l2s::model {
namespace {

constexpr const char* kVideoEncoder = "video_enc";
constexpr const char* kAudioEncoder = "audio_enc";
constexpr const char* kDecoder = "decoder";

void CheckWidth(const char* op, const Tensor& x, int width) {
  if (x.rank() != 2 || x.cols() != static_cast<std::size_t>(width)) {
    throw nc::ShapeError(std::string(op) + ": expected T x " + std::to_string(width) +
                         " input, got " + nc::ShapeToString(x.shape()));
  }
}

Tensor AddPositions(const Tensor& x, const ModelConfig& cfg) {
  return nc::Add(x, tf::PositionalEncoding(x.rows(), cfg.transformer.d_model, cfg.transformer.max_len));
}

Tensor RowDistances(const Tensor& a, const Tensor& b) {
  return nc::Sqrt(nc::SumRows(nc::Square(nc::Sub(a, b))));
}

}  // namespace

void ModelConfig::Validate() const {
  if (frame_dim < 1 || n_mfcc < 1 || d_z < 1) {
    throw std::invalid_argument("ModelConfig: frame_dim, n_mfcc and d_z must be positive");
  }
  transformer.Validate();
}

FeatureStats FeatureStats::Identity(int dim) {
  return {std::vector<double>(static_cast<std::size_t>(dim), 0.0),
          std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

FeatureStats FeatureStats::Fit(std::span<const Matrix> sequences) {
  if (sequences.empty()) throw std::invalid_argument("FeatureStats::Fit: no sequences");
  const auto dim = static_cast<std::size_t>(sequences.front().cols());
  std::vector<double> sum(dim, 0.0), sq(dim, 0.0);
  double count = 0.0;
  for (const auto& m : sequences) {
    if (static_cast<std::size_t>(m.cols()) != dim) {
      throw std::invalid_argument("FeatureStats::Fit: inconsistent feature width");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) sum[c] += m(r, static_cast<Eigen::Index>(c));
    }
    count += static_cast<double>(m.rows());
  }
  if (count == 0.0) throw std::invalid_argument("FeatureStats::Fit: no rows");
  FeatureStats s;
  s.mean.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) s.mean[c] = sum[c] / count;
  for (const auto& m : sequences) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = m(r, static_cast<Eigen::Index>(c)) - s.mean[c];
        sq[c] += d * d;
      }
    }
  }
  s.scale.resize(dim);
  for (std::size_t c = 0; c < dim; ++c) s.scale[c] = std::max(std::sqrt(sq[c] / count), 1e-3);
  return s;
}

Matrix FeatureStats::Standardize(const Matrix& raw) const {
  if (static_cast<std::size_t>(raw.cols()) != mean.size()) {
    throw std::invalid_argument("FeatureStats: width " + std::to_string(raw.cols()) +
                                " does not match " + std::to_string(mean.size()));
  }
  Matrix out = raw;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto i = static_cast<std::size_t>(c);
      out(r, c) = (out(r, c) - mean[i]) / scale[i];
    }
  }
  return out;
}

Matrix FeatureStats::Restore(const Matrix& standardized) const {
  if (static_cast<std::size_t>(standardized.cols()) != mean.size()) {
    throw std::invalid_argument("FeatureStats: width " + std::to_string(standardized.cols()) +
                                " does not match " + std::to_string(mean.size()));
  }
  Matrix out = standardized;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto i = static_cast<std::size_t>(c);
      out(r, c) = out(r, c) * scale[i] + mean[i];
    }
  }
  return out;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), stats_(FeatureStats::Identity(cfg.n_mfcc)) {
  Rng rng(seed);
  params_ = InitParams(cfg_, rng);
}

Model::Model(const ModelConfig& cfg, ParamSet params, FeatureStats stats)
    : cfg_(cfg), params_(std::move(params)), stats_(std::move(stats)) {
  cfg_.Validate();
  const ParamSet reference = [&] {
    Rng rng(0);
    return InitParams(cfg_, rng);
  }();
  for (const auto& [name, t] : reference.entries()) {
    if (!params_.Has(name) || params_.Get(name).shape() != t.shape()) {
      throw std::invalid_argument("Model: parameter '" + name + "' missing or misshaped");
    }
  }
  if (params_.size() != reference.size()) throw std::invalid_argument("Model: unexpected parameters");
  if (stats_.mean.size() != static_cast<std::size_t>(cfg_.n_mfcc) ||
      stats_.scale.size() != stats_.mean.size()) {
    throw std::invalid_argument("Model: feature statistics do not match n_mfcc");
  }
}

ParamSet InitParams(const ModelConfig& cfg, Rng& rng) {
  cfg.Validate();
  ParamSet p;
  const auto d_model = static_cast<std::size_t>(cfg.transformer.d_model);
  const auto n_mfcc = static_cast<std::size_t>(cfg.n_mfcc);
  const auto d_z = static_cast<std::size_t>(cfg.d_z);

  tf::InitLinear(p, "frame_embed", static_cast<std::size_t>(cfg.frame_dim), d_model, rng);
  tf::InitEncoder(p, kVideoEncoder, cfg.transformer, rng);
  latent::InitGaussianHead(p, "video_head", d_model, d_z, rng);

  tf::InitLinear(p, "audio_embed", n_mfcc, d_model, rng);
  tf::InitEncoder(p, kAudioEncoder, cfg.transformer, rng);
  latent::InitGaussianHead(p, "audio_head", d_model, d_z, rng);

  tf::InitLinear(p, "decoder.in", n_mfcc, d_model, rng);
  tf::InitLinear(p, "decoder.mem", d_z, d_model, rng);
  tf::InitDecoder(p, kDecoder, cfg.transformer, rng);
  tf::InitLinear(p, "decoder.out", d_model, n_mfcc, rng);
  p.Add("decoder.start", {1, n_mfcc}, std::vector<double>(n_mfcc, 0.0));
  return p;
}

Tensor EmbedFrames(const Tensor& frames, const ParamSet& params, const ModelConfig& cfg) {
  CheckWidth("embed_frames", frames, cfg.frame_dim);
  return AddPositions(tf::Linear(frames, params, "frame_embed"), cfg);
}

Tensor EmbedAudio(const Tensor& mfcc, const ParamSet& params, const ModelConfig& cfg) {
  CheckWidth("embed_audio", mfcc, cfg.n_mfcc);
  return AddPositions(tf::Linear(mfcc, params, "audio_embed"), cfg);
}

latent::GaussianSequence EncodeVideo(const Tensor& frames, const ParamSet& params,
                                     const ModelConfig& cfg, Rng* dropout_rng) {
  Tensor h = tf::EncoderForward(EmbedFrames(frames, params, cfg), params, kVideoEncoder,
                                cfg.transformer, dropout_rng);
  return latent::GaussianHead(h, params, "video_head");
}

latent::GaussianSequence EncodeAudio(const Tensor& mfcc, const ParamSet& params,
                                     const ModelConfig& cfg, Rng* dropout_rng) {
  Tensor h = tf::EncoderForward(EmbedAudio(mfcc, params, cfg), params, kAudioEncoder,
                                cfg.transformer, dropout_rng);
  return latent::GaussianHead(h, params, "audio_head");
}

Tensor ShiftRight(const Tensor& mfcc, const ParamSet& params) {
  const Tensor& start = params.Get("decoder.start");
  if (mfcc.rows() <= 1) return start;
  return nc::ConcatRows({start, nc::SliceRows(mfcc, 0, mfcc.rows() - 1)});
}

Tensor Decode(const Tensor& prev_mfcc, const Tensor& z, const ParamSet& params,
              const ModelConfig& cfg, Rng* dropout_rng) {
  CheckWidth("decode", prev_mfcc, cfg.n_mfcc);
  CheckWidth("decode latent", z, cfg.d_z);
  Tensor y = AddPositions(tf::Linear(prev_mfcc, params, "decoder.in"), cfg);
  Tensor memory = AddPositions(tf::Linear(z, params, "decoder.mem"), cfg);
  Tensor h = tf::DecoderForward(y, memory, params, kDecoder, cfg.transformer, dropout_rng);
  return tf::Linear(h, params, "decoder.out");
}

Tensor ReconstructionLoss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw nc::ShapeError("reconstruction_loss: prediction " + nc::ShapeToString(pred.shape()) +
                         " vs target " + nc::ShapeToString(target.shape()));
  }
  return nc::MeanAll(nc::Square(nc::Sub(pred, target)));
}

Tensor MetricLoss(const Tensor& frame_emb, const Tensor& audio_emb,
                  std::span<const SyncTriplet> triplets, double margin) {
  if (frame_emb.rank() != 2 || frame_emb.shape() != audio_emb.shape()) {
    throw nc::ShapeError("metric_loss: embeddings must share a T x d shape, got " +
                         nc::ShapeToString(frame_emb.shape()) + " and " +
                         nc::ShapeToString(audio_emb.shape()));
  }
  const std::size_t length = frame_emb.rows();
  if (length < 2) throw std::invalid_argument("metric_loss: need T >= 2 for a negative pair");
  if (triplets.empty()) throw std::invalid_argument("metric_loss: no anchors");

  std::vector<std::size_t> anchors;
  std::vector<std::size_t> pair_anchor;
  std::vector<std::size_t> pair_negative;
  for (const auto& tri : triplets) {
    if (tri.anchor >= length) throw std::invalid_argument("metric_loss: anchor out of range");
    if (tri.negatives.empty()) throw std::invalid_argument("metric_loss: anchor without negatives");
    anchors.push_back(tri.anchor);
    for (auto j : tri.negatives) {
      if (j == tri.anchor || j >= length) {
        throw std::invalid_argument("metric_loss: invalid negative " + std::to_string(j) +
                                    " for anchor " + std::to_string(tri.anchor));
      }
      pair_anchor.push_back(tri.anchor);
      pair_negative.push_back(j);
    }
  }
  const std::size_t n = anchors.size();
  const std::size_t m = pair_anchor.size();

  // Groups the per-pair exponentials back onto their anchors.
  std::vector<double> group(n * m, 0.0);
  for (std::size_t a = 0, col = 0; a < n; ++a) {
    for (std::size_t r = 0; r < triplets[a].negatives.size(); ++r, ++col) group[a * m + col] = 1.0;
  }

  const Tensor positive = RowDistances(nc::GatherRows(frame_emb, anchors), nc::GatherRows(audio_emb, anchors));
  const Tensor sn = nc::GatherRows(audio_emb, pair_negative);
  const Tensor d_fn = RowDistances(nc::GatherRows(frame_emb, pair_anchor), sn);
  const Tensor d_sn = RowDistances(nc::GatherRows(audio_emb, pair_anchor), sn);
  const Tensor push = nc::Add(nc::Exp(nc::AddScalar(nc::Scale(d_fn, -1.0), margin)),
                              nc::Exp(nc::AddScalar(nc::Scale(d_sn, -1.0), margin)));
  const Tensor grouped = nc::MatMul(Tensor::FromData({n, m}, std::move(group)), push);
  const Tensor j = nc::Add(positive, nc::Log(grouped));
  return nc::Scale(nc::SumAll(nc::Square(nc::Relu(j))), 1.0 / (2.0 * static_cast<double>(n)));
}

ForwardResult ForwardLosses(const Tensor& frames, const Tensor& mfcc, const ParamSet& params,
                            const ModelConfig& cfg, const Tensor& noise,
                            std::span<const SyncTriplet> triplets, const LossWeights& weights,
                            Rng* dropout_rng, const Tensor* prev_mask) {
  if (frames.rank() != 2 || mfcc.rank() != 2 || frames.rows() != mfcc.rows()) {
    throw nc::ShapeError("forward_losses: frames " + nc::ShapeToString(frames.shape()) +
                         " and mfcc " + nc::ShapeToString(mfcc.shape()) +
                         " must cover the same timesteps");
  }
  ForwardResult r;
  r.video = EncodeVideo(frames, params, cfg, dropout_rng);
  r.audio = EncodeAudio(mfcc, params, cfg, dropout_rng);
  const Tensor z = latent::Reparameterize(r.audio, noise);
  Tensor prev = ShiftRight(mfcc, params);
  if (prev_mask) {
    if (prev_mask->shape() != prev.shape()) {
      throw nc::ShapeError("forward_losses: decoder input mask " + nc::ShapeToString(prev_mask->shape()) +
                           " vs input " + nc::ShapeToString(prev.shape()));
    }
    prev = nc::Mul(prev, *prev_mask);
  }
  r.prediction = Decode(prev, z, params, cfg, dropout_rng);

  const Tensor rec = ReconstructionLoss(r.prediction, mfcc);
  const Tensor kl = latent::KlDivergence(r.audio, r.video);
  const Tensor met = MetricLoss(r.video.mu, r.audio.mu, triplets, weights.margin);
  r.joint = nc::Add(nc::Add(rec, nc::Scale(kl, weights.kl_weight)),
                    nc::Scale(met, weights.metric_weight));
  r.losses = {rec.item(), kl.item(), met.item(), r.joint.item()};
  return r;
}

Matrix AlignRates(const Matrix& mfcc, std::size_t video_frames) {
  const auto audio_frames = static_cast<std::size_t>(mfcc.rows());
  if (video_frames == 0) throw std::invalid_argument("align_rates: zero video frames");
  if (audio_frames < video_frames) {
    throw std::invalid_argument("align_rates: " + std::to_string(audio_frames) +
                                " audio frames cannot cover " + std::to_string(video_frames) +
                                " video frames");
  }
  const std::size_t group = audio_frames / video_frames;
  Matrix out(static_cast<Eigen::Index>(video_frames), mfcc.cols());
  for (std::size_t t = 0; t < video_frames; ++t) {
    const std::size_t begin = t * group;
    const std::size_t end = t + 1 == video_frames ? audio_frames : begin + group;
    out.row(static_cast<Eigen::Index>(t)) =
        mfcc.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin))
            .colwise()
            .mean();
  }
  return out;
}

Matrix RepeatRows(const Matrix& features, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("repeat_rows: factor must be positive");
  Matrix out(features.rows() * static_cast<Eigen::Index>(factor), features.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    out.row(r) = features.row(r / static_cast<Eigen::Index>(factor));
  }
  return out;
}

}  // namespace l2s::model
