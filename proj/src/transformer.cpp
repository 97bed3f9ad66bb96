#include "l2s/transformer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "l2s/rng.hpp"

namespace l2s::tf {
namespace {

std::string LayerPrefix(const std::string& prefix, int layer) {
  return prefix + ".layer" + std::to_string(layer);
}

void InitLayerNorm(ParamSet& params, const std::string& name, int d) {
  const auto n = static_cast<std::size_t>(d);
  params.Add(name + ".gain", {n}, std::vector<double>(n, 1.0));
  params.Add(name + ".bias", {n}, std::vector<double>(n, 0.0));
}

Tensor ApplyLayerNorm(const Tensor& x, const ParamSet& params, const std::string& name) {
  return nc::LayerNorm(x, params.Get(name + ".gain"), params.Get(name + ".bias"));
}

void InitFeedForward(ParamSet& params, const std::string& prefix, const TransformerConfig& cfg,
                     Rng& rng) {
  InitLinear(params, prefix + ".ff1", static_cast<std::size_t>(cfg.d_model),
             static_cast<std::size_t>(cfg.d_ff), rng);
  InitLinear(params, prefix + ".ff2", static_cast<std::size_t>(cfg.d_ff),
             static_cast<std::size_t>(cfg.d_model), rng);
}

Tensor FeedForward(const Tensor& x, const ParamSet& params, const std::string& prefix,
                   const TransformerConfig& cfg, Rng* rng) {
  Tensor h = nc::Relu(Linear(x, params, prefix + ".ff1"));
  if (rng && cfg.dropout_rate > 0.0) h = nc::Dropout(h, cfg.dropout_rate, *rng);
  return Linear(h, params, prefix + ".ff2");
}

void CheckModelWidth(const char* op, const Tensor& x, const TransformerConfig& cfg) {
  if (x.rank() != 2 || x.cols() != static_cast<std::size_t>(cfg.d_model)) {
    throw nc::ShapeError(std::string(op) + ": expected T x " + std::to_string(cfg.d_model) +
                         " input, got " + nc::ShapeToString(x.shape()));
  }
}

}  // namespace

void TransformerConfig::Validate() const {
  if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || max_len < 1) {
    throw std::invalid_argument("TransformerConfig: sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("TransformerConfig: d_model " + std::to_string(d_model) +
                                " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("TransformerConfig: dropout_rate must be in [0,1)");
  }
}

AttentionMask AttentionMask::All(std::size_t rows, std::size_t cols) {
  return AttentionMask(rows, cols, 1);
}

AttentionMask AttentionMask::Causal(std::size_t rows, std::size_t cols) {
  AttentionMask m(rows, cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c <= r && c < cols; ++c) m.set(r, c, true);
  }
  return m;
}

Tensor AttentionMask::ScoreBias() const {
  std::vector<double> bias(rows_ * cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols_; ++c) {
      const bool ok = allowed(r, c);
      any = any || ok;
      bias[r * cols_ + c] = ok ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    if (!any) {
      throw std::invalid_argument("attention: query row " + std::to_string(r) +
                                  " has no allowed key");
    }
  }
  return Tensor::FromData({rows_, cols_}, std::move(bias));
}

Tensor Attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask,
                 Tensor* weights, double dropout_rate, Rng* rng) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.cols() != k.cols() ||
      k.rows() != v.rows()) {
    throw nc::ShapeError("attention: incompatible Q " + nc::ShapeToString(q.shape()) + ", K " +
                         nc::ShapeToString(k.shape()) + ", V " + nc::ShapeToString(v.shape()));
  }
  Tensor scores =
      nc::Scale(nc::MatMul(q, nc::Transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (mask) {
    if (mask->rows() != q.rows() || mask->cols() != k.rows()) {
      throw nc::ShapeError("attention: mask is " + std::to_string(mask->rows()) + "x" +
                           std::to_string(mask->cols()) + ", scores are " +
                           nc::ShapeToString(scores.shape()));
    }
    scores = nc::Add(scores, mask->ScoreBias());
  }
  Tensor w = nc::Softmax(scores, -1);
  if (weights) *weights = w;
  if (rng && dropout_rate > 0.0) w = nc::Dropout(w, dropout_rate, *rng);
  return nc::MatMul(w, v);
}

void InitLinear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng) {
  params.Add(name + ".w", {in, out}, nc::GlorotUniform(in, out, rng));
  params.Add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

Tensor Linear(const Tensor& x, const ParamSet& params, const std::string& name) {
  return nc::Add(nc::MatMul(x, params.Get(name + ".w")), params.Get(name + ".b"));
}

void InitMultiHeadAttention(ParamSet& params, const std::string& prefix, int d_model, Rng& rng) {
  const auto d = static_cast<std::size_t>(d_model);
  for (const char* p : {".q", ".k", ".v", ".o"}) InitLinear(params, prefix + p, d, d, rng);
}

Tensor MultiHeadAttention(const Tensor& x_q, const Tensor& x_kv, const AttentionMask* mask,
                          const ParamSet& params, const std::string& prefix, int n_heads,
                          double dropout_rate, Rng* rng) {
  const Tensor q = Linear(x_q, params, prefix + ".q");
  const Tensor k = Linear(x_kv, params, prefix + ".k");
  const Tensor v = Linear(x_kv, params, prefix + ".v");
  const std::size_t d_model = q.cols();
  if (n_heads < 1 || d_model % static_cast<std::size_t>(n_heads) != 0) {
    throw std::invalid_argument("multi_head_attention: d_model not divisible by head count");
  }
  const std::size_t dh = d_model / static_cast<std::size_t>(n_heads);
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(n_heads));
  for (std::size_t h = 0; h < static_cast<std::size_t>(n_heads); ++h) {
    heads.push_back(Attention(nc::SliceCols(q, h * dh, (h + 1) * dh),
                              nc::SliceCols(k, h * dh, (h + 1) * dh),
                              nc::SliceCols(v, h * dh, (h + 1) * dh), mask, nullptr, dropout_rate,
                              rng));
  }
  Tensor joined = heads.size() == 1 ? heads[0] : nc::ConcatCols(heads);
  return Linear(joined, params, prefix + ".o");
}

Tensor PositionalEncoding(std::size_t length, int d_model, int max_len) {
  if (length > static_cast<std::size_t>(max_len)) {
    throw std::invalid_argument("positional_encoding: length " + std::to_string(length) +
                                " exceeds max_len " + std::to_string(max_len));
  }
  const auto d = static_cast<std::size_t>(d_model);
  std::vector<double> pe(length * d);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe[t * d + i] = std::sin(angle);
      if (i + 1 < d) pe[t * d + i + 1] = std::cos(angle);
    }
  }
  return Tensor::FromData({length, d}, std::move(pe));
}

void InitEncoder(ParamSet& params, const std::string& prefix, const TransformerConfig& cfg,
                 Rng& rng) {
  cfg.Validate();
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = LayerPrefix(prefix, l);
    InitMultiHeadAttention(params, p + ".self_attn", cfg.d_model, rng);
    InitLayerNorm(params, p + ".norm1", cfg.d_model);
    InitFeedForward(params, p, cfg, rng);
    InitLayerNorm(params, p + ".norm2", cfg.d_model);
  }
}

Tensor EncoderForward(const Tensor& x, const ParamSet& params, const std::string& prefix,
                      const TransformerConfig& cfg, Rng* rng) {
  CheckModelWidth("encoder", x, cfg);
  Tensor h = x;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = LayerPrefix(prefix, l);
    Tensor a = MultiHeadAttention(h, h, nullptr, params, p + ".self_attn", cfg.n_heads,
                                  cfg.dropout_rate, rng);
    h = ApplyLayerNorm(nc::Add(h, a), params, p + ".norm1");
    h = ApplyLayerNorm(nc::Add(h, FeedForward(h, params, p, cfg, rng)), params, p + ".norm2");
  }
  return h;
}

void InitDecoder(ParamSet& params, const std::string& prefix, const TransformerConfig& cfg,
                 Rng& rng) {
  cfg.Validate();
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = LayerPrefix(prefix, l);
    InitMultiHeadAttention(params, p + ".self_attn", cfg.d_model, rng);
    InitLayerNorm(params, p + ".norm1", cfg.d_model);
    InitMultiHeadAttention(params, p + ".cross_attn", cfg.d_model, rng);
    InitLayerNorm(params, p + ".norm2", cfg.d_model);
    InitFeedForward(params, p, cfg, rng);
    InitLayerNorm(params, p + ".norm3", cfg.d_model);
  }
}

Tensor DecoderForward(const Tensor& y_prev, const Tensor& memory, const ParamSet& params,
                      const std::string& prefix, const TransformerConfig& cfg, Rng* rng) {
  CheckModelWidth("decoder", y_prev, cfg);
  CheckModelWidth("decoder memory", memory, cfg);
  if (memory.rows() != y_prev.rows()) {
    throw nc::ShapeError("decoder: memory length " + std::to_string(memory.rows()) +
                         " differs from input length " + std::to_string(y_prev.rows()));
  }
  const std::size_t len = y_prev.rows();
  const AttentionMask causal = AttentionMask::Causal(len, len);
  Tensor h = y_prev;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = LayerPrefix(prefix, l);
    Tensor a = MultiHeadAttention(h, h, &causal, params, p + ".self_attn", cfg.n_heads,
                                  cfg.dropout_rate, rng);
    h = ApplyLayerNorm(nc::Add(h, a), params, p + ".norm1");
    Tensor c = MultiHeadAttention(h, memory, &causal, params, p + ".cross_attn", cfg.n_heads,
                                  cfg.dropout_rate, rng);
    h = ApplyLayerNorm(nc::Add(h, c), params, p + ".norm2");
    h = ApplyLayerNorm(nc::Add(h, FeedForward(h, params, p, cfg, rng)), params, p + ".norm3");
  }
  return h;
}

Tensor DecoderIncremental(const Tensor& y_prev, const Tensor& memory, const ParamSet& params,
                          const std::string& prefix, const TransformerConfig& cfg) {
  CheckModelWidth("decoder", y_prev, cfg);
  std::vector<Tensor> rows;
  for (std::size_t t = 0; t < y_prev.rows(); ++t) {
    Tensor out = DecoderForward(nc::SliceRows(y_prev, 0, t + 1), nc::SliceRows(memory, 0, t + 1),
                                params, prefix, cfg, nullptr);
    rows.push_back(nc::SliceRows(out, t, t + 1));
  }
  return nc::ConcatRows(rows);
}

}  // namespace l2s::tf
