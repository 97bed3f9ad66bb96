#pragma once

// Post-norm transformer encoder/decoder stacks built on numcore.
//
// Parameters live in a ParamSet under a caller-chosen prefix, e.g.
// "video_enc.layer0.self_attn.q.w". Forward functions take an optional Rng;
// dropout is applied only when one is supplied and the rate is non-zero.

#include <cstdint>
#include <string>
#include <vector>

#include "l2s/numcore.hpp"
#include "l2s/params.hpp"

namespace l2s {
class Rng;
}

namespace l2s::tf {

using nc::ParamSet;
using nc::Tensor;

struct TransformerConfig {
  int n_layers = 3;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  double dropout_rate = 0.0;
  int max_len = 1024;

  void Validate() const;
  int d_head() const { return d_model / n_heads; }
  bool operator==(const TransformerConfig&) const = default;
};

// rows x cols, true = the query row may attend to the key column.
class AttentionMask {
 public:
  static AttentionMask All(std::size_t rows, std::size_t cols);
  // Lower-triangular including the diagonal: row t sees columns 0..t.
  static AttentionMask Causal(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t r, std::size_t c) const { return allowed_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { allowed_[r * cols_ + c] = v ? 1 : 0; }

  // 0 where allowed, -inf elsewhere; throws if some row allows nothing.
  Tensor ScoreBias() const;

 private:
  AttentionMask(std::size_t rows, std::size_t cols, std::uint8_t fill)
      : rows_(rows), cols_(cols), allowed_(rows * cols, fill) {}
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> allowed_;
};

// softmax(Q K^T / sqrt(d_k)) V. `weights`, when non-null, receives the
// attention matrix (T_q x T_k).
Tensor Attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask* mask,
                 Tensor* weights = nullptr, double dropout_rate = 0.0, Rng* rng = nullptr);

void InitLinear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
// x W + b with W stored as in x out.
Tensor Linear(const Tensor& x, const ParamSet& params, const std::string& name);

void InitMultiHeadAttention(ParamSet& params, const std::string& prefix, int d_model, Rng& rng);
Tensor MultiHeadAttention(const Tensor& x_q, const Tensor& x_kv, const AttentionMask* mask,
                          const ParamSet& params, const std::string& prefix, int n_heads,
                          double dropout_rate = 0.0, Rng* rng = nullptr);

// Sinusoidal encoding, T x d_model. Throws if T > max_len.
Tensor PositionalEncoding(std::size_t length, int d_model, int max_len);

void InitEncoder(ParamSet& params, const std::string& prefix, const TransformerConfig& cfg, Rng& rng);
// Bidirectional self-attention stack; x is T x d_model.
Tensor EncoderForward(const Tensor& x, const ParamSet& params, const std::string& prefix,
                      const TransformerConfig& cfg, Rng* rng = nullptr);

void InitDecoder(ParamSet& params, const std::string& prefix, const TransformerConfig& cfg, Rng& rng);
// Causal self-attention over y_prev and causally banded cross-attention over
// memory (position t sees memory[0..t]). Both inputs are T x d_model.
Tensor DecoderForward(const Tensor& y_prev, const Tensor& memory, const ParamSet& params,
                      const std::string& prefix, const TransformerConfig& cfg, Rng* rng = nullptr);

// Step-by-step evaluation: output row t is computed from the length-(t+1)
// prefixes alone. Matches DecoderForward up to rounding.
Tensor DecoderIncremental(const Tensor& y_prev, const Tensor& memory, const ParamSet& params,
                          const std::string& prefix, const TransformerConfig& cfg);

}  // namespace l2s::tf
