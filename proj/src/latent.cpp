#include "l2s/latent.hpp"

#include "l2s/rng.hpp"
#include "l2s/transformer.hpp"

namespace l2s::latent {

void InitGaussianHead(nc::ParamSet& params, const std::string& prefix, std::size_t d_model,
                      std::size_t d_z, Rng& rng) {
  tf::InitLinear(params, prefix + ".mu", d_model, d_z, rng);
  tf::InitLinear(params, prefix + ".log_var", d_model, d_z, rng);
}

GaussianSequence GaussianHead(const Tensor& h, const nc::ParamSet& params, const std::string& prefix) {
  Tensor mu = tf::Linear(h, params, prefix + ".mu");
  Tensor log_var = nc::Clamp(tf::Linear(h, params, prefix + ".log_var"), -kLogVarBound, kLogVarBound);
  return {std::move(mu), std::move(log_var)};
}

Tensor Reparameterize(const GaussianSequence& g, const Tensor& noise) {
  if (noise.shape() != g.mu.shape()) {
    throw nc::ShapeError("reparameterize: noise " + nc::ShapeToString(noise.shape()) +
                         " does not match mean " + nc::ShapeToString(g.mu.shape()));
  }
  return nc::Add(g.mu, nc::Mul(nc::Exp(nc::Scale(g.log_var, 0.5)), noise));
}

Tensor SampleNoise(std::size_t length, std::size_t dim, Rng& rng) {
  std::vector<double> v(length * dim);
  for (auto& x : v) x = rng.Normal();
  return Tensor::FromData({length, dim}, std::move(v));
}

Tensor KlDivergence(const GaussianSequence& q, const GaussianSequence& p) {
  if (q.mu.shape() != p.mu.shape() || q.log_var.shape() != p.log_var.shape() ||
      q.mu.shape() != q.log_var.shape()) {
    throw nc::ShapeError("kl_divergence: shapes differ, q " + nc::ShapeToString(q.mu.shape()) +
                         " vs p " + nc::ShapeToString(p.mu.shape()));
  }
  // 0.5 * [ (lv_p - lv_q) + exp(lv_q - lv_p) + (mu_q - mu_p)^2 exp(-lv_p) - 1 ]
  const Tensor lv_diff = nc::Sub(p.log_var, q.log_var);
  const Tensor var_ratio = nc::Exp(nc::Scale(lv_diff, -1.0));
  const Tensor mean_term = nc::Mul(nc::Square(nc::Sub(q.mu, p.mu)), nc::Exp(nc::Scale(p.log_var, -1.0)));
  const Tensor per_entry = nc::AddScalar(nc::Add(nc::Add(lv_diff, var_ratio), mean_term), -1.0);
  return nc::Scale(nc::SumAll(per_entry), 0.5 / static_cast<double>(q.length()));
}

}  // namespace l2s::latent
