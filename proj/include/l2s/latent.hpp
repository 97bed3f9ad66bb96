#pragma once

// Per-timestep diagonal Gaussians over the shared latent space.

#include <string>

#include "l2s/numcore.hpp"
#include "l2s/params.hpp"

namespace l2s {
class Rng;
}

namespace l2s::latent {

using nc::Tensor;

inline constexpr double kLogVarBound = 10.0;

// mu and log_var, both T x d_z.
struct GaussianSequence {
  Tensor mu;
  Tensor log_var;

  std::size_t length() const { return mu.rows(); }
  std::size_t dim() const { return mu.cols(); }
};

void InitGaussianHead(nc::ParamSet& params, const std::string& prefix, std::size_t d_model,
                      std::size_t d_z, Rng& rng);

// Two affine maps of h (T x d_model); log_var is clamped to +-kLogVarBound.
GaussianSequence GaussianHead(const Tensor& h, const nc::ParamSet& params, const std::string& prefix);

// mu + exp(log_var / 2) * noise, with noise drawn by the caller.
Tensor Reparameterize(const GaussianSequence& g, const Tensor& noise);

// Standard-normal noise shaped like g.
Tensor SampleNoise(std::size_t length, std::size_t dim, Rng& rng);

// KL(q || p) summed over latent dimensions and averaged over timesteps.
Tensor KlDivergence(const GaussianSequence& q, const GaussianSequence& p);

}  // namespace l2s::latent
