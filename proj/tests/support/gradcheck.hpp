#pragma once

// Finite-difference gradient checking against numcore's reverse mode.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "l2s/numcore.hpp"
#include "l2s/rng.hpp"

namespace l2s::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  int probes = 0;
  // Coordinates redrawn because the stencil straddled a kink (ReLU, hinge).
  int resampled = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// derivative is ~0 from dividing rounding noise by rounding noise.
inline double RelativeError(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Five-point central difference of f along one coordinate. `noise` receives a
// bound on the rounding error of the quotient (10 ulps per evaluation).
inline double FivePoint(const std::function<double(double)>& at, double h, double* noise) {
  const double m2 = at(-2 * h), m1 = at(-h), p1 = at(h), p2 = at(2 * h);
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  *noise = 10 * kEps * (std::abs(m2) + 8 * std::abs(m1) + 8 * std::abs(p1) + std::abs(p2)) / (12 * h);
  return (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h);
}

// Checks `probes_per_input` random coordinates of each input with a
// five-point central stencil (truncation error O(h^4)). The reported error
// discounts the stencil's own rounding bound. A coordinate whose h and h/2
// estimates disagree by more than 1e-6 relative has a kink within 2h and is
// redrawn (at most 8 times per probe). `f` must rebuild the graph from the
// current input values on every call.
inline GradCheckResult GradCheck(const std::function<nc::Tensor()>& f, std::vector<nc::Tensor> inputs,
                                 int probes_per_input, Rng& rng, double h = 1e-4) {
  nc::Tensor loss = f();
  nc::Backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& in : inputs) analytic.push_back(in.grad());

  GradCheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].mutable_data();
    for (int p = 0; p < probes_per_input; ++p) {
      for (int attempt = 0;; ++attempt) {
        const std::size_t k = rng.Below(values.size());
        const double x0 = values[k];
        const std::function<double(double)> at = [&](double dx) {
          values[k] = x0 + dx;
          const double v = f().item();
          values[k] = x0;
          return v;
        };
        double noise = 0.0, noise_half = 0.0;
        const double numeric = FivePoint(at, h, &noise);
        const double half = FivePoint(at, h / 2, &noise_half);
        const bool kink = std::abs(numeric - half) > 1e-6 * std::max(std::abs(numeric), 1e-6) + 2 * noise_half;
        if (kink && attempt < 8) {
          ++r.resampled;
          continue;
        }
        const double excess = std::max(0.0, std::abs(analytic[i][k] - numeric) - noise);
        r.max_rel_error = std::max(r.max_rel_error, RelativeError(excess, 0.0, std::max(std::abs(analytic[i][k]),
                                                                                    std::max(std::abs(numeric), 1e-6))));
        ++r.probes;
        break;
      }
    }
  }
  return r;
}

inline nc::Tensor RandomTensor(nc::Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(nc::NumElements(shape));
  for (auto& x : v) x = scale * rng.Normal();
  return nc::Tensor::FromData(std::move(shape), std::move(v), requires_grad);
}

// Values bounded away from zero, for ops with a kink or singularity there.
inline nc::Tensor AwayFromZero(nc::Shape shape, Rng& rng, double lo, double hi, bool positive_only,
                               bool requires_grad = true) {
  std::vector<double> v(nc::NumElements(shape));
  for (auto& x : v) {
    x = rng.Uniform(lo, hi);
    if (!positive_only && rng.Uniform() < 0.5) x = -x;
  }
  return nc::Tensor::FromData(std::move(shape), std::move(v), requires_grad);
}

// sum(out * weights) with fixed random weights, so every output element
// contributes a distinct sensitivity.
inline nc::Tensor Project(const nc::Tensor& out, const nc::Tensor& weights) {
  return nc::SumAll(nc::Mul(out, weights));
}

}  // namespace l2s::testing
