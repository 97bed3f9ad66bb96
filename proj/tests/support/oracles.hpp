#pragma once

// Independent reference computations used by unit and acceptance tests.
// Plain loops over doubles; nothing here touches numcore graphs.

#include <algorithm>
#include <cmath>
#include <vector>

#include "l2s/matrix.hpp"
#include "l2s/rng.hpp"

namespace l2s::testing {

// Monte-Carlo estimate of KL(q || p) for diagonal Gaussians:
// mean over x ~ q of log q(x) - log p(x).
inline double MonteCarloKl(const std::vector<double>& mu_q, const std::vector<double>& lv_q,
                           const std::vector<double>& mu_p, const std::vector<double>& lv_p,
                           int samples, Rng& rng) {
  const std::size_t d = mu_q.size();
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) {
    double log_ratio = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = rng.Normal();
      const double x = mu_q[i] + std::exp(0.5 * lv_q[i]) * e;
      const double zp = (x - mu_p[i]) * std::exp(-0.5 * lv_p[i]);
      log_ratio += -0.5 * e * e - 0.5 * lv_q[i] + 0.5 * zp * zp + 0.5 * lv_p[i];
    }
    acc += log_ratio;
  }
  return acc / samples;
}

inline double RowDistance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

// Sync loss with every timestep as an anchor and every other timestep as a
// negative, enumerated directly.
inline double BruteForceMetricLoss(const Matrix& f, const Matrix& s, double margin) {
  const Eigen::Index t = f.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < t; ++i) {
    double inner = 0.0;
    for (Eigen::Index j = 0; j < t; ++j) {
      if (j == i) continue;
      inner += std::exp(margin - RowDistance(f, i, s, j)) + std::exp(margin - RowDistance(s, i, s, j));
    }
    const double jn = RowDistance(f, i, s, i) + std::log(inner);
    total += std::max(0.0, jn) * std::max(0.0, jn);
  }
  return total / (2.0 * static_cast<double>(t));
}

}  // namespace l2s::testing
