#pragma once

#include <Eigen/Core>

#include <complex>

#include "l2s/numcore.hpp"

namespace l2s {

// Plain (non-differentiable) row-major matrices for signal data and features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline nc::Tensor ToTensor(const Matrix& m, bool requires_grad = false) {
  return nc::Tensor::FromData({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                              std::vector<double>(m.data(), m.data() + m.size()), requires_grad);
}

inline Matrix ToMatrix(const nc::Tensor& t) {
  const auto rows = static_cast<Eigen::Index>(t.rows());
  const auto cols = static_cast<Eigen::Index>(t.cols());
  return Eigen::Map<const Matrix>(t.data().data(), rows, cols);
}

}  // namespace l2s
