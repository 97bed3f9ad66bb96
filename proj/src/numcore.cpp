#include "l2s/numcore.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "l2s/rng.hpp"

namespace l2s::nc {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_next_seq{1};

// Grad buffer of a parent, or nullptr when that parent does not need one.
std::vector<double>* GradOf(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad : nullptr;
}

bool IsScalarLike(const Tensor& t) { return t.size() == 1; }

enum class Broadcast { kSame, kScalar, kTrailing };

Broadcast ClassifyOperands(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (IsScalarLike(b)) return Broadcast::kScalar;
  if (b.rank() == 1 && a.rank() >= 1 && a.shape().back() == b.dim(0)) return Broadcast::kTrailing;
  throw ShapeError(std::string(op) + ": incompatible shapes " + ShapeToString(a.shape()) +
                   " and " + ShapeToString(b.shape()));
}

void Require2D(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + ShapeToString(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor Unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return MakeResult(a.shape(), std::move(out), {a}, [deriv](Node& self) {
    auto* ga = GradOf(self, 0);
    if (!ga) return;
    const auto& x = *self.parents[0]->data;
    const auto& y = *self.data;
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::FromData(Shape shape, std::vector<double> values, bool requires_grad) {
  if (NumElements(shape) != values.size()) {
    throw ShapeError("Tensor: shape " + ShapeToString(shape) + " holds " +
                     std::to_string(NumElements(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  return Wrap(std::move(shape), std::make_shared<std::vector<double>>(std::move(values)),
              requires_grad);
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({}, {value}, requires_grad);
}

Tensor Tensor::Wrap(Shape shape, std::shared_ptr<std::vector<double>> storage,
                    bool requires_grad) {
  if (!storage || NumElements(shape) != storage->size()) {
    throw ShapeError("Tensor::Wrap: storage does not match shape " + ShapeToString(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(storage);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(node));
}

std::size_t Tensor::dim(std::size_t i) const {
  if (i >= rank()) throw ShapeError("Tensor::dim: axis out of range for " + ShapeToString(shape()));
  return node_->shape[i];
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("Tensor::rows: not 2-D " + ShapeToString(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("Tensor::cols: not 2-D " + ShapeToString(shape()));
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("Tensor::item: not a scalar " + ShapeToString(shape()));
  return (*node_->data)[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return (*node_->data)[r * cols() + c]; }

std::vector<double> Tensor::grad() const {
  if (node_->grad.size() == node_->data->size()) return node_->grad;
  return std::vector<double>(node_->data->size(), 0.0);
}

Tensor Tensor::Detach() const { return Wrap(shape(), node_->data, false); }

Tensor MakeResult(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                  std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::make_shared<std::vector<double>>(std::move(values));
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  const bool needs = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor MatMul(const Tensor& a, const Tensor& b) {
  Require2D("matmul", a);
  Require2D("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ, " + ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, n);
  return MakeResult({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    ConstMapMat g(self.grad.data(), m, n);
    if (auto* ga = GradOf(self, 0)) {
      MapMat(ga->data(), m, k).noalias() +=
          g * ConstMapMat(self.parents[1]->data->data(), k, n).transpose();
    }
    if (auto* gb = GradOf(self, 1)) {
      MapMat(gb->data(), k, n).noalias() +=
          ConstMapMat(self.parents[0]->data->data(), m, k).transpose() * g;
    }
  });
}

Tensor Transpose(const Tensor& a) {
  Require2D("transpose", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  MapMat(out.data(), n, m) = ConstMapMat(a.data().data(), m, n).transpose();
  return MakeResult({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      MapMat(ga->data(), m, n) += ConstMapMat(self.grad.data(), n, m).transpose();
    }
  });
}

namespace {

// Shared implementation of add/sub with the two permitted broadcasts.
Tensor AddLike(const char* op, const Tensor& a, const Tensor& b, double sign) {
  const Broadcast mode = ClassifyOperands(op, a, b);
  const auto& x = a.data();
  const auto& y = b.data();
  std::vector<double> out(x.size());
  const std::size_t width = mode == Broadcast::kTrailing ? y.size() : 1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double yi = mode == Broadcast::kSame ? y[i] : mode == Broadcast::kScalar ? y[0] : y[i % width];
    out[i] = x[i] + sign * yi;
  }
  return MakeResult(a.shape(), std::move(out), {a, b}, [mode, width, sign](Node& self) {
    const auto& g = self.grad;
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (auto* gb = GradOf(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t j = mode == Broadcast::kSame ? i : mode == Broadcast::kScalar ? 0 : i % width;
        (*gb)[j] += sign * g[i];
      }
    }
  });
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() && (IsScalarLike(a) || (a.rank() == 1 && b.rank() > 1))) {
    return AddLike("add", b, a, 1.0);
  }
  return AddLike("add", a, b, 1.0);
}

Tensor Sub(const Tensor& a, const Tensor& b) { return AddLike("sub", a, b, -1.0); }

Tensor Mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() && IsScalarLike(a)) return Mul(b, a);
  const Broadcast mode = ClassifyOperands("mul", a, b);
  if (mode == Broadcast::kTrailing) {
    throw ShapeError("mul: trailing broadcast not supported, shapes " + ShapeToString(a.shape()) +
                     " and " + ShapeToString(b.shape()));
  }
  const auto& x = a.data();
  const auto& y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (mode == Broadcast::kSame ? y[i] : y[0]);
  return MakeResult(a.shape(), std::move(out), {a, b}, [mode](Node& self) {
    const auto& g = self.grad;
    const auto& x = *self.parents[0]->data;
    const auto& y = *self.parents[1]->data;
    const bool same = mode == Broadcast::kSame;
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (same ? y[i] : y[0]);
    }
    if (auto* gb = GradOf(self, 1)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[same ? i : 0] += g[i] * x[i];
    }
  });
}

Tensor Scale(const Tensor& a, double factor) {
  return Unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor AddScalar(const Tensor& a, double value) {
  return Unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor Exp(const Tensor& a) {
  return Unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor Log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return Unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor Relu(const Tensor& a) {
  return Unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor Sqrt(const Tensor& a) {
  for (double v : a.data()) {
    if (v < 0.0) throw DomainError("sqrt: negative input " + std::to_string(v));
  }
  // The derivative at exactly zero is taken as 0 (subgradient of the norm at the origin).
  return Unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor Square(const Tensor& a) {
  return Unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor Clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return Unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor Softmax(const Tensor& a, int axis) {
  const int r = static_cast<int>(a.rank());
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("softmax: axis out of range for " + ShapeToString(a.shape()));
  }
  const std::size_t n = a.dim(static_cast<std::size_t>(axis));
  if (n == 0) throw ShapeError("softmax: empty axis in " + ShapeToString(a.shape()));
  std::size_t inner = 1;
  for (int i = axis + 1; i < r; ++i) inner *= a.dim(static_cast<std::size_t>(i));
  const std::size_t outer = a.size() / (n * inner);

  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[base + j * inner]);
      if (mx == -std::numeric_limits<double>::infinity()) {
        throw DomainError("softmax: every entry of a slice is -inf in " + ShapeToString(a.shape()));
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(x[base + j * inner] - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= sum;
    }
  }
  return MakeResult(a.shape(), std::move(out), {a}, [outer, inner, n](Node& self) {
    auto* ga = GradOf(self, 0);
    if (!ga) return;
    const auto& y = *self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t idx = base + j * inner;
          (*ga)[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "], got " +
                     ShapeToString(gain.shape()) + " and " + ShapeToString(bias.shape()));
  }
  const std::size_t rows = x.size() / d;
  const auto& v = x.data();
  const auto& gn = gain.data();
  const auto& bs = bias.data();
  std::vector<double> out(v.size());
  auto xhat = std::make_shared<std::vector<double>>(v.size());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = v.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double s = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = s;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * s;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gn[j] + bs[j];
    }
  }
  return MakeResult(x.shape(), std::move(out), {x, gain, bias},
                    [rows, d, xhat, rstd](Node& self) {
                      const auto& g = self.grad;
                      const auto& gn = *self.parents[1]->data;
                      auto* gx = GradOf(self, 0);
                      auto* gg = GradOf(self, 1);
                      auto* gb = GradOf(self, 2);
                      for (std::size_t r = 0; r < rows; ++r) {
                        double mean_dh = 0.0, mean_dh_h = 0.0;
                        for (std::size_t j = 0; j < d; ++j) {
                          const std::size_t i = r * d + j;
                          const double dh = g[i] * gn[j];
                          mean_dh += dh;
                          mean_dh_h += dh * (*xhat)[i];
                          if (gg) (*gg)[j] += g[i] * (*xhat)[i];
                          if (gb) (*gb)[j] += g[i];
                        }
                        if (!gx) continue;
                        mean_dh /= static_cast<double>(d);
                        mean_dh_h /= static_cast<double>(d);
                        for (std::size_t j = 0; j < d; ++j) {
                          const std::size_t i = r * d + j;
                          (*gx)[i] += (*rstd)[r] * (g[i] * gn[j] - mean_dh - (*xhat)[i] * mean_dh_h);
                        }
                      }
                    });
}

Tensor Dropout(const Tensor& a, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (rate == 0.0) return a;
  auto mask = std::make_shared<std::vector<double>>(a.size());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = rng.Uniform() < rate ? 0.0 : keep;
  const auto& x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (*mask)[i];
  return MakeResult(a.shape(), std::move(out), {a}, [mask](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i] * (*mask)[i];
    }
  });
}

Tensor SumAll(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return MakeResult({}, {s}, {a}, [](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (auto& g : *ga) g += self.grad[0];
    }
  });
}

Tensor MeanAll(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return Scale(SumAll(a), 1.0 / static_cast<double>(a.size()));
}

Tensor SumRows(const Tensor& a) {
  Require2D("sum_rows", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  const auto& x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r] += x[r * n + c];
  }
  return MakeResult({m, 1}, std::move(out), {a}, [m, n](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[r * n + c] += self.grad[r];
      }
    }
  });
}

Tensor Reshape(const Tensor& a, Shape shape) {
  if (NumElements(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + ShapeToString(a.shape()) + " as " +
                     ShapeToString(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return MakeResult(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[i] += self.grad[i];
    }
  });
}

Tensor GatherRows(const Tensor& a, std::span<const std::size_t> index) {
  Require2D("gather_rows", a);
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(index.size() * n);
  const auto& x = a.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= m) {
      throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                       ShapeToString(a.shape()));
    }
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(index[r] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return MakeResult({index.size(), n}, std::move(out), {a}, [idx = std::move(idx), n](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < n; ++c) (*ga)[idx[r] * n + c] += self.grad[r * n + c];
      }
    }
  });
}

Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end) {
  Require2D("slice_rows", a);
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + ShapeToString(a.shape()));
  }
  const std::size_t n = a.cols();
  std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          a.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  return MakeResult({end - begin, n}, std::move(out), {a}, [begin, n](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*ga)[begin * n + i] += self.grad[i];
    }
  });
}

Tensor SliceCols(const Tensor& a, std::size_t begin, std::size_t end) {
  Require2D("slice_cols", a);
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for " + ShapeToString(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(m * w);
  const auto& x = a.data();
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * n + begin), w,
                out.begin() + static_cast<std::ptrdiff_t>(r * w));
  }
  return MakeResult({m, w}, std::move(out), {a}, [m, n, w, begin](Node& self) {
    if (auto* ga = GradOf(self, 0)) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < w; ++c) (*ga)[r * n + begin + c] += self.grad[r * w + c];
      }
    }
  });
}

Tensor ConcatRows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + ShapeToString(parts[0].shape()) + " vs " +
                       ShapeToString(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return MakeResult({m, n}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t len = self.parents[i]->data->size();
      if (auto* gp = GradOf(self, i)) {
        for (std::size_t j = 0; j < len; ++j) (*gp)[j] += self.grad[offset + j];
      }
      offset += len;
    }
  });
}

Tensor ConcatCols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + ShapeToString(parts[0].shape()) + " vs " +
                       ShapeToString(p.shape()));
    }
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& x = parts[i].data();
    const std::size_t w = widths[i];
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(r * n + offset));
    }
    offset += w;
  }
  return MakeResult({m, n}, std::move(out), parts, [m, n, widths](Node& self) {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::size_t w = widths[i];
      if (auto* gp = GradOf(self, i)) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < w; ++c) (*gp)[r * w + c] += self.grad[r * n + offset + c];
        }
      }
      offset += w;
    }
  });
}

void Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " +
                     (loss.defined() ? ShapeToString(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen{loss.node()};
  std::vector<Node*> stack{loss.node()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  // Creation order is a topological order, so reverse creation order is a valid replay.
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });

  for (Node* n : order) n->grad.assign(n->data->size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (Node* n : order) {
    if (n->backward) n->backward(*n);
  }
}

}  // namespace l2s::nc
