#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// Every op validates operand shapes. Broadcasting is limited to
// scalar-with-tensor and a trailing-dimension vector bias. Nodes record their
// parents and a creation sequence number; Backward() replays the reachable
// nodes in reverse creation order, so each node is visited exactly once.
//
// A graph (the set of nodes reachable from one loss) must be built and
// differentiated on a single thread. Distinct graphs may share leaf storage
// across threads as long as nobody writes it concurrently.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace l2s {
class Rng;
}

namespace l2s::nc {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t NumElements(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Node {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this->grad into parents' grad buffers.
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  std::uint64_t seq = 0;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);
  // Leaf over existing storage; used to bind shared parameters into a graph.
  static Tensor Wrap(Shape shape, std::shared_ptr<std::vector<double>> storage,
                     bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data->size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return *node_->data; }
  // Writable view; only meaningful for leaves (no recorded graph reads it back).
  std::span<double> mutable_data() { return *node_->data; }
  const std::shared_ptr<std::vector<double>>& storage() const { return node_->data; }
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  // Gradient from the last Backward() that reached this tensor; zeros otherwise.
  std::vector<double> grad() const;
  bool requires_grad() const { return node_->requires_grad; }

  // Same values, cut from the graph.
  Tensor Detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Tensor MakeResult(Shape, std::vector<double>, std::vector<Tensor>,
                           std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

// Creates an op result; parents/backward are dropped when no parent needs grad.
Tensor MakeResult(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                  std::function<void(Node&)> backward);

// Linear algebra.
Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& a);

// Elementwise; b may be a scalar or a trailing-dimension vector.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double factor);
Tensor AddScalar(const Tensor& a, double value);
Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Relu(const Tensor& a);
Tensor Sqrt(const Tensor& a);
Tensor Square(const Tensor& a);
// Values clamped into [lo, hi]; gradient passes only where the input was inside.
Tensor Clamp(const Tensor& a, double lo, double hi);

Tensor Softmax(const Tensor& a, int axis = -1);
// Normalizes over the last axis, then applies per-column gain and bias.
Tensor LayerNorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor Dropout(const Tensor& a, double rate, Rng& rng);

// Reductions.
Tensor SumAll(const Tensor& a);
Tensor MeanAll(const Tensor& a);
// Sum over the last axis of a 2-D tensor: rows x cols -> rows x 1.
Tensor SumRows(const Tensor& a);

// Structure.
Tensor Reshape(const Tensor& a, Shape shape);
Tensor GatherRows(const Tensor& a, std::span<const std::size_t> index);
Tensor SliceRows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor SliceCols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor ConcatRows(const std::vector<Tensor>& parts);
Tensor ConcatCols(const std::vector<Tensor>& parts);

// Reverse pass from a scalar. Gradients of every node reachable from `loss`
// are reset and recomputed, so repeated calls give identical results.
void Backward(const Tensor& loss);

}  // namespace l2s::nc
