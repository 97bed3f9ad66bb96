#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "l2s/numcore.hpp"

namespace l2s {
class Rng;
}

namespace l2s::nc {

// Named learnable tensors, iterated in name order.
//
// The storage behind each tensor may be shared by several ParamSets: Fork()
// hands out fresh leaves over the same values, so independent graphs keep
// independent gradients while the optimizer updates one copy of the data.
class ParamSet {
 public:
  // Throws std::invalid_argument if `name` is already registered.
  const Tensor& Add(const std::string& name, Shape shape, std::vector<double> values);
  const Tensor& Get(const std::string& name) const;
  bool Has(const std::string& name) const { return entries_.count(name) != 0; }

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t TotalValues() const;

  // Leaves over the same storage. `requires_grad = false` gives a read-only
  // view for inference that records no graph.
  ParamSet Fork(bool requires_grad = true) const;
  // Independent copy of all values.
  ParamSet Clone() const;

  // Bitwise comparison of names, shapes and values.
  bool SameValues(const ParamSet& other) const;

 private:
  std::map<std::string, Tensor> entries_;
};

// Glorot-uniform values for a fan_in x fan_out weight.
std::vector<double> GlorotUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace l2s::nc
