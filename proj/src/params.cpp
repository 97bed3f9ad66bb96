#include "l2s/params.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "l2s/rng.hpp"

namespace l2s::nc {

const Tensor& ParamSet::Add(const std::string& name, Shape shape, std::vector<double> values) {
  if (Has(name)) throw std::invalid_argument("ParamSet: duplicate parameter name '" + name + "'");
  auto t = Tensor::FromData(std::move(shape), std::move(values), true);
  return entries_.emplace(name, std::move(t)).first->second;
}

const Tensor& ParamSet::Get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamSet: no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamSet::TotalValues() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

ParamSet ParamSet::Fork(bool requires_grad) const {
  ParamSet out;
  for (const auto& [name, t] : entries_) {
    out.entries_.emplace(name, Tensor::Wrap(t.shape(), t.storage(), requires_grad));
  }
  return out;
}

ParamSet ParamSet::Clone() const {
  ParamSet out;
  for (const auto& [name, t] : entries_) {
    out.Add(name, t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  }
  return out;
}

bool ParamSet::SameValues(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, t] : entries_) {
    if (name != it->first || t.shape() != it->second.shape()) return false;
    const auto a = t.data();
    const auto b = it->second.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
    }
    ++it;
  }
  return true;
}

std::vector<double> GlorotUniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (auto& x : v) x = rng.Uniform(-limit, limit);
  return v;
}

}  // namespace l2s::nc
