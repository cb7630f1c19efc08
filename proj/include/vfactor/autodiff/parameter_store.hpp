#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "vfactor/autodiff/tensor.hpp"

namespace vfactor::ad {

/// Index of a parameter inside a ParameterStore. Stable across clones, so an
/// architecture built against one store can run against its target copy.
struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named, ordered parameters plus the optimizer's per-element second moments.
class ParameterStore {
 public:
  ParamId add(const std::string& name, Shape shape, std::vector<double> values);
  /// Uniform(-bound, bound) initialization.
  ParamId add_uniform(const std::string& name, Shape shape, double bound, std::mt19937_64& rng);

  const DiffValue& operator[](ParamId id) const { return params_.at(id.index).value; }
  DiffValue& operator[](ParamId id) { return params_.at(id.index).value; }
  const std::string& name(ParamId id) const { return params_.at(id.index).name; }
  ParamId id(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  std::vector<std::string> names() const;

  std::vector<double>& second_moment(ParamId id) { return params_.at(id.index).second_moment; }
  const std::vector<double>& second_moment(ParamId id) const {
    return params_.at(id.index).second_moment;
  }

  void zero_grad();
  /// Deep copy: fresh leaf nodes with the same names, values and moments.
  ParameterStore clone() const;
  /// Overwrites values from a store with the identical name/shape set.
  void copy_values_from(const ParameterStore& other);
  /// Marks every parameter as requiring (or not) gradients.
  void set_requires_grad(bool flag);

 private:
  struct Entry {
    std::string name;
    DiffValue value;
    std::vector<double> second_moment;
  };
  std::vector<Entry> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

}  // namespace vfactor::ad
