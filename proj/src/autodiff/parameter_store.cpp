#include "vfactor/autodiff/parameter_store.hpp"

#include <algorithm>
#include <stdexcept>

namespace vfactor::ad {

ParamId ParameterStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const std::size_t n = values.size();
  params_.push_back({name, DiffValue::parameter(shape, std::move(values)),
                     std::vector<double>(n, 0.0)});
  by_name_.emplace(name, params_.size() - 1);
  return ParamId{params_.size() - 1};
}

ParamId ParameterStore::add_uniform(const std::string& name, Shape shape, double bound,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape.size());
  for (double& v : values) v = dist(rng);
  return add(name, shape, std::move(values));
}

ParamId ParameterStore::id(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("unknown parameter: " + name);
  return ParamId{it->second};
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& p : params_) {
    auto d = p.value.data();
    out.add(p.name, p.value.shape(), std::vector<double>(d.begin(), d.end()));
    out.params_.back().second_moment = p.second_moment;
    out.params_.back().value.set_requires_grad(p.value.requires_grad());
  }
  return out;
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) {
    throw std::invalid_argument("copy_values_from: parameter count mismatch");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw std::invalid_argument("copy_values_from: mismatch at " + dst.name);
    }
    std::copy(src.value.data().begin(), src.value.data().end(),
              dst.value.mutable_data().begin());
  }
}

void ParameterStore::set_requires_grad(bool flag) {
  for (auto& p : params_) p.value.set_requires_grad(flag);
}

}  // namespace vfactor::ad
