// SPDX-License-Identifier: Apache-2.0
#include "melvc/nn/params.hpp"

#include <cmath>

#include "melvc/errors.hpp"

namespace melvc::nn {

ParameterSet::ParameterSet(const ParameterSet& other) : params_(other.params_), index_(other.index_) {}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    params_ = other.params_;
    index_ = other.index_;
  }
  return *this;
}

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw ParamError("duplicate parameter name: " + name);
  const std::size_t idx = params_.size();
  index_.emplace(name, idx);
  Matrix grad = Matrix::Zero(value.rows(), value.cols());
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
  return idx;
}

std::size_t ParameterSet::add_uniform(std::string name, Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(fan_in, 1)));
  Matrix value(rows, cols);
  for (Index i = 0; i < value.size(); ++i) value.data()[i] = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(value));
}

std::size_t ParameterSet::add_constant(std::string name, Index rows, Index cols, double value) {
  return add(std::move(name), Matrix::Constant(rows, cols, value));
}

const Parameter* ParameterSet::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ParameterSet::find(std::string_view name) {
  const auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ParamError("unknown parameter: " + std::string(name));
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

void ParameterSet::round_to_float() {
  for (auto& p : params_)
    for (Index i = 0; i < p.value.size(); ++i)
      p.value.data()[i] = static_cast<double>(static_cast<float>(p.value.data()[i]));
}

}  // namespace melvc::nn
