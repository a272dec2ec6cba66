// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>

#include "melvc/nn/graph.hpp"
#include "melvc/rng.hpp"

namespace melvc::nn {

/// Ordered, name-unique collection of parameters. Element addresses are stable
/// under insertion, so layers may hold indices and graphs may hold pointers.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  /// Throws ParamError on a duplicate name.
  std::size_t add(std::string name, Matrix value);
  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  std::size_t add_uniform(std::string name, Index rows, Index cols, Index fan_in, Rng& rng);
  std::size_t add_constant(std::string name, Index rows, Index cols, double value);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  const Parameter* find(std::string_view name) const;
  Parameter* find(std::string_view name);
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Rounds every value to the nearest float, matching what a checkpoint stores.
  void round_to_float();

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace melvc::nn
