// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "melvc/nn/params.hpp"

namespace melvc::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

/// One bias-corrected Adam update of a single tensor. `step` is 1-based.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double epsilon, std::int64_t step);

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::int64_t steps() const { return step_; }

  /// Applies the accumulated gradients of every parameter; missing gradients count as zero.
  void step(ParameterSet& params);

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace melvc::nn
