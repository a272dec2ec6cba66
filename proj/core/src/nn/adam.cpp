// SPDX-License-Identifier: Apache-2.0
#include "melvc/nn/adam.hpp"

#include <cmath>

#include "melvc/errors.hpp"

namespace melvc::nn {

void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, double lr, double beta1, double beta2,
                 double epsilon, std::int64_t step) {
  if (step < 1) throw ParamError("Adam step must be >= 1");
  if (m.rows() != param.rows() || m.cols() != param.cols()) m = Matrix::Zero(param.rows(), param.cols());
  if (v.rows() != param.rows() || v.cols() != param.cols()) v = Matrix::Zero(param.rows(), param.cols());
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (Index i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i];
    double& mi = m.data()[i];
    double& vi = v.data()[i];
    mi = beta1 * mi + (1.0 - beta1) * g;
    vi = beta2 * vi + (1.0 - beta2) * g * g;
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    param.data()[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void Adam::step(ParameterSet& params) {
  ++step_;
  if (m_.size() < params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params)
      if (p.grad.size() == p.value.size()) sq += p.grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Matrix g = p.grad.size() == p.value.size() ? Matrix(p.grad * scale) : Matrix::Zero(p.value.rows(), p.value.cols());
    adam_update(p.value, g, m_[i], v_[i], config_.learning_rate, config_.beta1, config_.beta2, config_.epsilon, step_);
  }
}

}  // namespace melvc::nn
