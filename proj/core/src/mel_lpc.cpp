// SPDX-License-Identifier: Apache-2.0
#include "melvc/mel_lpc.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "melvc/errors.hpp"

namespace melvc {

Index LpcTrack::frame_for_sample(std::size_t n) const {
  const auto offset = static_cast<std::size_t>((frame_length - hop_length) / 2);
  if (n < offset) return 0;
  const auto t = static_cast<Index>((n - offset) / static_cast<std::size_t>(hop_length));
  return std::min(t, num_frames() - 1);
}

std::size_t LpcTrack::max_samples() const {
  return static_cast<std::size_t>(num_frames()) * static_cast<std::size_t>(hop_length) +
         static_cast<std::size_t>(frame_length) - 1;
}

LpcTrack LpcTrack::from_coefficients(Matrix coeffs, int hop_length, int frame_length) {
  LpcTrack track;
  track.hop_length = hop_length;
  track.frame_length = frame_length;
  track.reflection.resize(coeffs.rows(), coeffs.cols());
  track.gain.assign(static_cast<std::size_t>(coeffs.rows()), 1.0);
  std::vector<double> row(static_cast<std::size_t>(coeffs.cols()));
  for (Index t = 0; t < coeffs.rows(); ++t) {
    for (Index i = 0; i < coeffs.cols(); ++i) row[static_cast<std::size_t>(i)] = coeffs(t, i);
    const auto k = reflection_from_coefficients(row);
    for (Index i = 0; i < coeffs.cols(); ++i) track.reflection(t, i) = k[static_cast<std::size_t>(i)];
  }
  track.coeffs = std::move(coeffs);
  return track;
}

LpcSolution levinson_durbin(std::span<const double> r, int order) {
  if (order < 0 || r.size() < static_cast<std::size_t>(order) + 1)
    throw ParamError("autocorrelation shorter than order + 1");
  if (!(r[0] > 0.0)) throw ParamError("r[0] must be positive");

  LpcSolution sol;
  const auto m_max = static_cast<std::size_t>(order);
  sol.coeffs.assign(m_max, 0.0);
  sol.reflection.assign(m_max, 0.0);
  sol.errors.reserve(m_max + 1);
  sol.errors.push_back(r[0]);

  std::vector<double> prev(m_max, 0.0);
  double err = r[0];
  for (std::size_t m = 1; m <= m_max; ++m) {
    double acc = r[m];
    for (std::size_t i = 1; i < m; ++i) acc -= sol.coeffs[i - 1] * r[m - i];
    const double k = acc / err;
    if (!(std::abs(k) < 1.0))
      throw NotPositiveDefiniteError("reflection coefficient " + std::to_string(m) + " has magnitude >= 1");
    prev = sol.coeffs;
    for (std::size_t i = 1; i < m; ++i) sol.coeffs[i - 1] = prev[i - 1] - k * prev[m - i - 1];
    sol.coeffs[m - 1] = k;
    sol.reflection[m - 1] = k;
    err *= 1.0 - k * k;
    sol.errors.push_back(err);
  }
  return sol;
}

std::vector<double> reflection_from_coefficients(std::span<const double> coeffs) {
  std::vector<double> a(coeffs.begin(), coeffs.end());
  std::vector<double> k(a.size());
  for (std::size_t m = a.size(); m >= 1; --m) {
    const double km = a[m - 1];
    if (!(std::abs(km) < 1.0))
      throw StabilityError("predictor is not minimum phase (|k_" + std::to_string(m) + "| >= 1)");
    k[m - 1] = km;
    const double denom = 1.0 - km * km;
    std::vector<double> lower(m - 1);
    for (std::size_t i = 1; i < m; ++i) lower[i - 1] = (a[i - 1] + km * a[m - i - 1]) / denom;
    for (std::size_t i = 1; i < m; ++i) a[i - 1] = lower[i - 1];
  }
  return k;
}

std::vector<double> power_to_autocorrelation(std::span<const double> power, int order) {
  if (power.size() < 2) throw ParamError("power spectrum too short");
  const std::size_t half = power.size() - 1;
  const std::size_t n_fft = 2 * half;
  if (static_cast<std::size_t>(order) + 1 > half) throw ParamError("LPC order too large for spectrum");
  std::vector<double> r(static_cast<std::size_t>(order) + 1);
  for (std::size_t k = 0; k < r.size(); ++k) {
    double acc = power[0] + ((k % 2 == 0) ? power[half] : -power[half]);
    for (std::size_t j = 1; j < half; ++j) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((j * k) % n_fft) / static_cast<double>(n_fft);
      acc += 2.0 * power[j] * std::cos(angle);
    }
    r[k] = acc / static_cast<double>(n_fft);
  }
  return r;
}

std::vector<double> gaussian_lag_window(int order, double bandwidth_hz, int sample_rate) {
  std::vector<double> w(static_cast<std::size_t>(order) + 1);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double x = 2.0 * std::numbers::pi * bandwidth_hz * static_cast<double>(k) / sample_rate;
    w[k] = std::exp(-0.5 * x * x);
  }
  return w;
}

std::vector<double> autocorr_from_power(std::span<const double> power, int order, const LpcConfig& config) {
  for (double p : power)
    if (!(p >= 0.0)) throw ParamError("power spectrum has a negative or NaN entry");
  auto r = power_to_autocorrelation(power, order);
  const auto lag = gaussian_lag_window(order, config.lag_window_hz, config.sample_rate);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] *= lag[k];
  r[0] *= 1.0 + config.white_noise_correction;
  return r;
}

MelLpcAnalyzer::MelLpcAnalyzer(const MelFilterbank& fb, LpcConfig config) : config_(config), n_mels_(fb.n_mels()) {
  const Eigen::MatrixXd weights = fb.weights;
  pinv_ = weights.completeOrthogonalDecomposition().pseudoInverse();
}

std::vector<double> MelLpcAnalyzer::mel_to_power(std::span<const double> mel_frame) const {
  if (static_cast<Index>(mel_frame.size()) != n_mels_)
    throw ParamError("mel frame has " + std::to_string(mel_frame.size()) + " bands, filterbank has " +
                     std::to_string(n_mels_));
  Vector energies(n_mels_);
  for (Index m = 0; m < n_mels_; ++m) energies(m) = std::exp(mel_frame[static_cast<std::size_t>(m)]);
  const Vector p = pinv_ * energies;
  std::vector<double> out(static_cast<std::size_t>(p.size()));
  for (Index k = 0; k < p.size(); ++k) out[static_cast<std::size_t>(k)] = std::max(p(k), config_.power_floor);
  return out;
}

LpcSolution MelLpcAnalyzer::frame_lpc(std::span<const double> mel_frame) const {
  const auto power = mel_to_power(mel_frame);
  return levinson_durbin(autocorr_from_power(power, config_.order, config_), config_.order);
}

LpcTrack MelLpcAnalyzer::analyze(const MelSpectrogram& mel) const {
  LpcTrack track;
  track.hop_length = config_.hop_length;
  track.frame_length = config_.frame_length;
  const Index frames = mel.num_frames();
  track.coeffs.resize(frames, config_.order);
  track.reflection.resize(frames, config_.order);
  track.gain.resize(static_cast<std::size_t>(frames));
  std::vector<double> row(static_cast<std::size_t>(mel.n_mels()));
  for (Index t = 0; t < frames; ++t) {
    for (Index m = 0; m < mel.n_mels(); ++m) row[static_cast<std::size_t>(m)] = mel.frames(t, m);
    const auto sol = frame_lpc(row);
    for (int i = 0; i < config_.order; ++i) {
      track.coeffs(t, i) = sol.coeffs[static_cast<std::size_t>(i)];
      track.reflection(t, i) = sol.reflection[static_cast<std::size_t>(i)];
    }
    track.gain[static_cast<std::size_t>(t)] = sol.error();
  }
  return track;
}

std::vector<double> mel_to_power(std::span<const double> mel_frame, const MelFilterbank& fb) {
  return MelLpcAnalyzer(fb).mel_to_power(mel_frame);
}

LpcTrack mel_to_lpc(const MelSpectrogram& mel, const MelFilterbank& fb, int order) {
  LpcConfig config;
  config.order = order;
  if (&fb == &default_front_end().filterbank() && order == default_lpc_analyzer().config().order)
    return default_lpc_analyzer().analyze(mel);
  return MelLpcAnalyzer(fb, config).analyze(mel);
}

const MelLpcAnalyzer& default_lpc_analyzer() {
  static const MelLpcAnalyzer analyzer{default_front_end().filterbank(), LpcConfig{}};
  return analyzer;
}

void check_stable(const LpcTrack& track) {
  for (Index t = 0; t < track.reflection.rows(); ++t)
    for (Index i = 0; i < track.reflection.cols(); ++i)
      if (!(std::abs(track.reflection(t, i)) < 1.0))
        throw StabilityError("unstable synthesis filter at frame " + std::to_string(t));
}

namespace {

void check_coverage(std::size_t n, const LpcTrack& track) {
  if (track.num_frames() == 0) throw ParamError("LPC track has no frames");
  if (n > track.max_samples())
    throw ParamError("signal of " + std::to_string(n) + " samples exceeds track coverage of " +
                     std::to_string(track.max_samples()));
}

}  // namespace

std::vector<double> lpc_residual(std::span<const double> x, const LpcTrack& track) {
  check_coverage(x.size(), track);
  const int order = track.order();
  std::vector<double> e(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const Index t = track.frame_for_sample(n);
    double pred = 0.0;
    for (int i = 1; i <= order && static_cast<std::size_t>(i) <= n; ++i) pred += track.coeffs(t, i - 1) * x[n - i];
    e[n] = x[n] - pred;
  }
  return e;
}

std::vector<double> lpc_synthesize(std::span<const double> excitation, const LpcTrack& track) {
  check_coverage(excitation.size(), track);
  check_stable(track);
  const int order = track.order();
  std::vector<double> s(excitation.size());
  for (std::size_t n = 0; n < excitation.size(); ++n) {
    const Index t = track.frame_for_sample(n);
    double pred = 0.0;
    for (int i = 1; i <= order && static_cast<std::size_t>(i) <= n; ++i) pred += track.coeffs(t, i - 1) * s[n - i];
    s[n] = excitation[n] + pred;
  }
  return s;
}

}  // namespace melvc
