// SPDX-License-Identifier: Apache-2.0
#include "melvc/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "melvc/errors.hpp"

namespace melvc {

Fft::Fft(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
  if (n < 2 || (n & (n - 1)) != 0) throw ParamError("FFT size must be a power of two >= 2");
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b)
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle_[k] = {std::cos(angle), std::sin(angle)};
  }
}

void Fft::transform(std::span<std::complex<double>> data, bool inverse) const {
  if (data.size() != n_) throw ParamError("FFT buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i)
    if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        auto w = twiddle_[k * stride];
        if (inverse) w = std::conj(w);
        const auto t = w * data[start + k + half];
        data[start + k + half] = data[start + k] - t;
        data[start + k] += t;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& x : data) x *= scale;
  }
}

void Fft::forward(std::span<std::complex<double>> data) const { transform(data, false); }

void Fft::inverse(std::span<std::complex<double>> data) const { transform(data, true); }

std::vector<double> Fft::power(std::span<const double> frame) const {
  if (frame.size() > n_) throw ParamError("frame longer than FFT size");
  std::vector<std::complex<double>> buf(n_);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  forward(buf);
  std::vector<double> out(n_ / 2 + 1);
  for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = std::norm(buf[k]);
  return out;
}

}  // namespace melvc
