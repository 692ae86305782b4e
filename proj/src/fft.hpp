#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

namespace uspde::detail {

// Twiddle table for a power-of-two FFT size, built once per size.
inline const std::vector<std::complex<double>>& twiddles(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::vector<std::complex<double>>> tables;
  std::lock_guard<std::mutex> g(mu);
  auto it = tables.find(n);
  if (it == tables.end()) {
    std::vector<std::complex<double>> t(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      double a = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
      t[k] = {std::cos(a), std::sin(a)};
    }
    it = tables.emplace(n, std::move(t)).first;
  }
  return it->second;
}

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT, forward transform (sign -1 twiddles).
inline void fft_pow2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  const auto& tw = twiddles(n);
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * tw[k * step];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace uspde::detail
