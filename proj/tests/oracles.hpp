#pragma once

// Slow reference implementations used only by the tests. None of these call
// into the library code paths they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <tuple>
#include <vector>

namespace oracle {

// |X_k| of the zero-padded DFT of `frame`, computed term by term.
inline double dft_magnitude(std::span<const double> frame, std::size_t nfft, std::size_t k) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t n = 0; n < frame.size(); ++n) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * n % nfft) / static_cast<double>(nfft);
    acc += frame[n] * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return std::abs(acc);
}

inline std::vector<double> tone(double freq, double amplitude, std::size_t n, double rate) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  }
  return out;
}

// O(P * N) pair counting.
inline double auc_pairs(std::span<const double> scores, std::span<const bool> positive) {
  double good = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) good += 1.0;
      else if (scores[i] == scores[j]) good += 0.5;
    }
  }
  return good / pairs;
}

// Checks every bin edge explicitly; out-of-range values go to the edge bins.
inline std::uint32_t scan_bin(double x, std::uint32_t bins, double lo, double hi) {
  const double width = (hi - lo) / bins;
  if (x < lo) return 0;
  for (std::uint32_t b = 0; b < bins; ++b) {
    if (x >= lo + b * width && x < lo + (b + 1) * width) return b;
  }
  return bins - 1;
}

inline double dense_l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double dense_kl(std::span<const double> a, std::span<const double> b, double eps) {
  const double norm = 1.0 + static_cast<double>(a.size()) * eps;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0 && b[i] == 0.0) continue;
    const double pa = a[i] + eps;
    s += pa / norm * std::log(pa / (b[i] + eps));
  }
  return std::max(s, 0.0);
}

inline double dense_hellinger(std::span<const double> a, std::span<const double> b) {
  double bc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) bc += std::sqrt(a[i] * b[i]);
  return std::max(1.0 - bc, 0.0);
}

struct Scored {
  double distance;
  std::uint32_t class_id;
  std::size_t instance;
};

// Full sort of every candidate by (distance, class, instance).
inline std::vector<Scored> exhaustive_knn(std::vector<Scored> all, std::size_t k) {
  std::sort(all.begin(), all.end(), [](const Scored& x, const Scored& y) {
    return std::tie(x.distance, x.class_id, x.instance) < std::tie(y.distance, y.class_id, y.instance);
  });
  all.resize(std::min(k, all.size()));
  return all;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

}  // namespace oracle
