#pragma once

#include <cmath>
#include <numbers>

#include "taco/nn/matrix.hpp"

namespace taco::nn {

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

// GELU with the exact standard-normal CDF (no tanh approximation).
inline double gelu(double x) { return x * normal_cdf(x); }

inline double gelu_grad(double x) { return normal_cdf(x) + x * normal_pdf(x); }

inline void gelu(const Vec& x, Vec& y) {
  y.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
}

inline Vec gelu(const Vec& x) {
  Vec y;
  gelu(x, y);
  return y;
}

}  // namespace taco::nn
