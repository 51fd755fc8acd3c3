#pragma once

#include <cmath>
#include <string>

#include "taco/nn/linear.hpp"
#include "taco/nn/matrix.hpp"

namespace taco::nn {

// Per-vector normalization with learned gain/shift. The normalized
// activation (mean 0, variance 1 before gain/shift) is kept on the tape.
struct LayerNorm {
  Vec gain;
  Vec shift;
  Vec gain_grad;
  Vec shift_grad;

  static constexpr double kEps = 1e-5;

  explicit LayerNorm(std::size_t dim)
      : gain(dim, 1.0), shift(dim, 0.0), gain_grad(dim, 0.0), shift_grad(dim, 0.0) {}

  std::size_t dim() const { return gain.size(); }

  struct Tape {
    Vec xhat;
    double inv_std = 0.0;
  };

  void forward(const Vec& x, Vec& y, Tape* tape) const {
    require_size(x, dim(), "LayerNorm::forward input");
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) {
      const double d = v - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + kEps);
    y.resize(n);
    if (tape) {
      tape->xhat.resize(n);
      tape->inv_std = inv_std;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double xhat = (x[i] - mean) * inv_std;
      if (tape) tape->xhat[i] = xhat;
      y[i] = gain[i] * xhat + shift[i];
    }
  }

  void backward(const Tape& tape, const Vec& dy, Vec& dx) {
    const std::size_t n = dim();
    require_size(dy, n, "LayerNorm::backward upstream");
    Vec dxhat(n);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      gain_grad[i] += dy[i] * tape.xhat[i];
      shift_grad[i] += dy[i];
      dxhat[i] = dy[i] * gain[i];
      m1 += dxhat[i];
      m2 += dxhat[i] * tape.xhat[i];
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    dx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      dx[i] = tape.inv_std * (dxhat[i] - m1 - tape.xhat[i] * m2);
    }
  }

  void zero_grad() {
    std::fill(gain_grad.begin(), gain_grad.end(), 0.0);
    std::fill(shift_grad.begin(), shift_grad.end(), 0.0);
  }

  void collect_params(const std::string& prefix, ParamList& out) {
    out.push_back({prefix + ".gain", {gain.size()}, gain.data(), gain_grad.data(), gain.size()});
    out.push_back(
        {prefix + ".shift", {shift.size()}, shift.data(), shift_grad.data(), shift.size()});
  }
};

}  // namespace taco::nn
