#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "taco/core/rng.hpp"
#include "taco/nn/matrix.hpp"

namespace taco::nn {

// Named view of one flat parameter tensor and its gradient buffer.
struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
};

using ParamList = std::vector<ParamView>;

// Fully connected layer, weight is (out x in). Shapes are fixed at
// construction; backward() accumulates into the gradient buffers.
struct LinearLayer {
  Matrix weight;
  Vec bias;
  Matrix weight_grad;
  Vec bias_grad;

  LinearLayer(std::size_t out_dim, std::size_t in_dim)
      : weight(out_dim, in_dim),
        bias(out_dim, 0.0),
        weight_grad(out_dim, in_dim),
        bias_grad(out_dim, 0.0) {}

  std::size_t in_dim() const { return weight.cols; }
  std::size_t out_dim() const { return weight.rows; }

  void forward(const Vec& x, Vec& y) const {
    require_size(x, in_dim(), "LinearLayer::forward input");
    y.resize(out_dim());
    const std::size_t in = in_dim();
    for (std::size_t i = 0; i < out_dim(); ++i) {
      const double* w = &weight.data[i * in];
      double acc = bias[i];
      for (std::size_t j = 0; j < in; ++j) acc += w[j] * x[j];
      y[i] = acc;
    }
  }

  // x is the input the forward pass saw; dx (optional) receives dL/dx.
  void backward(const Vec& x, const Vec& dy, Vec* dx) {
    require_size(x, in_dim(), "LinearLayer::backward input");
    require_size(dy, out_dim(), "LinearLayer::backward upstream");
    const std::size_t in = in_dim();
    if (dx) dx->assign(in, 0.0);
    for (std::size_t i = 0; i < out_dim(); ++i) {
      const double g = dy[i];
      bias_grad[i] += g;
      double* wg = &weight_grad.data[i * in];
      const double* w = &weight.data[i * in];
      if (dx) {
        double* dxp = dx->data();
        for (std::size_t j = 0; j < in; ++j) {
          wg[j] += g * x[j];
          dxp[j] += g * w[j];
        }
      } else {
        for (std::size_t j = 0; j < in; ++j) wg[j] += g * x[j];
      }
    }
  }

  void zero_grad() {
    weight_grad.fill(0.0);
    std::fill(bias_grad.begin(), bias_grad.end(), 0.0);
  }

  void collect_params(const std::string& prefix, ParamList& out) {
    out.push_back({prefix + ".weight",
                   {weight.rows, weight.cols},
                   weight.data.data(),
                   weight_grad.data.data(),
                   weight.size()});
    out.push_back({prefix + ".bias", {bias.size()}, bias.data(), bias_grad.data(), bias.size()});
  }
};

// Weights ~ Uniform(+-sqrt(6/(fan_in+fan_out))), biases zero.
inline void xavier_init(LinearLayer& layer, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
  for (auto& w : layer.weight.data) w = rng.uniform(-bound, bound);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

}  // namespace taco::nn
