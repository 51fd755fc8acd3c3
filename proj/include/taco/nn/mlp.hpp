#pragma once

#include <string>
#include <vector>

#include "taco/core/rng.hpp"
#include "taco/nn/activations.hpp"
#include "taco/nn/linear.hpp"

namespace taco::nn {

// Plain feed-forward stack: linear layers with GELU between them and a raw
// linear output. The post-activation input to the final layer (the
// penultimate activation) is exposed through the tape; policies use it as
// their internal representation.
struct Mlp {
  std::vector<LinearLayer> layers;

  explicit Mlp(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw ContractViolation("Mlp needs at least two dims");
    layers.reserve(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i + 1], dims[i]);
  }

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t penultimate_dim() const { return layers.back().in_dim(); }

  void init(Rng& rng) {
    for (auto& layer : layers) xavier_init(layer, rng);
  }

  struct Tape {
    std::vector<Vec> inputs;  // inputs[i] is what layers[i] consumed
    std::vector<Vec> pre;     // pre[i] is layers[i]'s linear output
  };

  void forward(const Vec& x, Vec& out, Tape* tape) const {
    const std::size_t n_layers = layers.size();
    if (tape) {
      tape->inputs.assign(n_layers, {});
      tape->pre.assign(n_layers, {});
    }
    Vec cur = x;
    for (std::size_t i = 0; i < n_layers; ++i) {
      if (tape) tape->inputs[i] = cur;
      Vec lin;
      layers[i].forward(cur, lin);
      if (tape) tape->pre[i] = lin;
      if (i + 1 < n_layers) {
        gelu(lin, cur);
      } else {
        out = std::move(lin);
      }
    }
  }

  // Post-GELU activation feeding the final layer.
  const Vec& penultimate(const Tape& tape) const { return tape.inputs.back(); }

  void backward(const Tape& tape, const Vec& dout, Vec* dx) {
    Vec d = dout;
    for (std::size_t ri = layers.size(); ri-- > 0;) {
      Vec dprev;
      layers[ri].backward(tape.inputs[ri], d, &dprev);
      if (ri == 0) {
        if (dx) *dx = std::move(dprev);
        return;
      }
      const Vec& pre = tape.pre[ri - 1];
      d.resize(dprev.size());
      for (std::size_t j = 0; j < dprev.size(); ++j) d[j] = dprev[j] * gelu_grad(pre[j]);
    }
  }

  void zero_grad() {
    for (auto& layer : layers) layer.zero_grad();
  }

  void collect_params(const std::string& prefix, ParamList& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].collect_params(prefix + ".fc" + std::to_string(i), out);
    }
  }
};

}  // namespace taco::nn
