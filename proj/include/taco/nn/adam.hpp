#pragma once

#include <cmath>
#include <vector>

#include "taco/nn/linear.hpp"

namespace taco::nn {

// Adam with bias correction. Moment buffers are laid out in the same order
// as the parameter list handed to init().
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step_count = 0;
  std::vector<Vec> m;
  std::vector<Vec> v;

  void init(const ParamList& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.size, 0.0);
      v.emplace_back(p.size, 0.0);
    }
    step_count = 0;
  }

  bool initialized() const { return !m.empty(); }
};

inline void adam_step(ParamList& params, AdamState& state, double lr) {
  if (lr <= 0.0) throw ContractViolation("adam_step: lr must be positive");
  if (!state.initialized()) state.init(params);
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state/param count mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t t = 0; t < params.size(); ++t) {
    ParamView& p = params[t];
    Vec& m = state.m[t];
    Vec& v = state.v[t];
    if (m.size() != p.size) throw ShapeError("adam_step: moment shape mismatch for " + p.name);
    for (std::size_t k = 0; k < p.size; ++k) {
      const double g = p.grad[k];
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + p.name);
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p.value[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

inline void zero_grads(ParamList& params) {
  for (auto& p : params) std::fill(p.grad, p.grad + p.size, 0.0);
}

}  // namespace taco::nn
