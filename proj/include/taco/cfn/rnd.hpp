#pragma once

#include <cmath>
#include <vector>

#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/checkpoint.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/nn/onecycle.hpp"

namespace taco::cfn {

struct RndConfig {
  std::size_t output_dim = 20;
  std::size_t hidden_dim = 128;
  std::size_t epochs = 16;
  std::size_t batch = 512;
  double initial_lr = 1e-4;
  double max_lr = 1e-3;
};

// Random Network Distillation counter: a fixed random target network and a
// trained predictor; the squared prediction error is the novelty, and the
// count surrogate is its reciprocal.
class RndCounter {
 public:
  RndCounter(std::size_t feat_dim, const RndConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        target_({feat_dim, cfg.hidden_dim, cfg.output_dim}),
        predictor_({feat_dim, cfg.hidden_dim, cfg.output_dim}) {
    target_.init(init_rng);
    predictor_.init(init_rng);
  }

  const RndConfig& config() const { return cfg_; }

  double novelty(const nn::Vec& h) const {
    nn::Vec t, p;
    target_.forward(h, t, nullptr);
    predictor_.forward(h, p, nullptr);
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double r = p[i] - t[i];
      acc += r * r;
    }
    return acc;
  }

  double novelty_count(const nn::Vec& h) const {
    constexpr double kEps = 1e-8;
    return 1.0 / (novelty(h) + kEps);
  }

  std::string target_digest() {
    nn::ParamList p;
    target_.collect_params("target", p);
    return nn::params_digest(p);
  }

  void train(const std::vector<nn::Vec>& features, std::uint64_t seed) {
    if (features.empty()) throw ContractViolation("RndCounter::train: empty feature set");
    nn::ParamList params;
    predictor_.collect_params("predictor", params);
    nn::AdamState adam;
    adam.init(params);
    const std::size_t n = features.size();
    const std::size_t batch = std::max<std::size_t>(1, std::min(cfg_.batch, n));
    const std::size_t steps = std::max<std::size_t>(1, cfg_.epochs * ((n + batch - 1) / batch));
    nn::OneCycleSchedule sched{cfg_.initial_lr, cfg_.max_lr, steps};
    Rng rng(seed);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t step = 0; step < steps; ++step) {
      predictor_.zero_grad();
      double loss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& h = features[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)))];
        nn::Vec t, p;
        target_.forward(h, t, nullptr);
        nn::Mlp::Tape tape;
        predictor_.forward(h, p, &tape);
        nn::Vec dp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double r = p[i] - t[i];
          loss += r * r * inv_batch;
          dp[i] = 2.0 * r * inv_batch;
        }
        predictor_.backward(tape, dp, nullptr);
      }
      if (!std::isfinite(loss)) throw TrainingError("RND training loss diverged");
      adam_step(params, adam, nn::onecycle_lr(sched, step + 1));
    }
  }

  nn::ParamList all_params() {
    nn::ParamList out;
    target_.collect_params("target", out);
    predictor_.collect_params("predictor", out);
    return out;
  }

 private:
  RndConfig cfg_;
  nn::Mlp target_;
  nn::Mlp predictor_;
};

}  // namespace taco::cfn
