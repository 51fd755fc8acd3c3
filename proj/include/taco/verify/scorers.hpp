#pragma once

#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "taco/cfn/cfn.hpp"
#include "taco/cfn/rnd.hpp"
#include "taco/core/errors.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/policy/flow_policy.hpp"
#include "taco/search/feature_search.hpp"
#include "taco/tasks/task_spec.hpp"

namespace taco::verify {

using nn::Vec;
using policy::PolicyOutput;

// A candidate scorer maps (context, instruction, candidate) to a real
// score; larger means preferred.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const Vec& context, int instruction,
                       const PolicyOutput& candidate) const = 0;
  virtual std::string kind() const = 0;
};

class CfnScorer : public Scorer {
 public:
  explicit CfnScorer(const cfn::CfnNetwork* net, std::string kind_name = "cfn")
      : net_(net), kind_(std::move(kind_name)) {}

  double score(const Vec&, int, const PolicyOutput& candidate) const override {
    return net_->pseudo_count(candidate.feature);
  }

  std::string kind() const override { return kind_; }

 private:
  const cfn::CfnNetwork* net_;
  std::string kind_;
};

class RndScorer : public Scorer {
 public:
  explicit RndScorer(const cfn::RndCounter* counter) : counter_(counter) {}

  double score(const Vec&, int, const PolicyOutput& candidate) const override {
    return counter_->novelty_count(candidate.feature);
  }

  std::string kind() const override { return "rnd"; }

 private:
  const cfn::RndCounter* counter_;
};

// Table-5 "w/o CFN" arm: a regressor trained to predict the feature-search
// residual from the feature; candidates with smaller predicted error score
// higher.
class DistanceRegressorScorer : public Scorer {
 public:
  explicit DistanceRegressorScorer(const nn::Mlp* regressor) : regressor_(regressor) {}

  double score(const Vec&, int, const PolicyOutput& candidate) const override {
    Vec out;
    regressor_->forward(candidate.feature, out, nullptr);
    return -out[0];
  }

  std::string kind() const override { return "distance-regressor"; }

 private:
  const nn::Mlp* regressor_;
};

// Idealized ceiling: score by the exact mixture density of the candidate
// action under the task.
class DensityOracleScorer : public Scorer {
 public:
  explicit DensityOracleScorer(const tasks::TaskSpec* task) : task_(task) {}

  double score(const Vec& context, int, const PolicyOutput& candidate) const override {
    return tasks::exact_density(*task_, context, candidate.action);
  }

  std::string kind() const override { return "exact-density-oracle"; }

 private:
  const tasks::TaskSpec* task_;
};

inline nn::Mlp train_distance_regressor(const search::FeatureDataset& features,
                                        std::size_t hidden_dim, std::size_t epochs,
                                        std::size_t batch, std::uint64_t seed) {
  if (features.rows.empty())
    throw ContractViolation("train_distance_regressor: empty feature set");
  nn::Mlp reg({features.feat_dim, hidden_dim, 1});
  Rng rng(seed);
  reg.init(rng);
  nn::ParamList params;
  reg.collect_params("regressor", params);
  nn::AdamState adam;
  adam.init(params);
  const std::size_t n = features.rows.size();
  const std::size_t eff_batch = std::max<std::size_t>(1, std::min(batch, n));
  const std::size_t steps = std::max<std::size_t>(1, epochs * ((n + eff_batch - 1) / eff_batch));
  nn::OneCycleSchedule sched{1e-4, 1e-3, steps};
  const double inv_batch = 1.0 / static_cast<double>(eff_batch);
  for (std::size_t step = 0; step < steps; ++step) {
    reg.zero_grad();
    double loss = 0.0;
    for (std::size_t b = 0; b < eff_batch; ++b) {
      const auto& row =
          features.rows[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n)))];
      nn::Mlp::Tape tape;
      Vec out;
      reg.forward(row.feature, out, &tape);
      const double r = out[0] - row.residual;
      loss += r * r * inv_batch;
      Vec dout{2.0 * r * inv_batch};
      reg.backward(tape, dout, nullptr);
    }
    if (!std::isfinite(loss)) throw TrainingError("distance regressor loss diverged");
    adam_step(params, adam, nn::onecycle_lr(sched, step + 1));
  }
  return reg;
}

// Table-5 "w/o internal feature" arm: a separate MLP encoder over the raw
// (context, action) pair, trained jointly with the CFN head on the same
// per-row coins.
class RawEncoderCfn {
 public:
  RawEncoderCfn(std::size_t context_dim, std::size_t action_dim, std::size_t feat_dim,
                std::size_t encoder_hidden, const cfn::CfnConfig& cfg, Rng& init_rng)
      : context_dim_(context_dim),
        action_dim_(action_dim),
        encoder_({context_dim + action_dim, encoder_hidden, feat_dim}),
        net_(feat_dim, cfg, init_rng) {
    encoder_.init(init_rng);
  }

  Vec encode(const Vec& context, const Vec& action) const {
    Vec in(context_dim_ + action_dim_);
    std::copy(context.begin(), context.end(), in.begin());
    std::copy(action.begin(), action.end(), in.begin() + static_cast<std::ptrdiff_t>(context_dim_));
    Vec out;
    encoder_.forward(in, out, nullptr);
    return out;
  }

  double pseudo_count(const Vec& context, const Vec& action) const {
    return net_.pseudo_count(encode(context, action));
  }

  const cfn::CfnNetwork& net() const { return net_; }

  void train(const tasks::Dataset& data, std::uint64_t seed) {
    if (data.rows.empty()) throw ContractViolation("RawEncoderCfn::train: empty dataset");
    const std::size_t n = data.rows.size();
    Rng rng(seed);
    // Prior normalizer is fit once on the initial encoder's outputs.
    std::vector<Vec> init_features;
    init_features.reserve(n);
    for (const auto& row : data.rows) init_features.push_back(encode(row.context, row.action));
    net_.fit_prior_normalizer(init_features);

    Rng coin_rng = rng.fork(1);
    std::vector<cfn::CoinTarget> coins;
    coins.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      coins.push_back(cfn::draw_coins(net_.output_dim(), coin_rng));

    nn::ParamList params = net_.trainable_params();
    encoder_.collect_params("encoder", params);
    nn::AdamState adam;
    adam.init(params);
    const auto& cfg = net_.config();
    const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch, n));
    const std::size_t steps =
        std::max<std::size_t>(1, cfg.epochs * ((n + batch - 1) / batch));
    nn::OneCycleSchedule sched{cfg.initial_lr, cfg.max_lr, steps};
    Rng sample_rng = rng.fork(2);
    Rng dropout_rng = rng.fork(3);
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t step = 0; step < steps; ++step) {
      net_.zero_grad();
      encoder_.zero_grad();
      double loss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t row =
            static_cast<std::size_t>(sample_rng.uniform_int(static_cast<int>(n)));
        Vec in(context_dim_ + action_dim_);
        std::copy(data.rows[row].context.begin(), data.rows[row].context.end(), in.begin());
        std::copy(data.rows[row].action.begin(), data.rows[row].action.end(),
                  in.begin() + static_cast<std::ptrdiff_t>(context_dim_));
        nn::Mlp::Tape enc_tape;
        Vec feature;
        encoder_.forward(in, feature, &enc_tape);
        cfn::CfnNetwork::TrainTapes cfn_tapes;
        const Vec f = net_.forward_train(feature, dropout_rng, cfn_tapes);
        Vec df(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
          const double r = f[i] - coins[row][i];
          loss += r * r * inv_batch;
          df[i] = 2.0 * r * inv_batch;
        }
        Vec d_feature;
        net_.backward(cfn_tapes, df, d_feature);
        encoder_.backward(enc_tape, d_feature, nullptr);
      }
      if (!std::isfinite(loss)) throw TrainingError("raw-encoder CFN loss diverged");
      adam_step(params, adam, nn::onecycle_lr(sched, step + 1));
    }
  }

  nn::ParamList all_params() {
    nn::ParamList out = net_.all_params();
    encoder_.collect_params("encoder", out);
    return out;
  }

 private:
  std::size_t context_dim_;
  std::size_t action_dim_;
  nn::Mlp encoder_;
  cfn::CfnNetwork net_;
};

class RawEncoderScorer : public Scorer {
 public:
  explicit RawEncoderScorer(const RawEncoderCfn* model) : model_(model) {}

  double score(const Vec& context, int, const PolicyOutput& candidate) const override {
    return model_->pseudo_count(context, candidate.action);
  }

  std::string kind() const override { return "raw-encoder"; }

 private:
  const RawEncoderCfn* model_;
};

}  // namespace taco::verify
