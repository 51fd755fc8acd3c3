#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/nn/onecycle.hpp"
#include "taco/policy/flow_policy.hpp"
#include "taco/tasks/dataset.hpp"

namespace taco::policy {

struct CategoricalPolicyConfig {
  std::size_t context_dim = 0;
  std::size_t action_dim = 0;
  std::size_t instruction_count = 1;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 128;
  std::size_t cache_dim = 64;
  std::size_t bins = 21;
  double grid_lo = -2.0;
  double grid_hi = 3.0;
  double temperature = 1.0;
};

// Autoregressive-branch stand-in: per-dimension softmax over a fixed action
// grid. The feature is the encoder's final hidden activation concatenated
// with the sampled action's grid centers.
class CategoricalPolicy {
 public:
  CategoricalPolicy(const CategoricalPolicyConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        instr_embed_(cfg.instruction_count, cfg.embed_dim),
        instr_embed_grad_(cfg.instruction_count, cfg.embed_dim),
        encoder_({cfg.context_dim + cfg.embed_dim, cfg.hidden_dim, cfg.cache_dim}),
        logits_(cfg.action_dim * cfg.bins, cfg.cache_dim) {
    if (cfg.bins < 2) throw ContractViolation("CategoricalPolicy: need at least 2 bins");
    for (auto& v : instr_embed_.data) v = 0.1 * init_rng.normal();
    encoder_.init(init_rng);
    nn::xavier_init(logits_, init_rng);
  }

  const CategoricalPolicyConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return cfg_.cache_dim + cfg_.action_dim; }

  double bin_center(std::size_t bin) const {
    const double width = (cfg_.grid_hi - cfg_.grid_lo) / static_cast<double>(cfg_.bins);
    return cfg_.grid_lo + (static_cast<double>(bin) + 0.5) * width;
  }

  std::size_t nearest_bin(double value) const {
    const double width = (cfg_.grid_hi - cfg_.grid_lo) / static_cast<double>(cfg_.bins);
    const double idx = std::floor((value - cfg_.grid_lo) / width);
    if (idx < 0.0) return 0;
    if (idx >= static_cast<double>(cfg_.bins)) return cfg_.bins - 1;
    return static_cast<std::size_t>(idx);
  }

  // Per-dimension softmax probabilities at the given temperature.
  std::vector<Vec> action_distribution(const Vec& context, int instruction,
                                       double temperature) const {
    if (temperature <= 0.0)
      throw ContractViolation("action_distribution: temperature must be positive");
    Vec hidden, logits;
    encoder_.forward(encoder_input(context, instruction), hidden, nullptr);
    logits_.forward(hidden, logits);
    std::vector<Vec> probs(cfg_.action_dim, Vec(cfg_.bins));
    for (std::size_t d = 0; d < cfg_.action_dim; ++d) {
      const double* row = &logits[d * cfg_.bins];
      double max_logit = row[0];
      for (std::size_t b = 1; b < cfg_.bins; ++b) max_logit = std::max(max_logit, row[b]);
      double z = 0.0;
      for (std::size_t b = 0; b < cfg_.bins; ++b) {
        probs[d][b] = std::exp((row[b] - max_logit) / temperature);
        z += probs[d][b];
      }
      for (std::size_t b = 0; b < cfg_.bins; ++b) probs[d][b] /= z;
    }
    return probs;
  }

  // temperature == 0 is the declared argmax mode.
  PolicyOutput sample(const Vec& context, int instruction, double temperature, Rng& rng) const {
    Vec hidden, logits;
    encoder_.forward(encoder_input(context, instruction), hidden, nullptr);
    logits_.forward(hidden, logits);
    PolicyOutput out;
    out.action.resize(cfg_.action_dim);
    for (std::size_t d = 0; d < cfg_.action_dim; ++d) {
      const double* row = &logits[d * cfg_.bins];
      std::size_t chosen = 0;
      if (temperature <= 0.0) {
        for (std::size_t b = 1; b < cfg_.bins; ++b)
          if (row[b] > row[chosen]) chosen = b;
      } else {
        double max_logit = row[0];
        for (std::size_t b = 1; b < cfg_.bins; ++b) max_logit = std::max(max_logit, row[b]);
        Vec probs(cfg_.bins);
        double z = 0.0;
        for (std::size_t b = 0; b < cfg_.bins; ++b) {
          probs[b] = std::exp((row[b] - max_logit) / temperature);
          z += probs[b];
        }
        for (auto& p : probs) p /= z;
        chosen = rng.categorical(probs);
      }
      out.action[d] = bin_center(chosen);
    }
    out.feature = make_feature(hidden, out.action);
    return out;
  }

  // Feature for a dataset action: same path the sampler uses, with the
  // action snapped to its grid centers.
  Vec feature_for(const Vec& context, int instruction, const Vec& action) const {
    Vec hidden;
    encoder_.forward(encoder_input(context, instruction), hidden, nullptr);
    Vec snapped(cfg_.action_dim);
    for (std::size_t d = 0; d < cfg_.action_dim; ++d)
      snapped[d] = bin_center(nearest_bin(action[d]));
    return make_feature(hidden, snapped);
  }

  nn::ParamList params() {
    nn::ParamList out;
    out.push_back({"instr_embed",
                   {instr_embed_.rows, instr_embed_.cols},
                   instr_embed_.data.data(),
                   instr_embed_grad_.data.data(),
                   instr_embed_.size()});
    encoder_.collect_params("encoder", out);
    logits_.collect_params("logits", out);
    return out;
  }

  void zero_grad() {
    instr_embed_grad_.fill(0.0);
    encoder_.zero_grad();
    logits_.zero_grad();
  }

  // Cross-entropy over the binned dataset actions.
  TrainStats train(const tasks::Dataset& data, std::size_t steps, std::size_t batch,
                   std::uint64_t seed) {
    if (data.rows.empty()) throw ContractViolation("CategoricalPolicy::train: empty dataset");
    nn::ParamList param_list = params();
    nn::AdamState adam;
    adam.init(param_list);
    nn::OneCycleSchedule sched{1e-4, 1e-3, steps == 0 ? 1 : steps};
    Rng rng(seed);
    TrainStats stats;
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t step = 0; step < steps; ++step) {
      zero_grad();
      double loss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& row = data.rows[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(data.rows.size())))];
        nn::Mlp::Tape enc_tape;
        Vec hidden, logits;
        encoder_.forward(encoder_input(row.context, row.instruction), hidden, &enc_tape);
        logits_.forward(hidden, logits);
        Vec dlogits(logits.size(), 0.0);
        for (std::size_t d = 0; d < cfg_.action_dim; ++d) {
          const std::size_t target = nearest_bin(row.action[d]);
          const double* lrow = &logits[d * cfg_.bins];
          double max_logit = lrow[0];
          for (std::size_t k = 1; k < cfg_.bins; ++k) max_logit = std::max(max_logit, lrow[k]);
          double z = 0.0;
          for (std::size_t k = 0; k < cfg_.bins; ++k) z += std::exp(lrow[k] - max_logit);
          const double log_z = std::log(z) + max_logit;
          loss += (log_z - lrow[target]) * inv_batch;
          for (std::size_t k = 0; k < cfg_.bins; ++k) {
            const double p = std::exp(lrow[k] - log_z);
            dlogits[d * cfg_.bins + k] =
                (p - (k == target ? 1.0 : 0.0)) * inv_batch;
          }
        }
        Vec d_hidden;
        logits_.backward(hidden, dlogits, &d_hidden);
        Vec d_enc_in;
        encoder_.backward(enc_tape, d_hidden, &d_enc_in);
        Vec d_embed(d_enc_in.begin() + static_cast<std::ptrdiff_t>(cfg_.context_dim),
                    d_enc_in.end());
        double* erow = &instr_embed_grad_.data[static_cast<std::size_t>(row.instruction) *
                                               cfg_.embed_dim];
        for (std::size_t i = 0; i < cfg_.embed_dim; ++i) erow[i] += d_embed[i];
      }
      if (!std::isfinite(loss)) throw TrainingError("categorical training loss diverged");
      adam_step(param_list, adam, onecycle_lr(sched, step + 1));
      stats.losses.push_back(loss);
    }
    return stats;
  }

  nn::LinearLayer& logits_layer() { return logits_; }

  void save(const std::filesystem::path& path, std::map<std::string, std::string> meta) {
    meta["kind"] = "categorical-policy";
    meta["context_dim"] = std::to_string(cfg_.context_dim);
    meta["action_dim"] = std::to_string(cfg_.action_dim);
    meta["instruction_count"] = std::to_string(cfg_.instruction_count);
    meta["embed_dim"] = std::to_string(cfg_.embed_dim);
    meta["hidden_dim"] = std::to_string(cfg_.hidden_dim);
    meta["cache_dim"] = std::to_string(cfg_.cache_dim);
    meta["bins"] = std::to_string(cfg_.bins);
    meta["grid_lo"] = io::fmt_double(cfg_.grid_lo);
    meta["grid_hi"] = io::fmt_double(cfg_.grid_hi);
    meta["temperature"] = io::fmt_double(cfg_.temperature);
    auto p = params();
    nn::save_checkpoint(path, p, meta);
  }

  static CategoricalPolicy load(const std::filesystem::path& path,
                                std::map<std::string, std::string>* meta_out = nullptr) {
    const nn::CheckpointData data = nn::load_checkpoint(path);
    CategoricalPolicyConfig cfg;
    cfg.context_dim = std::stoul(data.meta.at("context_dim"));
    cfg.action_dim = std::stoul(data.meta.at("action_dim"));
    cfg.instruction_count = std::stoul(data.meta.at("instruction_count"));
    cfg.embed_dim = std::stoul(data.meta.at("embed_dim"));
    cfg.hidden_dim = std::stoul(data.meta.at("hidden_dim"));
    cfg.cache_dim = std::stoul(data.meta.at("cache_dim"));
    cfg.bins = std::stoul(data.meta.at("bins"));
    cfg.grid_lo = io::parse_double(data.meta.at("grid_lo"));
    cfg.grid_hi = io::parse_double(data.meta.at("grid_hi"));
    cfg.temperature = io::parse_double(data.meta.at("temperature"));
    Rng dummy(0);
    CategoricalPolicy policy(cfg, dummy);
    auto params = policy.params();
    nn::load_into(data, params);
    if (meta_out) *meta_out = data.meta;
    return policy;
  }

  std::string param_digest() {
    auto p = params();
    return nn::params_digest(p);
  }

 private:
  Vec encoder_input(const Vec& context, int instruction) const {
    nn::require_size(context, cfg_.context_dim, "CategoricalPolicy context");
    Vec in(cfg_.context_dim + cfg_.embed_dim);
    std::copy(context.begin(), context.end(), in.begin());
    const double* row = &instr_embed_.data[static_cast<std::size_t>(instruction) * cfg_.embed_dim];
    std::copy(row, row + cfg_.embed_dim, in.begin() + static_cast<std::ptrdiff_t>(cfg_.context_dim));
    return in;
  }

  Vec make_feature(const Vec& hidden, const Vec& action) const {
    Vec feature(feature_dim());
    std::copy(hidden.begin(), hidden.end(), feature.begin());
    std::copy(action.begin(), action.end(),
              feature.begin() + static_cast<std::ptrdiff_t>(cfg_.cache_dim));
    return feature;
  }

  CategoricalPolicyConfig cfg_;
  nn::Matrix instr_embed_;
  nn::Matrix instr_embed_grad_;
  nn::Mlp encoder_;
  nn::LinearLayer logits_;
};

}  // namespace taco::policy
