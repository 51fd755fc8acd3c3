#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/checkpoint.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/nn/onecycle.hpp"
#include "taco/tasks/dataset.hpp"

namespace taco::policy {

using nn::Vec;

struct FlowPolicyConfig {
  std::size_t context_dim = 0;
  std::size_t action_dim = 0;
  std::size_t instruction_count = 1;
  std::size_t embed_dim = 16;
  std::size_t cache_dim = 64;
  std::size_t feat_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t integration_steps = 10;
};

// Precomputed context encoding shared across all candidate generations for
// one decision step.
struct ContextCache {
  Vec encoding;
  std::string source_digest;
};

struct PolicyOutput {
  Vec action;
  Vec feature;  // penultimate velocity-head activation from the pass that produced the action
};

// a_sigma = sigma * a + (1 - sigma) * eps
inline Vec corrupt_action(const Vec& action, double sigma, const Vec& noise) {
  if (sigma < 0.0 || sigma > 1.0) throw ContractViolation("corrupt_action: sigma outside [0,1]");
  nn::require_size(noise, action.size(), "corrupt_action noise");
  Vec out(action.size());
  for (std::size_t i = 0; i < action.size(); ++i)
    out[i] = sigma * action[i] + (1.0 - sigma) * noise[i];
  return out;
}

// Explicit Euler from u=0 to u=1: x <- x + (1/steps) * v(u, x). Returns the
// endpoint; `last_feature` (optional) receives whatever the velocity
// callback stored for its final evaluation.
inline Vec euler_integrate(
    const std::function<void(double u, const Vec& x, Vec& v_out)>& velocity, const Vec& start,
    std::size_t steps) {
  if (steps < 1) throw ContractViolation("euler_integrate: steps must be >= 1");
  Vec x = start;
  Vec v(x.size());
  const double dt = 1.0 / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double u = static_cast<double>(s) * dt;
    velocity(u, x, v);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
    if (!nn::all_finite(x)) throw SamplingError("non-finite state during flow integration");
  }
  return x;
}

// Conditional rectified-flow policy. The context tower (instruction
// embedding + encoder MLP) produces a reusable cache; the velocity head
// consumes (cache, action state, time) and exposes its penultimate
// activation as the internal representation.
class FlowPolicy {
 public:
  FlowPolicy(const FlowPolicyConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        instr_embed_(cfg.instruction_count, cfg.embed_dim),
        instr_embed_grad_(cfg.instruction_count, cfg.embed_dim),
        encoder_({cfg.context_dim + cfg.embed_dim, cfg.hidden_dim, cfg.hidden_dim, cfg.cache_dim}),
        velocity_head_({cfg.cache_dim + cfg.action_dim + 1, cfg.hidden_dim, cfg.feat_dim,
                        cfg.action_dim}) {
    for (auto& v : instr_embed_.data) v = 0.1 * init_rng.normal();
    encoder_.init(init_rng);
    velocity_head_.init(init_rng);
  }

  const FlowPolicyConfig& config() const { return cfg_; }

  ContextCache encode_context(const Vec& context, int instruction) const {
    nn::require_size(context, cfg_.context_dim, "encode_context context");
    if (instruction < 0 || static_cast<std::size_t>(instruction) >= cfg_.instruction_count)
      throw ContractViolation("encode_context: instruction id out of range");
    ++encoder_calls_;
    ContextCache cache;
    encoder_.forward(encoder_input(context, instruction), cache.encoding, nullptr);
    Fnv1a h;
    h.update(context);
    h.update_u64(static_cast<std::uint64_t>(instruction));
    cache.source_digest = h.hex();
    return cache;
  }

  // Single velocity evaluation; `feature` (optional) receives the
  // penultimate activation of this evaluation.
  void velocity(const ContextCache& cache, const Vec& x, double u, Vec& v_out,
                Vec* feature) const {
    nn::require_size(cache.encoding, cfg_.cache_dim, "velocity cache");
    nn::require_size(x, cfg_.action_dim, "velocity state");
    nn::Mlp::Tape tape;
    velocity_head_.forward(velocity_input(cache.encoding, x, u), v_out,
                           feature ? &tape : nullptr);
    if (feature) *feature = velocity_head_.penultimate(tape);
  }

  PolicyOutput sample_action(const ContextCache& cache, const Vec& noise,
                             std::size_t steps) const {
    nn::require_size(noise, cfg_.action_dim, "sample_action noise");
    PolicyOutput out;
    const double dt = 1.0 / static_cast<double>(steps == 0 ? 1 : steps);
    if (steps < 1) throw ContractViolation("sample_action: steps must be >= 1");
    Vec x = noise;
    Vec v(x.size());
    for (std::size_t s = 0; s < steps; ++s) {
      const double u = static_cast<double>(s) * dt;
      const bool last = (s + 1 == steps);
      velocity(cache, x, u, v, last ? &out.feature : nullptr);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * v[i];
      if (!nn::all_finite(x)) throw SamplingError("non-finite action state while sampling");
    }
    out.action = std::move(x);
    return out;
  }

  // One-step clean-point extrapolation from a corrupted action at noise
  // level sigma: a_pre = a_sigma + (1 - sigma) * v(sigma, a_sigma).
  std::pair<Vec, Vec> denoise_once(const ContextCache& cache, const Vec& a_sigma,
                                   double sigma) const {
    if (sigma < 0.0 || sigma >= 1.0) throw ContractViolation("denoise_once: sigma outside [0,1)");
    Vec v, feature;
    velocity(cache, a_sigma, sigma, v, &feature);
    Vec a_pre(a_sigma.size());
    for (std::size_t i = 0; i < a_sigma.size(); ++i)
      a_pre[i] = a_sigma[i] + (1.0 - sigma) * v[i];
    return {std::move(a_pre), std::move(feature)};
  }

  std::uint64_t encoder_call_count() const { return encoder_calls_; }
  void reset_encoder_call_count() const { encoder_calls_ = 0; }

  nn::ParamList params() {
    nn::ParamList out;
    out.push_back({"instr_embed",
                   {instr_embed_.rows, instr_embed_.cols},
                   instr_embed_.data.data(),
                   instr_embed_grad_.data.data(),
                   instr_embed_.size()});
    encoder_.collect_params("encoder", out);
    velocity_head_.collect_params("velocity", out);
    return out;
  }

  void zero_grad() {
    instr_embed_grad_.fill(0.0);
    encoder_.zero_grad();
    velocity_head_.zero_grad();
  }

  std::string param_digest() {
    auto p = params();
    return nn::params_digest(p);
  }

  void save(const std::filesystem::path& path, std::map<std::string, std::string> meta) {
    meta["kind"] = "flow-policy";
    meta["context_dim"] = std::to_string(cfg_.context_dim);
    meta["action_dim"] = std::to_string(cfg_.action_dim);
    meta["instruction_count"] = std::to_string(cfg_.instruction_count);
    meta["embed_dim"] = std::to_string(cfg_.embed_dim);
    meta["cache_dim"] = std::to_string(cfg_.cache_dim);
    meta["feat_dim"] = std::to_string(cfg_.feat_dim);
    meta["hidden_dim"] = std::to_string(cfg_.hidden_dim);
    meta["integration_steps"] = std::to_string(cfg_.integration_steps);
    auto p = params();
    nn::save_checkpoint(path, p, meta);
  }

  static FlowPolicy load(const std::filesystem::path& path,
                         std::map<std::string, std::string>* meta_out = nullptr) {
    const nn::CheckpointData data = nn::load_checkpoint(path);
    FlowPolicyConfig cfg;
    cfg.context_dim = std::stoul(data.meta.at("context_dim"));
    cfg.action_dim = std::stoul(data.meta.at("action_dim"));
    cfg.instruction_count = std::stoul(data.meta.at("instruction_count"));
    cfg.embed_dim = std::stoul(data.meta.at("embed_dim"));
    cfg.cache_dim = std::stoul(data.meta.at("cache_dim"));
    cfg.feat_dim = std::stoul(data.meta.at("feat_dim"));
    cfg.hidden_dim = std::stoul(data.meta.at("hidden_dim"));
    cfg.integration_steps = std::stoul(data.meta.at("integration_steps"));
    Rng dummy(0);
    FlowPolicy policy(cfg, dummy);
    auto params = policy.params();
    nn::load_into(data, params);
    if (meta_out) *meta_out = data.meta;
    return policy;
  }

  // Training-time access for backprop through encoder and embedding.
  Vec encoder_input(const Vec& context, int instruction) const {
    Vec in(cfg_.context_dim + cfg_.embed_dim);
    std::copy(context.begin(), context.end(), in.begin());
    const double* row = &instr_embed_.data[static_cast<std::size_t>(instruction) * cfg_.embed_dim];
    std::copy(row, row + cfg_.embed_dim, in.begin() + static_cast<std::ptrdiff_t>(cfg_.context_dim));
    return in;
  }

  Vec velocity_input(const Vec& cache_encoding, const Vec& x, double u) const {
    Vec in(cfg_.cache_dim + cfg_.action_dim + 1);
    std::copy(cache_encoding.begin(), cache_encoding.end(), in.begin());
    std::copy(x.begin(), x.end(), in.begin() + static_cast<std::ptrdiff_t>(cfg_.cache_dim));
    in.back() = u;
    return in;
  }

  nn::Mlp& encoder() { return encoder_; }
  const nn::Mlp& encoder() const { return encoder_; }
  nn::Mlp& velocity_head() { return velocity_head_; }
  const nn::Mlp& velocity_head() const { return velocity_head_; }

  void accumulate_embed_grad(int instruction, const Vec& d_embed) {
    double* row = &instr_embed_grad_.data[static_cast<std::size_t>(instruction) * cfg_.embed_dim];
    for (std::size_t i = 0; i < cfg_.embed_dim; ++i) row[i] += d_embed[i];
  }

 private:
  FlowPolicyConfig cfg_;
  nn::Matrix instr_embed_;       // instruction_count x embed_dim
  nn::Matrix instr_embed_grad_;
  nn::Mlp encoder_;
  nn::Mlp velocity_head_;
  mutable std::uint64_t encoder_calls_ = 0;
};

struct FlowTrainConfig {
  std::size_t steps = 12000;
  std::size_t batch = 64;
  double initial_lr = 1e-4;
  double max_lr = 1e-3;
  std::uint64_t seed = 1;
};

struct TrainStats {
  std::vector<double> losses;  // one entry per optimizer step
};

// Rectified-flow regression: v(sigma, sigma*a + (1-sigma)*eps | o, l)
// toward the target a - eps, sigma ~ U(0,1), eps ~ N(0,I).
inline TrainStats train_flow(FlowPolicy& policy, const tasks::Dataset& data,
                             const FlowTrainConfig& cfg) {
  if (data.rows.empty()) throw ContractViolation("train_flow: empty dataset");
  const auto& pc = policy.config();
  nn::ParamList params = policy.params();
  nn::AdamState adam;
  adam.init(params);
  nn::OneCycleSchedule sched{cfg.initial_lr, cfg.max_lr, cfg.steps == 0 ? 1 : cfg.steps};
  Rng rng(cfg.seed);
  TrainStats stats;
  stats.losses.reserve(cfg.steps);
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    policy.zero_grad();
    double loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto& row = data.rows[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(data.rows.size())))];
      const double sigma = rng.uniform();
      Vec eps(pc.action_dim);
      rng.fill_normal(eps);
      const Vec x = corrupt_action(row.action, sigma, eps);

      nn::Mlp::Tape enc_tape;
      Vec cache;
      policy.encoder().forward(policy.encoder_input(row.context, row.instruction), cache,
                               &enc_tape);
      nn::Mlp::Tape vel_tape;
      Vec v;
      policy.velocity_head().forward(policy.velocity_input(cache, x, sigma), v, &vel_tape);

      Vec dv(pc.action_dim);
      for (std::size_t i = 0; i < pc.action_dim; ++i) {
        const double target = row.action[i] - eps[i];
        const double r = v[i] - target;
        loss += r * r * inv_batch;
        dv[i] = 2.0 * r * inv_batch;
      }
      Vec d_vel_in;
      policy.velocity_head().backward(vel_tape, dv, &d_vel_in);
      Vec d_cache(d_vel_in.begin(), d_vel_in.begin() + static_cast<std::ptrdiff_t>(pc.cache_dim));
      Vec d_enc_in;
      policy.encoder().backward(enc_tape, d_cache, &d_enc_in);
      Vec d_embed(d_enc_in.begin() + static_cast<std::ptrdiff_t>(pc.context_dim), d_enc_in.end());
      policy.accumulate_embed_grad(row.instruction, d_embed);
    }
    if (!std::isfinite(loss)) throw TrainingError("flow training loss diverged");
    adam_step(params, adam, onecycle_lr(sched, step + 1));
    stats.losses.push_back(loss);
  }
  return stats;
}

}  // namespace taco::policy
