#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/checkpoint.hpp"
#include "taco/nn/mlp_block.hpp"
#include "taco/nn/onecycle.hpp"

namespace taco::cfn {

using nn::Vec;

struct CfnConfig {
  std::size_t output_dim = 20;    // d
  std::size_t hidden_dim = 256;   // desk-scale default; 1536 preset available
  double feature_scale = 10.0;
  std::size_t epochs = 16;
  std::size_t batch = 512;
  std::size_t grad_accum = 2;
  double dropout_rate = 0.1;
  double initial_lr = 1e-4;
  double max_lr = 1e-3;
};

// Rademacher target vector, entries exactly +-1.
using CoinTarget = Vec;

inline CoinTarget draw_coins(std::size_t d, Rng& rng) {
  if (d < 1) throw ContractViolation("draw_coins: d must be >= 1");
  CoinTarget c(d);
  for (auto& v : c) v = rng.next_u64() & 1 ? 1.0 : -1.0;
  return c;
}

// Shared tower architecture: input projection + GELU + LayerNorm, one
// residual MLP block, output projection.
struct CfnTower {
  nn::LinearLayer in_proj;
  nn::LayerNorm in_norm;
  nn::MlpBlock block;
  nn::LinearLayer out_proj;

  CfnTower(std::size_t feat_dim, std::size_t hidden_dim, std::size_t out_dim, double dropout)
      : in_proj(hidden_dim, feat_dim),
        in_norm(hidden_dim),
        block(hidden_dim, dropout),
        out_proj(out_dim, hidden_dim) {}

  void init(Rng& rng) {
    nn::xavier_init(in_proj, rng);
    block.init(rng);
    nn::xavier_init(out_proj, rng);
  }

  struct Tape {
    Vec in;
    Vec pre_proj;
    Vec act_proj;
    Vec normed;
    Vec block_out;
    nn::LayerNorm::Tape ln;
    nn::MlpBlock::Tape block_tape;
  };

  void forward(const Vec& x, bool train, Rng& rng, Vec& out, Tape* tape) const {
    Tape local;
    Tape& t = tape ? *tape : local;
    t.in = x;
    in_proj.forward(x, t.pre_proj);
    nn::gelu(t.pre_proj, t.act_proj);
    in_norm.forward(t.act_proj, t.normed, tape ? &t.ln : nullptr);
    block.forward(t.normed, train, rng, t.block_out, tape ? &t.block_tape : nullptr);
    out_proj.forward(t.block_out, out);
  }

  Vec forward_eval(const Vec& x) const {
    Rng dummy(0);
    Vec out;
    forward(x, false, dummy, out, nullptr);
    return out;
  }

  // dx (optional) receives dL/dx.
  void backward(const Tape& tape, const Vec& dout, Vec* dx) {
    Vec dblock;
    out_proj.backward(tape.block_out, dout, &dblock);
    Vec dnormed;
    block.backward(tape.block_tape, dblock, dnormed);
    Vec dact;
    in_norm.backward(tape.ln, dnormed, dact);
    Vec dpre(dact.size());
    for (std::size_t i = 0; i < dact.size(); ++i) dpre[i] = dact[i] * nn::gelu_grad(tape.pre_proj[i]);
    in_proj.backward(tape.in, dpre, dx);
  }

  void zero_grad() {
    in_proj.zero_grad();
    in_norm.zero_grad();
    block.zero_grad();
    out_proj.zero_grad();
  }

  void collect_params(const std::string& prefix, nn::ParamList& out) {
    in_proj.collect_params(prefix + ".in_proj", out);
    in_norm.collect_params(prefix + ".in_norm", out);
    block.collect_params(prefix + ".block", out);
    out_proj.collect_params(prefix + ".out_proj", out);
  }
};

// Coin Flipping Network with a frozen random prior:
//   f(h) = f_hat(scale*h) + normalize(f_prior(scale*h))
// The prior is an independently initialized copy of the same tower, never
// updated; its per-dimension second moments over the training features are
// estimated once and frozen, making E[f_prior_i^2] = 1 so that unseen
// features start at a pseudo-count of ~1. The trainable tower's output
// projection starts at zero so a fresh network is exactly the normalized
// prior.
class CfnNetwork {
 public:
  CfnNetwork(std::size_t feat_dim, const CfnConfig& cfg, Rng& init_rng)
      : cfg_(cfg),
        feat_dim_(feat_dim),
        trainable_(feat_dim, cfg.hidden_dim, cfg.output_dim, cfg.dropout_rate),
        prior_(feat_dim, cfg.hidden_dim, cfg.output_dim, 0.0),
        prior_norm_(cfg.output_dim, 1.0) {
    trainable_.init(init_rng);
    trainable_.out_proj.weight.fill(0.0);
    std::fill(trainable_.out_proj.bias.begin(), trainable_.out_proj.bias.end(), 0.0);
    prior_.init(init_rng);
  }

  const CfnConfig& config() const { return cfg_; }
  std::size_t feat_dim() const { return feat_dim_; }
  std::size_t output_dim() const { return cfg_.output_dim; }

  Vec scaled_input(const Vec& h) const {
    nn::require_size(h, feat_dim_, "CfnNetwork input");
    Vec x(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) x[i] = cfg_.feature_scale * h[i];
    return x;
  }

  Vec prior_output(const Vec& h) const {
    Vec p = prior_.forward_eval(scaled_input(h));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= prior_norm_[i];
    return p;
  }

  // Eval-mode forward, pure.
  Vec forward(const Vec& h) const {
    const Vec x = scaled_input(h);
    Vec f = trainable_.forward_eval(x);
    Vec p = prior_.forward_eval(x);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += p[i] / prior_norm_[i];
    return f;
  }

  // Train-mode forward through the trainable tower (dropout active); the
  // prior always runs deterministically. The prior tape is kept so input
  // gradients can flow through both branches when the feature itself is
  // produced by an upstream trainable encoder.
  struct TrainTapes {
    CfnTower::Tape trainable;
    CfnTower::Tape prior;
  };

  Vec forward_train(const Vec& h, Rng& rng, CfnTower::Tape& tape) const {
    const Vec x = scaled_input(h);
    Vec f;
    trainable_.forward(x, true, rng, f, &tape);
    Vec p = prior_.forward_eval(x);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += p[i] / prior_norm_[i];
    return f;
  }

  Vec forward_train(const Vec& h, Rng& rng, TrainTapes& tapes) const {
    const Vec x = scaled_input(h);
    Vec f;
    trainable_.forward(x, true, rng, f, &tapes.trainable);
    Rng dummy(0);
    Vec p;
    prior_.forward(x, false, dummy, p, &tapes.prior);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += p[i] / prior_norm_[i];
    return f;
  }

  // Backward through the trainable tower only (pure CFN training).
  void backward(const CfnTower::Tape& tape, const Vec& dout) {
    trainable_.backward(tape, dout, nullptr);
  }

  // Backward with the input gradient: dL/dh flows through the trainable
  // tower, the (frozen) prior tower, and the feature scale. The prior's
  // parameter gradient buffers are scratch and zeroed afterwards.
  void backward(const TrainTapes& tapes, const Vec& dout, Vec& d_input) {
    Vec dx_trainable;
    trainable_.backward(tapes.trainable, dout, &dx_trainable);
    Vec dprior_out(dout.size());
    for (std::size_t i = 0; i < dout.size(); ++i) dprior_out[i] = dout[i] / prior_norm_[i];
    Vec dx_prior;
    prior_.backward(tapes.prior, dprior_out, &dx_prior);
    prior_.zero_grad();
    d_input.resize(dx_trainable.size());
    for (std::size_t i = 0; i < dx_trainable.size(); ++i)
      d_input[i] = cfg_.feature_scale * (dx_trainable[i] + dx_prior[i]);
  }

  // Estimate per-dimension second moments of the raw prior over the given
  // features, then freeze them.
  void fit_prior_normalizer(const std::vector<Vec>& features) {
    if (features.empty()) throw ContractViolation("fit_prior_normalizer: empty feature set");
    Vec second(cfg_.output_dim, 0.0);
    for (const auto& h : features) {
      const Vec p = prior_.forward_eval(scaled_input(h));
      for (std::size_t i = 0; i < p.size(); ++i) second[i] += p[i] * p[i];
    }
    for (std::size_t i = 0; i < second.size(); ++i) {
      prior_norm_[i] = std::max(std::sqrt(second[i] / static_cast<double>(features.size())),
                                1e-12);
    }
  }

  double pseudo_count(const Vec& h) const {
    const Vec f = forward(h);
    if (!nn::all_finite(f)) throw ScoringError("non-finite CFN output");
    return pseudo_count_from_norm(nn::squared_norm(f));
  }

  double output_squared_norm(const Vec& h) const { return nn::squared_norm(forward(h)); }

  double pseudo_count_from_norm(double squared_norm) const {
    constexpr double kClamp = 1e-8;
    return static_cast<double>(cfg_.output_dim) / std::max(squared_norm, kClamp);
  }

  nn::ParamList trainable_params() {
    nn::ParamList out;
    trainable_.collect_params("trainable", out);
    return out;
  }

  nn::ParamList all_params() {
    nn::ParamList out;
    trainable_.collect_params("trainable", out);
    prior_.collect_params("prior", out);
    out.push_back({"prior_norm",
                   {prior_norm_.size()},
                   prior_norm_.data(),
                   prior_norm_scratch_grad(),
                   prior_norm_.size()});
    return out;
  }

  std::string prior_digest() {
    nn::ParamList p;
    prior_.collect_params("prior", p);
    return nn::params_digest(p);
  }

  void zero_grad() { trainable_.zero_grad(); }

  void save(const std::filesystem::path& path, std::map<std::string, std::string> meta) {
    meta["kind"] = "cfn";
    meta["feat_dim"] = std::to_string(feat_dim_);
    meta["output_dim"] = std::to_string(cfg_.output_dim);
    meta["hidden_dim"] = std::to_string(cfg_.hidden_dim);
    meta["feature_scale"] = io::fmt_double(cfg_.feature_scale);
    meta["epochs"] = std::to_string(cfg_.epochs);
    meta["batch"] = std::to_string(cfg_.batch);
    meta["grad_accum"] = std::to_string(cfg_.grad_accum);
    meta["dropout_rate"] = io::fmt_double(cfg_.dropout_rate);
    auto p = all_params();
    nn::save_checkpoint(path, p, meta);
  }

  static CfnNetwork load(const std::filesystem::path& path,
                         std::map<std::string, std::string>* meta_out = nullptr) {
    const nn::CheckpointData data = nn::load_checkpoint(path);
    CfnConfig cfg;
    cfg.output_dim = std::stoul(data.meta.at("output_dim"));
    cfg.hidden_dim = std::stoul(data.meta.at("hidden_dim"));
    cfg.feature_scale = io::parse_double(data.meta.at("feature_scale"));
    cfg.epochs = std::stoul(data.meta.at("epochs"));
    cfg.batch = std::stoul(data.meta.at("batch"));
    cfg.grad_accum = std::stoul(data.meta.at("grad_accum"));
    cfg.dropout_rate = io::parse_double(data.meta.at("dropout_rate"));
    Rng dummy(0);
    CfnNetwork net(std::stoul(data.meta.at("feat_dim")), cfg, dummy);
    auto params = net.all_params();
    nn::load_into(data, params);
    if (meta_out) *meta_out = data.meta;
    return net;
  }

 private:
  double* prior_norm_scratch_grad() {
    prior_norm_grad_.assign(prior_norm_.size(), 0.0);
    return prior_norm_grad_.data();
  }

  CfnConfig cfg_;
  std::size_t feat_dim_;
  CfnTower trainable_;
  CfnTower prior_;
  Vec prior_norm_;
  Vec prior_norm_grad_;
};

// ||f - c||^2 on precomputed outputs.
inline double coin_loss(const Vec& f, const CoinTarget& c) {
  nn::require_size(c, f.size(), "coin_loss target");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = f[i] - c[i];
    acc += r * r;
  }
  return acc;
}

// Mean regression loss over a batch, eval mode.
inline double cfn_loss(const CfnNetwork& net,
                       const std::vector<std::pair<Vec, CoinTarget>>& batch) {
  if (batch.empty()) throw ContractViolation("cfn_loss: empty batch");
  double acc = 0.0;
  for (const auto& [h, c] : batch) acc += coin_loss(net.forward(h), c);
  return acc / static_cast<double>(batch.size());
}

struct CfnTrainStats {
  std::vector<double> losses;  // per optimizer step (averaged over accumulated batches)
};

// Pairs every feature row with one coin vector drawn up front (duplicate
// features get independent coins), fits the prior normalizer on the full
// feature set, then runs Adam + OneCycle with gradient accumulation.
inline CfnNetwork train_cfn(const std::vector<Vec>& features, const CfnConfig& cfg,
                            std::uint64_t seed, CfnTrainStats* stats = nullptr) {
  if (features.empty()) throw ContractViolation("train_cfn: empty feature set");
  const std::size_t n = features.size();
  const std::size_t feat_dim = features.front().size();
  Rng rng(seed);
  CfnNetwork net(feat_dim, cfg, rng);
  net.fit_prior_normalizer(features);

  std::vector<CoinTarget> coins;
  coins.reserve(n);
  Rng coin_rng = rng.fork(1);
  for (std::size_t i = 0; i < n; ++i) coins.push_back(draw_coins(cfg.output_dim, coin_rng));

  nn::ParamList params = net.trainable_params();
  nn::AdamState adam;
  adam.init(params);

  const std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch, n));
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;
  const std::size_t micro_batches = cfg.epochs * batches_per_epoch;
  const std::size_t accum = std::max<std::size_t>(1, cfg.grad_accum);
  const std::size_t total_steps = std::max<std::size_t>(1, (micro_batches + accum - 1) / accum);
  nn::OneCycleSchedule sched{cfg.initial_lr, cfg.max_lr, total_steps};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = rng.fork(2);
  Rng dropout_rng = rng.fork(3);

  std::size_t micro = 0;
  std::size_t opt_step = 0;
  double accum_loss = 0.0;
  net.zero_grad();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates, seeded.
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(static_cast<int>(i)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(lo + batch, n);
      const double inv = 1.0 / static_cast<double>((hi - lo) * accum);
      double batch_loss = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        const std::size_t row = order[r];
        CfnTower::Tape tape;
        const Vec f = net.forward_train(features[row], dropout_rng, tape);
        Vec df(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
          const double r2 = f[i] - coins[row][i];
          batch_loss += r2 * r2 / static_cast<double>(hi - lo);
          df[i] = 2.0 * r2 * inv;
        }
        net.backward(tape, df);
      }
      if (!std::isfinite(batch_loss)) throw TrainingError("CFN loss diverged");
      accum_loss += batch_loss / static_cast<double>(accum);
      ++micro;
      if (micro % accum == 0 || (epoch + 1 == cfg.epochs && b + 1 == batches_per_epoch)) {
        ++opt_step;
        adam_step(params, adam, nn::onecycle_lr(sched, std::min(opt_step, total_steps)));
        net.zero_grad();
        if (stats) stats->losses.push_back(accum_loss);
        accum_loss = 0.0;
      }
    }
  }
  return net;
}

}  // namespace taco::cfn
