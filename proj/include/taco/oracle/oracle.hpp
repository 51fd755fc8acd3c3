#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/tasks/dataset.hpp"
#include "taco/tasks/task_spec.hpp"

namespace taco::oracle {

using nn::Vec;

// Exact multiplicity table over quantized keys. Used by tests as the ground
// truth the pseudo-count estimator is checked against.
class CountTable {
 public:
  explicit CountTable(double cell_width = 1e-6) : cell_width_(cell_width) {}

  std::string key_of(const Vec& v) const {
    std::string key;
    key.reserve(v.size() * 8);
    for (double x : v) {
      const auto q = static_cast<std::int64_t>(std::floor(x / cell_width_));
      for (int b = 0; b < 8; ++b)
        key.push_back(static_cast<char>((static_cast<std::uint64_t>(q) >> (8 * b)) & 0xff));
    }
    return key;
  }

  void add(const Vec& v) {
    ++counts_[key_of(v)];
    ++total_;
  }

  std::size_t count(const Vec& v) const {
    const auto it = counts_.find(key_of(v));
    return it == counts_.end() ? 0 : it->second;
  }

  std::size_t total() const { return total_; }

 private:
  double cell_width_;
  std::map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

inline std::size_t exact_count(const std::vector<Vec>& dataset, const Vec& key,
                               double cell_width = 1e-6) {
  CountTable table(cell_width);
  for (const auto& row : dataset) table.add(row);
  return table.count(key);
}

// Closed-form optimum of the coin regression for one state: the mean of its
// coin vectors.
inline Vec tabular_cfn_optimum(const std::vector<Vec>& coins) {
  if (coins.empty()) throw ContractViolation("tabular_cfn_optimum: empty coin list");
  Vec mean(coins.front().size(), 0.0);
  for (const auto& c : coins)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += c[i];
  for (auto& v : mean) v /= static_cast<double>(coins.size());
  return mean;
}

// Idealized selector: argmax of the exact mixture density, no estimation.
inline std::size_t density_select(const tasks::TaskSpec& task, const Vec& context,
                                  const std::vector<Vec>& candidate_actions) {
  if (candidate_actions.empty()) throw ContractViolation("density_select: no candidates");
  std::size_t best = 0;
  double best_density = -1.0;
  for (std::size_t i = 0; i < candidate_actions.size(); ++i) {
    const double d = tasks::exact_density(task, context, candidate_actions[i]);
    if (d > best_density) {
      best_density = d;
      best = i;
    }
  }
  return best;
}

struct SuccessRate {
  double rate = 0.0;
  double stderr_ = 0.0;
  std::size_t episodes = 0;
};

// The selector is a black box (o, l, episode rng) -> action. Each episode
// draws a fresh context; the reward is the task's binary success.
inline SuccessRate monte_carlo_success(
    const std::function<Vec(const Vec& context, int instruction, Rng& rng)>& selector,
    const tasks::TaskSpec& task, std::size_t episodes, std::uint64_t seed) {
  if (episodes < 1) throw ContractViolation("monte_carlo_success: episodes must be >= 1");
  Rng base(seed);
  std::size_t successes = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    Rng ep_rng = base.fork(e);
    Vec context(task.context_dim);
    ep_rng.fill_normal(context);
    const int instruction =
        task.instruction_count > 1
            ? ep_rng.uniform_int(static_cast<int>(task.instruction_count))
            : 0;
    const Vec action = selector(context, instruction, ep_rng);
    successes += static_cast<std::size_t>(tasks::evaluate_reward(task, context, action));
  }
  SuccessRate out;
  out.episodes = episodes;
  out.rate = static_cast<double>(successes) / static_cast<double>(episodes);
  out.stderr_ = std::sqrt(out.rate * (1.0 - out.rate) / static_cast<double>(episodes));
  return out;
}

}  // namespace taco::oracle
