#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "taco/policy/categorical_policy.hpp"
#include "taco/tasks/dataset.hpp"

using namespace taco;
using nn::Vec;

namespace {

policy::CategoricalPolicyConfig small_config() {
  policy::CategoricalPolicyConfig cfg;
  cfg.context_dim = 2;
  cfg.action_dim = 1;
  cfg.instruction_count = 1;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 32;
  cfg.cache_dim = 16;
  cfg.bins = 10;
  cfg.grid_lo = 0.0;
  cfg.grid_hi = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("grid geometry and nearest bin") {
  Rng rng(1);
  policy::CategoricalPolicy cat(small_config(), rng);
  CHECK_THAT(cat.bin_center(0), Catch::Matchers::WithinRel(0.05, 1e-12));
  CHECK_THAT(cat.bin_center(9), Catch::Matchers::WithinRel(0.95, 1e-12));
  CHECK(cat.nearest_bin(0.06) == 0);
  CHECK(cat.nearest_bin(0.14) == 1);
  CHECK(cat.nearest_bin(-5.0) == 0);   // clamped
  CHECK(cat.nearest_bin(42.0) == 9);   // clamped
}

TEST_CASE("temperature zero is the argmax mode") {
  Rng rng(2);
  policy::CategoricalPolicy cat(small_config(), rng);
  // zero the encoder path and pin logits through the bias
  auto params = cat.params();
  for (auto& p : params) std::fill(p.value, p.value + p.size, 0.0);
  cat.logits_layer().bias[3] = 5.0;
  Rng sample_rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto out = cat.sample(Vec{0.1, 0.2}, 0, 0.0, sample_rng);
    CHECK_THAT(out.action[0], Catch::Matchers::WithinRel(cat.bin_center(3), 1e-12));
  }
}

TEST_CASE("uniform logits sample uniformly over bins") {
  Rng rng(4);
  policy::CategoricalPolicy cat(small_config(), rng);
  auto params = cat.params();
  for (auto& p : params) std::fill(p.value, p.value + p.size, 0.0);
  Rng sample_rng(5);
  const int n = 10000;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < n; ++i) {
    const auto out = cat.sample(Vec{0.0, 0.0}, 0, 1.0, sample_rng);
    counts[cat.nearest_bin(out.action[0])]++;
  }
  const double expect = n / 10.0;
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  for (int b = 0; b < 10; ++b)
    CHECK(std::abs(counts[static_cast<std::size_t>(b)] - expect) < 3.0 * sigma);
}

TEST_CASE("temperature one reproduces the softmax probabilities") {
  Rng rng(6);
  policy::CategoricalPolicy cat(small_config(), rng);
  auto params = cat.params();
  for (auto& p : params) std::fill(p.value, p.value + p.size, 0.0);
  // craft a known distribution through the bias
  for (std::size_t b = 0; b < 10; ++b)
    cat.logits_layer().bias[b] = 0.3 * static_cast<double>(b);
  const Vec context{0.4, -0.1};
  const auto probs = cat.action_distribution(context, 0, 1.0);
  double sum = 0.0;
  for (double p : probs[0]) sum += p;
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));

  Rng sample_rng(7);
  const int n = 20000;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < n; ++i) {
    const auto out = cat.sample(context, 0, 1.0, sample_rng);
    counts[cat.nearest_bin(out.action[0])]++;
  }
  for (std::size_t b = 0; b < 10; ++b) {
    const double expect = n * probs[0][b];
    const double sigma = std::sqrt(n * probs[0][b] * (1.0 - probs[0][b]));
    CHECK(std::abs(counts[b] - expect) < 3.0 * sigma + 1.0);
  }
}

TEST_CASE("feature concatenates hidden state and grid action") {
  Rng rng(8);
  policy::CategoricalPolicy cat(small_config(), rng);
  CHECK(cat.feature_dim() == 16 + 1);
  Rng sample_rng(9);
  const Vec context{0.3, 0.3};
  const auto out = cat.sample(context, 0, 1.0, sample_rng);
  CHECK(out.feature.size() == cat.feature_dim());
  CHECK(out.feature.back() == out.action[0]);

  const Vec f = cat.feature_for(context, 0, out.action);
  CHECK(f == out.feature);
}

TEST_CASE("cross-entropy training concentrates mass on the data bin") {
  tasks::Dataset data;
  data.task_id = "point";
  data.rows.push_back({Vec{0.2, -0.3}, 0, Vec{0.65}});
  data.hidden_modes.push_back(0);
  Rng rng(10);
  policy::CategoricalPolicy cat(small_config(), rng);
  const auto stats = cat.train(data, 600, 8, 11);
  CHECK(stats.losses.front() > stats.losses.back());
  const auto probs = cat.action_distribution(data.rows[0].context, 0, 1.0);
  CHECK(probs[0][cat.nearest_bin(0.65)] > 0.9);
  CHECK_THROWS_AS(cat.train(tasks::Dataset{}, 10, 8, 1), ContractViolation);
}

TEST_CASE("temperature must be positive for the distribution") {
  Rng rng(12);
  policy::CategoricalPolicy cat(small_config(), rng);
  CHECK_THROWS_AS(cat.action_distribution(Vec{0.0, 0.0}, 0, 0.0), ContractViolation);
}
