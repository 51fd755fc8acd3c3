#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "taco/cfn/cfn.hpp"
#include "taco/oracle/oracle.hpp"
#include "taco/tasks/task_spec.hpp"

using namespace taco;
using nn::Vec;

TEST_CASE("exact_count over quantized keys") {
  std::vector<Vec> dataset;
  CHECK(oracle::exact_count(dataset, Vec{1.0, 2.0}) == 0);

  dataset.push_back({1.0, 2.0});
  CHECK(oracle::exact_count(dataset, Vec{1.0, 2.0}) == 1);
  CHECK(oracle::exact_count(dataset, Vec{1.0, 2.5}) == 0);

  // 100 rows made of 10 distinct keys, each duplicated 10 times.
  dataset.clear();
  for (int key = 0; key < 10; ++key)
    for (int rep = 0; rep < 10; ++rep) dataset.push_back({static_cast<double>(key), 0.5});
  for (int key = 0; key < 10; ++key)
    CHECK(oracle::exact_count(dataset, Vec{static_cast<double>(key), 0.5}) == 10);
}

TEST_CASE("exact_count is permutation invariant") {
  std::vector<Vec> dataset;
  for (int i = 0; i < 40; ++i) dataset.push_back({static_cast<double>(i % 4)});
  std::vector<Vec> shuffled = dataset;
  Rng rng(9);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
  for (int key = 0; key < 4; ++key) {
    CHECK(oracle::exact_count(dataset, Vec{static_cast<double>(key)}) ==
          oracle::exact_count(shuffled, Vec{static_cast<double>(key)}));
  }
}

TEST_CASE("tabular optimum: single coin and cancellation") {
  Rng rng(3);
  const cfn::CoinTarget c = cfn::draw_coins(20, rng);
  const Vec f1 = oracle::tabular_cfn_optimum({c});
  CHECK(f1 == c);
  CHECK_THAT(nn::squared_norm(f1) / 20.0, Catch::Matchers::WithinRel(1.0, 1e-12));

  Vec neg = c;
  for (auto& v : neg) v = -v;
  const Vec f2 = oracle::tabular_cfn_optimum({c, neg});
  for (double v : f2) CHECK(v == 0.0);
}

TEST_CASE("tabular optimum: 1/m identity for m=4 by Monte Carlo") {
  Rng rng(12345);
  const std::size_t trials = 10000;
  const std::size_t d = 20;
  double mean_norm = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<Vec> coins;
    for (int i = 0; i < 4; ++i) coins.push_back(cfn::draw_coins(d, rng));
    mean_norm += nn::squared_norm(oracle::tabular_cfn_optimum(coins)) / static_cast<double>(d);
  }
  mean_norm /= static_cast<double>(trials);
  CHECK_THAT(mean_norm, Catch::Matchers::WithinRel(0.25, 0.05));
  // The E-consistent count estimate recovers m.
  CHECK_THAT(1.0 / mean_norm, Catch::Matchers::WithinRel(4.0, 0.05));
}

TEST_CASE("density_select basics") {
  const tasks::TaskSpec task = tasks::make_preset("a");
  Vec context{0.1, 0.1};
  const Vec success = task.mode_center(0, context);

  CHECK(oracle::density_select(task, context, {success}) == 0);

  Vec far = success;
  far[0] += 5.0 * task.mode_std;
  CHECK(oracle::density_select(task, context, {far, success}) == 1);
  CHECK(oracle::density_select(task, context, {success, far}) == 0);
}

TEST_CASE("monte_carlo_success on degenerate selectors") {
  const tasks::TaskSpec task = tasks::make_preset("a");
  const auto always_success = [&](const Vec& context, int, Rng&) {
    return task.mode_center(task.success_mode, context);
  };
  const auto r1 = oracle::monte_carlo_success(always_success, task, 500, 1);
  CHECK(r1.rate == 1.0);
  CHECK(r1.stderr_ == 0.0);

  const auto always_fail = [&](const Vec& context, int, Rng&) {
    Vec a = task.mode_center(task.success_mode, context);
    a[0] += 10.0 * task.success_radius;
    return a;
  };
  const auto r0 = oracle::monte_carlo_success(always_fail, task, 500, 1);
  CHECK(r0.rate == 0.0);
}

TEST_CASE("idealized mixture sampling hits the analytic baseline") {
  // Sampling straight from the task mixture is the M=1 reference: success
  // weight times the in-radius mass, 0.8 * P(|z| <= 3) = 0.7978.
  const tasks::TaskSpec task = tasks::make_preset("a");
  const auto mixture_sampler = [&](const Vec& context, int, Rng& rng) {
    const std::size_t k = rng.categorical(task.weights);
    Vec a = task.mode_center(k, context);
    for (auto& v : a) v += task.mode_std * rng.normal();
    return a;
  };
  const auto r = oracle::monte_carlo_success(mixture_sampler, task, 20000, 99);
  CHECK_THAT(r.rate, Catch::Matchers::WithinAbs(0.7978, 0.012));
  CHECK_THAT(r.stderr_, Catch::Matchers::WithinRel(
                            std::sqrt(r.rate * (1.0 - r.rate) / 20000.0), 1e-9));
}

TEST_CASE("monte_carlo_success is deterministic in the seed") {
  const tasks::TaskSpec task = tasks::make_preset("a");
  const auto noisy = [&](const Vec& context, int, Rng& rng) {
    Vec a = task.mode_center(task.success_mode, context);
    for (auto& v : a) v += 0.25 * rng.normal();
    return a;
  };
  const auto r1 = oracle::monte_carlo_success(noisy, task, 300, 5);
  const auto r2 = oracle::monte_carlo_success(noisy, task, 300, 5);
  CHECK(r1.rate == r2.rate);
  CHECK_THROWS_AS(oracle::monte_carlo_success(noisy, task, 0, 5), ContractViolation);
}
