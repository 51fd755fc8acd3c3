#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "taco/core/rng.hpp"
#include "taco/nn/activations.hpp"
#include "taco/nn/adam.hpp"
#include "taco/nn/checkpoint.hpp"
#include "taco/nn/layer_norm.hpp"
#include "taco/nn/linear.hpp"
#include "taco/nn/mlp.hpp"
#include "taco/nn/mlp_block.hpp"
#include "taco/nn/onecycle.hpp"

using namespace taco;
using nn::Vec;

namespace {

// Central finite differences against an analytic gradient over a sample of
// coordinates. `loss` must be pure in the parameter values.
double max_rel_grad_error(nn::ParamList& params, const std::function<double()>& loss,
                          const std::function<void()>& compute_grads, Rng& rng,
                          std::size_t probes = 60, double h = 1e-5) {
  compute_grads();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.emplace_back(p.grad, p.grad + p.size);
  double worst = 0.0;
  std::size_t total = 0;
  for (auto& p : params) total += p.size;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    std::size_t flat = static_cast<std::size_t>(rng.uniform() * static_cast<double>(total));
    if (flat >= total) flat = total - 1;
    std::size_t t = 0;
    while (flat >= params[t].size) {
      flat -= params[t].size;
      ++t;
    }
    double* slot = params[t].value + flat;
    const double saved = *slot;
    *slot = saved + h;
    const double up = loss();
    *slot = saved - h;
    const double down = loss();
    *slot = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = analytic[t][flat];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("gelu uses the exact normal cdf") {
  CHECK(nn::gelu(0.0) == 0.0);
  CHECK(std::abs(nn::gelu(10.0) - 10.0) < 1e-9);
  // Phi(1) = 0.8413447460685429, evaluated independently beforehand.
  CHECK_THAT(nn::gelu(1.0), Catch::Matchers::WithinAbs(0.8413447460685429, 1e-12));
  CHECK_THAT(nn::gelu(-1.0), Catch::Matchers::WithinAbs(-(1.0 - 0.8413447460685429), 1e-12));
}

TEST_CASE("xavier init bounds, zero biases, determinism") {
  nn::LinearLayer layer(24, 40);
  Rng rng(123);
  nn::xavier_init(layer, rng);
  for (double b : layer.bias) CHECK(b == 0.0);
  const double bound = std::sqrt(6.0 / (24.0 + 40.0));
  double max_abs = 0.0;
  for (double w : layer.weight.data) max_abs = std::max(max_abs, std::abs(w));
  CHECK(max_abs <= bound);
  CHECK(max_abs > 0.5 * bound);  // sanity that draws actually spread

  nn::LinearLayer again(24, 40);
  Rng rng2(123);
  nn::xavier_init(again, rng2);
  CHECK(again.weight.data == layer.weight.data);
}

TEST_CASE("layer norm normalizes before gain and shift") {
  nn::LayerNorm norm(16);
  Rng rng(7);
  Vec x(16);
  for (auto& v : x) v = rng.uniform(-3.0, 3.0);
  Vec y;
  nn::LayerNorm::Tape tape;
  norm.forward(x, y, &tape);
  double mean = 0.0, var = 0.0;
  for (double v : tape.xhat) mean += v;
  mean /= 16.0;
  for (double v : tape.xhat) var += (v - mean) * (v - mean);
  var /= 16.0;
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(var - 1.0) < 1e-4);  // biased by eps only
}

TEST_CASE("adam: zero grads leave params fixed, unit grad moves by lr") {
  double theta = 0.5;
  double grad = 0.0;
  nn::ParamList params{{"theta", {1}, &theta, &grad, 1}};
  nn::AdamState state;
  state.init(params);
  CHECK(state.step_count == 0);
  adam_step(params, state, 1e-3);
  CHECK(state.step_count == 1);
  CHECK(theta == 0.5);

  grad = 1.0;
  const double before = theta;
  nn::AdamState fresh;
  fresh.init(params);
  adam_step(params, fresh, 1e-3);
  // First step with g=1: m_hat = 1, v_hat = 1 -> step = lr / (1 + eps).
  CHECK_THAT(before - theta, Catch::Matchers::WithinRel(1e-3, 1e-6));
}

TEST_CASE("adam rejects non-finite gradients by name") {
  double theta = 0.0;
  double grad = std::nan("");
  nn::ParamList params{{"velocity.fc0.weight", {1}, &theta, &grad, 1}};
  nn::AdamState state;
  state.init(params);
  CHECK_THROWS_WITH(adam_step(params, state, 1e-3),
                    Catch::Matchers::ContainsSubstring("velocity.fc0.weight"));
}

TEST_CASE("onecycle endpoints, continuity, and monotone shape") {
  nn::OneCycleSchedule sched{1e-4, 1e-3, 1000};
  CHECK_THAT(onecycle_lr(sched, 0), Catch::Matchers::WithinRel(1e-4, 1e-12));
  CHECK_THAT(onecycle_lr(sched, 500), Catch::Matchers::WithinRel(1e-3, 1e-12));
  CHECK_THAT(onecycle_lr(sched, 1000), Catch::Matchers::WithinRel(1e-4 / 25.0, 1e-12));

  // Continuity at the junction: one-step jumps stay on the order of the
  // local slope on both sides.
  const double ramp_step = (1e-3 - 1e-4) / 500.0;
  CHECK(std::abs(onecycle_lr(sched, 500) - onecycle_lr(sched, 499)) < 1.01 * ramp_step);
  CHECK(std::abs(onecycle_lr(sched, 501) - onecycle_lr(sched, 500)) < 1e-5);

  double prev = onecycle_lr(sched, 0);
  for (std::size_t s = 1; s <= 500; ++s) {
    const double cur = onecycle_lr(sched, s);
    CHECK(cur >= prev);
    prev = cur;
  }
  for (std::size_t s = 501; s <= 1000; ++s) {
    const double cur = onecycle_lr(sched, s);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }

  CHECK_THROWS_AS(onecycle_lr(sched, 1001), ContractViolation);
}

TEST_CASE("mlp block: zero weights and zero gain give zero output") {
  nn::MlpBlock block(8, 0.1);
  // all params default to zero except norm gain; zero that too
  std::fill(block.norm.gain.begin(), block.norm.gain.end(), 0.0);
  Vec h(8, 0.0);
  Vec out;
  Rng rng(1);
  block.forward(h, false, rng, out, nullptr);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("mlp block eval forward is pure and deterministic") {
  Rng rng(99);
  nn::MlpBlock block(8, 0.5);
  block.init(rng);
  Vec h(8);
  for (auto& v : h) v = rng.normal();
  Vec out1, out2;
  Rng r1(5), r2(6);  // different rngs must not matter with train=false
  block.forward(h, false, r1, out1, nullptr);
  block.forward(h, false, r2, out2, nullptr);
  CHECK(out1 == out2);
}

TEST_CASE("mlp block train-mode dropout masks and rescales") {
  Rng rng(3);
  nn::MlpBlock block(6, 0.4);
  block.init(rng);
  Vec h(6);
  for (auto& v : h) v = rng.normal();
  Vec out_a, out_b;
  Rng ra(10), rb(11);
  block.forward(h, true, ra, out_a, nullptr);
  block.forward(h, true, rb, out_b, nullptr);
  CHECK(out_a != out_b);  // different masks with overwhelming probability
}

TEST_CASE("mlp block gradient matches finite differences") {
  Rng rng(42);
  nn::MlpBlock block(6, 0.0);  // dropout off so the loss is deterministic
  block.init(rng);
  Vec h(6);
  for (auto& v : h) v = rng.uniform(-1.0, 1.0);
  Vec dout(6);
  for (auto& v : dout) v = rng.uniform(-1.0, 1.0);

  nn::ParamList params;
  block.collect_params("block", params);
  Rng dummy(0);
  const auto loss = [&]() {
    Vec out;
    block.forward(h, false, dummy, out, nullptr);
    return nn::dot(out, dout);
  };
  const auto compute = [&]() {
    block.zero_grad();
    nn::MlpBlock::Tape tape;
    Vec out;
    block.forward(h, false, dummy, out, &tape);
    Vec dx;
    block.backward(tape, dout, dx);
  };
  Rng probe_rng(17);
  CHECK(max_rel_grad_error(params, loss, compute, probe_rng, 80) < 1e-6);
}

TEST_CASE("mlp block input gradient matches finite differences") {
  Rng rng(43);
  nn::MlpBlock block(5, 0.0);
  block.init(rng);
  Vec h(5);
  for (auto& v : h) v = rng.uniform(-1.0, 1.0);
  Vec dout(5);
  for (auto& v : dout) v = rng.uniform(-1.0, 1.0);
  Rng dummy(0);
  nn::MlpBlock::Tape tape;
  Vec out;
  block.forward(h, false, dummy, out, &tape);
  Vec dx;
  block.backward(tape, dout, dx);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < h.size(); ++i) {
    Vec hp = h, hm = h;
    hp[i] += eps;
    hm[i] -= eps;
    Vec op, om;
    block.forward(hp, false, dummy, op, nullptr);
    block.forward(hm, false, dummy, om, nullptr);
    const double fd = (nn::dot(op, dout) - nn::dot(om, dout)) / (2.0 * eps);
    CHECK_THAT(dx[i], Catch::Matchers::WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
  }
}

TEST_CASE("mlp block rejects wrong input size") {
  nn::MlpBlock block(8);
  Vec bad(7, 0.0);
  Vec out;
  Rng rng(0);
  CHECK_THROWS_AS(block.forward(bad, false, rng, out, nullptr), ShapeError);
}

TEST_CASE("mlp stack gradient matches finite differences") {
  Rng rng(7);
  nn::Mlp net({4, 10, 6, 3});
  net.init(rng);
  Vec x(4);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  Vec dout(3);
  for (auto& v : dout) v = rng.uniform(-1.0, 1.0);
  nn::ParamList params;
  net.collect_params("net", params);
  const auto loss = [&]() {
    Vec out;
    net.forward(x, out, nullptr);
    return nn::dot(out, dout);
  };
  const auto compute = [&]() {
    net.zero_grad();
    nn::Mlp::Tape tape;
    Vec out;
    net.forward(x, out, &tape);
    net.backward(tape, dout, nullptr);
  };
  Rng probe_rng(18);
  CHECK(max_rel_grad_error(params, loss, compute, probe_rng, 80) < 1e-6);
}

TEST_CASE("checkpoint round-trips parameters bit-exactly") {
  Rng rng(11);
  nn::Mlp net({3, 5, 2});
  net.init(rng);
  nn::ParamList params;
  net.collect_params("net", params);
  const auto dir = std::filesystem::temp_directory_path() / "taco_nn_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "net.ckpt";
  nn::save_checkpoint(path, params, {{"note", "round-trip"}});

  nn::Mlp other({3, 5, 2});
  nn::ParamList other_params;
  other.collect_params("net", other_params);
  const nn::CheckpointData data = nn::load_checkpoint(path);
  CHECK(data.meta.at("note") == "round-trip");
  nn::load_into(data, other_params);
  CHECK(nn::params_digest(other_params) == nn::params_digest(params));

  Vec x{0.1, -0.2, 0.3};
  Vec a, b;
  net.forward(x, a, nullptr);
  other.forward(x, b, nullptr);
  CHECK(a == b);
}

TEST_CASE("checkpoint rejects corrupt magic") {
  const auto dir = std::filesystem::temp_directory_path() / "taco_nn_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "bad.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOT-A-CHECKPOINT";
  }
  CHECK_THROWS_AS(nn::load_checkpoint(path), ArtifactError);
}

TEST_CASE("rng streams are deterministic and fork-independent") {
  Rng a(2024), b(2024);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng parent(5);
  Rng f1 = parent.fork(3);
  parent.normal();  // consuming the parent must not change forks
  Rng f2 = parent.fork(3);
  CHECK(f1.next_u64() == f2.next_u64());
}

TEST_CASE("dropout rate zero is identity, bad rate rejected") {
  Vec x{1.0, 2.0, 3.0};
  Vec y;
  Rng rng(1);
  nn::dropout_forward(x, 0.0, true, rng, y, nullptr);
  CHECK(y == x);
  CHECK_THROWS_AS(nn::dropout_forward(x, 1.0, true, rng, y, nullptr), ContractViolation);
}
