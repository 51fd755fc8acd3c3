#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"
#include "taco/core/rng.hpp"
#include "taco/nn/matrix.hpp"

namespace taco::tasks {

using nn::Matrix;
using nn::Vec;

// Contextual-bandit task: contexts are standard normal, demonstrations come
// from a K-mode Gaussian mixture whose centers are affine in the context
// (c_k(o) = A_k o + b_k). Mode 0 carries the largest weight and defines the
// success region. All presets share one A across modes so the pairwise
// center separation is the same for every context.
struct TaskSpec {
  std::string id;
  std::size_t context_dim = 0;
  std::size_t action_dim = 0;
  std::size_t mode_count = 0;
  std::vector<Matrix> mode_A;  // K matrices, action_dim x context_dim
  std::vector<Vec> mode_b;     // K offsets, action_dim
  Vec weights;                 // simplex; weights[0] is the max
  double mode_std = 0.1;
  std::size_t success_mode = 0;
  double success_radius = 0.3;
  std::size_t instruction_count = 1;

  Vec mode_center(std::size_t k, const Vec& context) const {
    const Matrix& A = mode_A[k];
    Vec c = mode_b[k];
    for (std::size_t i = 0; i < action_dim; ++i) {
      double acc = c[i];
      for (std::size_t j = 0; j < context_dim; ++j) acc += A(i, j) * context[j];
      c[i] = acc;
    }
    return c;
  }

  void validate() const {
    if (context_dim == 0 || action_dim == 0 || mode_count == 0)
      throw ContractViolation("TaskSpec: dims and mode count must be positive");
    if (weights.size() != mode_count || mode_A.size() != mode_count ||
        mode_b.size() != mode_count)
      throw ShapeError("TaskSpec: per-mode field sizes disagree");
    double sum = 0.0;
    double max_w = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ContractViolation("TaskSpec: negative mode weight");
      sum += w;
      max_w = std::max(max_w, w);
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractViolation("TaskSpec: weights must sum to 1");
    if (weights[success_mode] < max_w - 1e-12)
      throw ContractViolation("TaskSpec: success mode must carry the maximum weight");
    if (mode_std <= 0.0 || success_radius <= 0.0)
      throw ContractViolation("TaskSpec: spread and radius must be positive");
    for (std::size_t k = 0; k < mode_count; ++k) {
      if (mode_A[k].rows != action_dim || mode_A[k].cols != context_dim ||
          mode_b[k].size() != action_dim)
        throw ShapeError("TaskSpec: affine map shape mismatch");
    }
    // With a shared A the offset distance is the center distance for every
    // context; require the >=4s separation there.
    if (shared_affine()) {
      for (std::size_t j = 0; j < mode_count; ++j) {
        for (std::size_t k = j + 1; k < mode_count; ++k) {
          if (nn::l2_distance(mode_b[j], mode_b[k]) < 4.0 * mode_std)
            throw ContractViolation("TaskSpec: mode centers closer than 4*mode_std");
        }
      }
    }
  }

  bool shared_affine() const {
    for (std::size_t k = 1; k < mode_count; ++k)
      if (mode_A[k].data != mode_A[0].data) return false;
    return true;
  }
};

inline int evaluate_reward(const TaskSpec& task, const Vec& context, const Vec& action) {
  nn::require_size(context, task.context_dim, "evaluate_reward context");
  nn::require_size(action, task.action_dim, "evaluate_reward action");
  const Vec center = task.mode_center(task.success_mode, context);
  return nn::l2_distance(action, center) <= task.success_radius ? 1 : 0;
}

// Closed-form mixture density sum_k w_k N(a; c_k(o), s^2 I).
inline double exact_density(const TaskSpec& task, const Vec& context, const Vec& action) {
  nn::require_size(context, task.context_dim, "exact_density context");
  nn::require_size(action, task.action_dim, "exact_density action");
  const double s2 = task.mode_std * task.mode_std;
  const double log_norm =
      -0.5 * static_cast<double>(task.action_dim) * std::log(2.0 * std::numbers::pi * s2);
  double density = 0.0;
  for (std::size_t k = 0; k < task.mode_count; ++k) {
    const Vec center = task.mode_center(k, context);
    double q = 0.0;
    for (std::size_t i = 0; i < task.action_dim; ++i) {
      const double d = action[i] - center[i];
      q += d * d;
    }
    density += task.weights[k] * std::exp(log_norm - 0.5 * q / s2);
  }
  return density;
}

namespace detail {

inline Matrix shared_affine_matrix(std::size_t action_dim, std::size_t context_dim,
                                   std::uint64_t seed, double scale) {
  Matrix A(action_dim, context_dim);
  Rng rng(seed);
  for (auto& v : A.data) v = rng.uniform(-scale, scale);
  return A;
}

}  // namespace detail

// Benchmark presets:
//   a: 1-D actions, two modes at 0 and 1, w=(0.8,0.2), s=0.1, radius 0.3
//   b: 8-D actions, three modes, w=(0.7,0.2,0.1), shared affine context map
//   c: 2-D actions, near-uniform three modes w=(0.4,0.35,0.25)
inline TaskSpec make_preset(const std::string& name) {
  TaskSpec task;
  task.id = name;
  if (name == "a") {
    task.context_dim = 2;
    task.action_dim = 1;
    task.mode_count = 2;
    task.weights = {0.8, 0.2};
    task.mode_std = 0.1;
    task.success_radius = 0.3;
    Matrix zero(1, 2);
    task.mode_A = {zero, zero};
    task.mode_b = {{0.0}, {1.0}};
  } else if (name == "b") {
    task.context_dim = 4;
    task.action_dim = 8;
    task.mode_count = 3;
    task.weights = {0.7, 0.2, 0.1};
    task.mode_std = 0.1;
    task.success_radius = 0.45;
    const Matrix A = detail::shared_affine_matrix(8, 4, 0xb0b0b0b0ULL, 0.25);
    task.mode_A = {A, A, A};
    Vec b0(8, 0.0), b1(8, 0.0), b2(8, 0.0);
    b1[0] = 1.2;
    b2[1] = 1.2;
    task.mode_b = {b0, b1, b2};
  } else if (name == "c") {
    task.context_dim = 2;
    task.action_dim = 2;
    task.mode_count = 3;
    task.weights = {0.4, 0.35, 0.25};
    task.mode_std = 0.1;
    task.success_radius = 0.3;
    const Matrix A = detail::shared_affine_matrix(2, 2, 0xc0c0c0c0ULL, 0.25);
    task.mode_A = {A, A, A};
    task.mode_b = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  } else {
    throw UsageError("unknown task preset: '" + name + "' (expected a, b, or c)");
  }
  task.instruction_count = 1;
  task.validate();
  return task;
}

inline void save_task(const TaskSpec& task, const std::filesystem::path& path,
                      const std::string& config_digest = "") {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write task file: " + path.string());
  if (!config_digest.empty()) out << "config_digest " << config_digest << "\n";
  out << "id " << task.id << "\n";
  out << "context_dim " << task.context_dim << "\n";
  out << "action_dim " << task.action_dim << "\n";
  out << "mode_count " << task.mode_count << "\n";
  out << "mode_std " << io::fmt_double(task.mode_std) << "\n";
  out << "success_mode " << task.success_mode << "\n";
  out << "success_radius " << io::fmt_double(task.success_radius) << "\n";
  out << "instruction_count " << task.instruction_count << "\n";
  out << "weights";
  for (double w : task.weights) out << ' ' << io::fmt_double(w);
  out << "\n";
  for (std::size_t k = 0; k < task.mode_count; ++k) {
    out << "A_" << k;
    for (double v : task.mode_A[k].data) out << ' ' << io::fmt_double(v);
    out << "\n";
    out << "b_" << k;
    for (double v : task.mode_b[k]) out << ' ' << io::fmt_double(v);
    out << "\n";
  }
}

inline TaskSpec load_task(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing task file: " + path.string());
  TaskSpec task;
  std::string line;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "id") {
      ls >> task.id;
    } else if (key == "context_dim") {
      ls >> task.context_dim;
    } else if (key == "action_dim") {
      ls >> task.action_dim;
    } else if (key == "mode_count") {
      ls >> task.mode_count;
    } else if (key == "mode_std") {
      ls >> task.mode_std;
    } else if (key == "success_mode") {
      ls >> task.success_mode;
    } else if (key == "success_radius") {
      ls >> task.success_radius;
    } else if (key == "instruction_count") {
      ls >> task.instruction_count;
    } else if (key == "config_digest") {
      // provenance echo, not part of the spec proper
    } else if (key == "weights") {
      double w;
      while (ls >> w) task.weights.push_back(w);
    } else {
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      rows.emplace_back(key, std::move(vals));
    }
  }
  task.mode_A.assign(task.mode_count, Matrix(task.action_dim, task.context_dim));
  task.mode_b.assign(task.mode_count, Vec(task.action_dim, 0.0));
  for (const auto& [key, vals] : rows) {
    if (key.size() < 3 || key[1] != '_') throw ArtifactError("bad task file key: " + key);
    const std::size_t k = static_cast<std::size_t>(std::stoul(key.substr(2)));
    if (k >= task.mode_count) throw ArtifactError("task file mode index out of range: " + key);
    if (key[0] == 'A') {
      if (vals.size() != task.action_dim * task.context_dim)
        throw ShapeError("task file A_" + std::to_string(k) + " size mismatch");
      task.mode_A[k].data = vals;
    } else if (key[0] == 'b') {
      if (vals.size() != task.action_dim) throw ShapeError("task file b size mismatch");
      task.mode_b[k] = vals;
    } else {
      throw ArtifactError("bad task file key: " + key);
    }
  }
  task.validate();
  return task;
}

}  // namespace taco::tasks
