#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "taco/core/errors.hpp"

namespace taco::nn {

// Linear ramp initial_lr -> max_lr over the first half of training, cosine
// anneal max_lr -> initial_lr / kFinalDiv over the second half.
struct OneCycleSchedule {
  double initial_lr = 1e-4;
  double max_lr = 1e-3;
  std::size_t total_steps = 0;

  static constexpr double kFinalDiv = 25.0;

  double final_lr() const { return initial_lr / kFinalDiv; }
};

inline double onecycle_lr(const OneCycleSchedule& sched, std::size_t step) {
  if (sched.total_steps == 0) throw ContractViolation("onecycle_lr: total_steps must be positive");
  if (step > sched.total_steps) throw ContractViolation("onecycle_lr: step out of range");
  const double half = 0.5 * static_cast<double>(sched.total_steps);
  const double s = static_cast<double>(step);
  if (s <= half) {
    return sched.initial_lr + (sched.max_lr - sched.initial_lr) * (s / half);
  }
  const double t = (s - half) / (static_cast<double>(sched.total_steps) - half);
  const double floor_lr = sched.final_lr();
  return floor_lr + (sched.max_lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace taco::nn
