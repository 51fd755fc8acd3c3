#pragma once

#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"
#include "taco/core/rng.hpp"
#include "taco/policy/flow_policy.hpp"

namespace taco::search {

using nn::Vec;

enum class ScheduleMode { FixedLevel, LinearGrid };

inline const char* to_string(ScheduleMode mode) {
  return mode == ScheduleMode::FixedLevel ? "fixed" : "linear-grid";
}

inline ScheduleMode schedule_mode_from_string(const std::string& s) {
  if (s == "fixed") return ScheduleMode::FixedLevel;
  if (s == "linear-grid") return ScheduleMode::LinearGrid;
  throw UsageError("unknown schedule mode: '" + s + "'");
}

struct NoiseSchedule {
  ScheduleMode mode = ScheduleMode::FixedLevel;
  std::vector<double> levels;  // sigma_i in [0, 1)

  std::size_t size() const { return levels.size(); }
};

// fixed: N copies of sigma = 1 - fraction (independent noise per query).
// linear-grid: N levels evenly spaced over [1 - fraction, 1).
inline NoiseSchedule make_schedule(ScheduleMode mode, double noise_fraction, std::size_t n) {
  if (!(noise_fraction > 0.0) || noise_fraction > 1.0)
    throw ContractViolation("make_schedule: noise_fraction must be in (0,1]");
  if (n < 1) throw ContractViolation("make_schedule: N must be >= 1");
  NoiseSchedule sched;
  sched.mode = mode;
  sched.levels.reserve(n);
  const double base = 1.0 - noise_fraction;
  if (mode == ScheduleMode::FixedLevel) {
    sched.levels.assign(n, base);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      sched.levels.push_back(base + noise_fraction * static_cast<double>(i) /
                                        static_cast<double>(n));
  }
  return sched;
}

// Lowest index wins on ties.
inline std::size_t argmin_lowest_index(const std::vector<double>& values) {
  if (values.empty()) throw ContractViolation("argmin over empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

struct FeatureRow {
  Vec feature;
  std::size_t demo_id = 0;
  double sigma = 0.0;     // chosen noise level
  double residual = 0.0;  // min ||a_pre - a||_2
};

struct FeatureDataset {
  std::size_t feat_dim = 0;
  std::string policy_digest;
  std::string dataset_digest;
  std::vector<FeatureRow> rows;

  std::vector<Vec> features() const {
    std::vector<Vec> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.feature);
    return out;
  }
};

// Query the policy once per schedule level with fresh noise, keep the
// feature whose one-step clean prediction lands closest to the clean
// action.
inline std::tuple<Vec, double, double> search_feature(const policy::FlowPolicy& policy,
                                                      const policy::ContextCache& cache,
                                                      const Vec& action,
                                                      const NoiseSchedule& sched, Rng& rng) {
  if (sched.levels.empty()) throw ContractViolation("search_feature: empty schedule");
  std::vector<double> errors;
  errors.reserve(sched.size());
  std::vector<Vec> features(sched.size());
  std::vector<double> sigmas(sched.size());
  bool any_finite = false;
  Vec eps(action.size());
  for (std::size_t i = 0; i < sched.size(); ++i) {
    const double sigma = sched.levels[i];
    rng.fill_normal(eps);
    const Vec corrupted = policy::corrupt_action(action, sigma, eps);
    auto [a_pre, feature] = policy.denoise_once(cache, corrupted, sigma);
    double err = std::numeric_limits<double>::infinity();
    if (nn::all_finite(a_pre) && nn::all_finite(feature)) {
      err = nn::l2_distance(a_pre, action);
      any_finite = true;
    }
    errors.push_back(err);
    features[i] = std::move(feature);
    sigmas[i] = sigma;
  }
  if (!any_finite) throw SearchError("feature search: all queries non-finite");
  const std::size_t best = argmin_lowest_index(errors);
  return {std::move(features[best]), sigmas[best], errors[best]};
}

// One search per demonstration. Each row's noise stream is forked from
// (seed, row index) so results do not depend on processing order.
inline FeatureDataset build_feature_dataset(const policy::FlowPolicy& policy,
                                            const tasks::Dataset& data,
                                            const NoiseSchedule& sched, std::uint64_t seed) {
  if (data.rows.empty()) throw ContractViolation("build_feature_dataset: empty dataset");
  FeatureDataset out;
  out.feat_dim = policy.config().feat_dim;
  Rng base(seed);
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& row = data.rows[i];
    const policy::ContextCache cache = policy.encode_context(row.context, row.instruction);
    Rng row_rng = base.fork(i);
    try {
      auto [feature, sigma, err] = search_feature(policy, cache, row.action, sched, row_rng);
      out.rows.push_back({std::move(feature), i, sigma, err});
    } catch (const SearchError& e) {
      throw SearchError(std::string(e.what()) + " (row " + std::to_string(i) + ")");
    }
  }
  return out;
}

// Binary records under a text header carrying dims and provenance digests.
inline void save_feature_dataset(const FeatureDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write feature dataset: " + path.string());
  out << "taco-features v1\n";
  out << "feat_dim " << data.feat_dim << "\n";
  out << "rows " << data.rows.size() << "\n";
  out << "policy_digest " << data.policy_digest << "\n";
  out << "dataset_digest " << data.dataset_digest << "\n";
  out << "end-header\n";
  for (const auto& row : data.rows) {
    io::write_u64(out, row.demo_id);
    io::write_f64(out, row.sigma);
    io::write_f64(out, row.residual);
    for (double v : row.feature) io::write_f64(out, v);
  }
}

inline FeatureDataset load_feature_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing feature dataset: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "taco-features v1") throw ArtifactError("bad feature file magic in " + path.string());
  FeatureDataset data;
  std::size_t n_rows = 0;
  while (std::getline(in, line) && line != "end-header") {
    const auto pos = line.find(' ');
    if (pos == std::string::npos) continue;
    const std::string key = line.substr(0, pos);
    const std::string value = line.substr(pos + 1);
    if (key == "feat_dim") data.feat_dim = std::stoul(value);
    if (key == "rows") n_rows = std::stoul(value);
    if (key == "policy_digest") data.policy_digest = value;
    if (key == "dataset_digest") data.dataset_digest = value;
  }
  data.rows.resize(n_rows);
  for (auto& row : data.rows) {
    row.demo_id = static_cast<std::size_t>(io::read_u64(in));
    row.sigma = io::read_f64(in);
    row.residual = io::read_f64(in);
    row.feature.resize(data.feat_dim);
    for (auto& v : row.feature) v = io::read_f64(in);
  }
  return data;
}

}  // namespace taco::search
