#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "taco/cfn/cfn.hpp"
#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"

namespace taco::harness {

// Flat dotted-key configuration. One RunConfig fully determines every
// artifact of a run; to_text()/parse round-trip losslessly.
struct RunConfig {
  std::string task_preset = "a";
  std::size_t data_n = 5000;
  std::uint64_t seed = 7;
  std::string out_dir = "out";

  std::string policy_kind = "flow";  // flow | categorical
  std::size_t policy_embed_dim = 16;
  std::size_t policy_cache_dim = 64;
  std::size_t policy_feat_dim = 64;
  std::size_t policy_hidden_dim = 128;
  std::size_t policy_integration_steps = 10;
  std::size_t policy_train_steps = 12000;
  std::size_t policy_train_batch = 64;
  std::size_t policy_bins = 21;
  double policy_grid_lo = -2.0;
  double policy_grid_hi = 3.0;
  double policy_temperature = 1.0;

  cfn::CfnConfig cfn;

  std::string search_mode = "fixed";  // fixed | linear-grid
  double search_noise_fraction = 0.1;
  std::size_t search_n = 50;

  std::vector<std::size_t> eval_m_list = {1, 4, 16};
  std::vector<std::string> eval_scorers = {"cfn", "exact-density-oracle"};
  std::size_t eval_episodes = 2000;

  std::size_t ablate_m = 16;
  std::size_t ablate_episodes = 1000;

  std::vector<std::size_t> bench_m_list = {1, 8, 32};
  std::size_t bench_repetitions = 50;

  std::string to_text() const {
    std::ostringstream out;
    out << "task.preset " << task_preset << "\n";
    out << "data.n " << data_n << "\n";
    out << "run.seed " << seed << "\n";
    out << "run.out " << out_dir << "\n";
    out << "policy.kind " << policy_kind << "\n";
    out << "policy.embed_dim " << policy_embed_dim << "\n";
    out << "policy.cache_dim " << policy_cache_dim << "\n";
    out << "policy.feat_dim " << policy_feat_dim << "\n";
    out << "policy.hidden_dim " << policy_hidden_dim << "\n";
    out << "policy.integration_steps " << policy_integration_steps << "\n";
    out << "policy.train_steps " << policy_train_steps << "\n";
    out << "policy.train_batch " << policy_train_batch << "\n";
    out << "policy.bins " << policy_bins << "\n";
    out << "policy.grid_lo " << io::fmt_double(policy_grid_lo) << "\n";
    out << "policy.grid_hi " << io::fmt_double(policy_grid_hi) << "\n";
    out << "policy.temperature " << io::fmt_double(policy_temperature) << "\n";
    out << "cfn.output_dim " << cfn.output_dim << "\n";
    out << "cfn.hidden_dim " << cfn.hidden_dim << "\n";
    out << "cfn.feature_scale " << io::fmt_double(cfn.feature_scale) << "\n";
    out << "cfn.epochs " << cfn.epochs << "\n";
    out << "cfn.batch " << cfn.batch << "\n";
    out << "cfn.grad_accum " << cfn.grad_accum << "\n";
    out << "cfn.dropout " << io::fmt_double(cfn.dropout_rate) << "\n";
    out << "search.mode " << search_mode << "\n";
    out << "search.noise_fraction " << io::fmt_double(search_noise_fraction) << "\n";
    out << "search.n " << search_n << "\n";
    out << "eval.m_list " << join_sizes(eval_m_list) << "\n";
    out << "eval.scorers " << join_strings(eval_scorers) << "\n";
    out << "eval.episodes " << eval_episodes << "\n";
    out << "ablate.m " << ablate_m << "\n";
    out << "ablate.episodes " << ablate_episodes << "\n";
    out << "bench.m_list " << join_sizes(bench_m_list) << "\n";
    out << "bench.repetitions " << bench_repetitions << "\n";
    return out.str();
  }

  std::string digest() const { return digest_string(to_text()); }

  void set(const std::string& key, const std::string& value) {
    if (key == "task.preset") task_preset = value;
    else if (key == "data.n") data_n = parse_size(key, value);
    else if (key == "run.seed") seed = std::stoull(value);
    else if (key == "run.out") out_dir = value;
    else if (key == "policy.kind") policy_kind = value;
    else if (key == "policy.embed_dim") policy_embed_dim = parse_size(key, value);
    else if (key == "policy.cache_dim") policy_cache_dim = parse_size(key, value);
    else if (key == "policy.feat_dim") policy_feat_dim = parse_size(key, value);
    else if (key == "policy.hidden_dim") policy_hidden_dim = parse_size(key, value);
    else if (key == "policy.integration_steps") policy_integration_steps = parse_size(key, value);
    else if (key == "policy.train_steps") policy_train_steps = parse_size(key, value);
    else if (key == "policy.train_batch") policy_train_batch = parse_size(key, value);
    else if (key == "policy.bins") policy_bins = parse_size(key, value);
    else if (key == "policy.grid_lo") policy_grid_lo = io::parse_double(value);
    else if (key == "policy.grid_hi") policy_grid_hi = io::parse_double(value);
    else if (key == "policy.temperature") policy_temperature = io::parse_double(value);
    else if (key == "cfn.output_dim") cfn.output_dim = parse_size(key, value);
    else if (key == "cfn.hidden_dim") cfn.hidden_dim = parse_size(key, value);
    else if (key == "cfn.feature_scale") cfn.feature_scale = io::parse_double(value);
    else if (key == "cfn.epochs") cfn.epochs = parse_size(key, value);
    else if (key == "cfn.batch") cfn.batch = parse_size(key, value);
    else if (key == "cfn.grad_accum") cfn.grad_accum = parse_size(key, value);
    else if (key == "cfn.dropout") cfn.dropout_rate = io::parse_double(value);
    else if (key == "search.mode") search_mode = value;
    else if (key == "search.noise_fraction") search_noise_fraction = io::parse_double(value);
    else if (key == "search.n") search_n = parse_size(key, value);
    else if (key == "eval.m_list") eval_m_list = parse_sizes(key, value);
    else if (key == "eval.scorers") eval_scorers = io::split(value, ',');
    else if (key == "eval.episodes") eval_episodes = parse_size(key, value);
    else if (key == "ablate.m") ablate_m = parse_size(key, value);
    else if (key == "ablate.episodes") ablate_episodes = parse_size(key, value);
    else if (key == "bench.m_list") bench_m_list = parse_sizes(key, value);
    else if (key == "bench.repetitions") bench_repetitions = parse_size(key, value);
    else throw UsageError("unknown config key: '" + key + "'");
  }

  static RunConfig from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = io::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto pos = t.find(' ');
      if (pos == std::string::npos) throw UsageError("bad config line: '" + t + "'");
      cfg.set(t.substr(0, pos), io::trim(t.substr(pos + 1)));
    }
    return cfg;
  }

  static RunConfig from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("missing config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ArtifactError("cannot write config: " + path.string());
    out << to_text();
  }

 private:
  static std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
      return std::stoul(value);
    } catch (const std::exception&) {
      throw UsageError("config key " + key + ": bad count '" + value + "'");
    }
  }

  static std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    for (const auto& part : io::split(value, ','))
      if (!io::trim(part).empty()) out.push_back(parse_size(key, io::trim(part)));
    if (out.empty()) throw UsageError("config key " + key + ": empty list");
    return out;
  }

  static std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(v[i]);
    }
    return out;
  }

  static std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += v[i];
    }
    return out;
  }
};

// Stable sub-stream seeds for the pipeline stages.
inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stage) {
  return Rng(seed).fork(stage).seed();
}

}  // namespace taco::harness
