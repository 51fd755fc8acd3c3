#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "taco/core/digest.hpp"
#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"
#include "taco/core/rng.hpp"
#include "taco/tasks/task_spec.hpp"

namespace taco::tasks {

// One decision step: context, instruction id, clean action chunk.
struct Demonstration {
  Vec context;
  int instruction = 0;
  Vec action;
};

struct Dataset {
  std::string task_id;
  std::uint64_t seed = 0;
  std::vector<Demonstration> rows;
  // Which mixture mode produced each row. Persisted to a sidecar file and
  // consumed only by test oracles, never by training or inference code.
  std::vector<int> hidden_modes;
};

inline Demonstration sample_demonstration(const TaskSpec& task, int instruction, Rng& rng,
                                          int* mode_out = nullptr) {
  Demonstration demo;
  demo.instruction = instruction;
  demo.context.resize(task.context_dim);
  rng.fill_normal(demo.context);
  const std::size_t k = rng.categorical(task.weights);
  if (mode_out) *mode_out = static_cast<int>(k);
  demo.action = task.mode_center(k, demo.context);
  for (auto& a : demo.action) a += task.mode_std * rng.normal();
  return demo;
}

inline Dataset generate_dataset(const TaskSpec& task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ContractViolation("generate_dataset: n must be positive");
  task.validate();
  Dataset data;
  data.task_id = task.id;
  data.seed = seed;
  data.rows.reserve(n);
  data.hidden_modes.reserve(n);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int instruction =
        task.instruction_count > 1 ? rng.uniform_int(static_cast<int>(task.instruction_count)) : 0;
    int mode = 0;
    data.rows.push_back(sample_demonstration(task, instruction, rng, &mode));
    data.hidden_modes.push_back(mode);
  }
  return data;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& dataset_path) {
  return dataset_path.string() + ".modes";
}

// Text format: '#'-prefixed header, then one row per line:
//   c0 c1 ... | instruction | a0 a1 ...
// Mode labels go to a separate sidecar file so no production reader ever
// touches them.
inline void save_dataset(const Dataset& data, const std::filesystem::path& path,
                         const std::string& config_digest) {
  if (data.rows.empty()) throw ContractViolation("save_dataset: empty dataset");
  const std::size_t context_dim = data.rows.front().context.size();
  const std::size_t action_dim = data.rows.front().action.size();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write dataset: " + path.string());
  out << "# taco-dataset v1\n";
  out << "# task " << data.task_id << "\n";
  out << "# n " << data.rows.size() << "\n";
  out << "# seed " << data.seed << "\n";
  out << "# context_dim " << context_dim << "\n";
  out << "# action_dim " << action_dim << "\n";
  out << "# config_digest " << config_digest << "\n";
  for (const auto& row : data.rows) {
    bool first = true;
    for (double c : row.context) {
      if (!first) out << ' ';
      out << io::fmt_double(c);
      first = false;
    }
    out << " | " << row.instruction << " |";
    for (double a : row.action) out << ' ' << io::fmt_double(a);
    out << "\n";
  }
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) throw ArtifactError("cannot write mode sidecar for " + path.string());
  side << "# taco-dataset-modes v1\n";
  side << "# n " << data.hidden_modes.size() << "\n";
  for (int m : data.hidden_modes) side << m << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& path, bool with_sidecar = false) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing dataset: " + path.string());
  Dataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "task") hs >> data.task_id;
      if (key == "seed") hs >> data.seed;
      continue;
    }
    const auto fields = io::split(line, '|');
    if (fields.size() != 3) throw ArtifactError("bad dataset row in " + path.string());
    Demonstration demo;
    {
      std::istringstream cs(fields[0]);
      double v;
      while (cs >> v) demo.context.push_back(v);
    }
    demo.instruction = std::stoi(io::trim(fields[1]));
    {
      std::istringstream as(fields[2]);
      double v;
      while (as >> v) demo.action.push_back(v);
    }
    data.rows.push_back(std::move(demo));
  }
  if (with_sidecar) {
    std::ifstream side(sidecar_path(path));
    if (!side) throw ArtifactError("missing mode sidecar for " + path.string());
    while (std::getline(side, line)) {
      if (line.empty() || line[0] == '#') continue;
      data.hidden_modes.push_back(std::stoi(line));
    }
    if (data.hidden_modes.size() != data.rows.size())
      throw ArtifactError("mode sidecar row count mismatch for " + path.string());
  }
  return data;
}

}  // namespace taco::tasks
