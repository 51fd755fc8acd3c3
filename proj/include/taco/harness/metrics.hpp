#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include "taco/core/errors.hpp"
#include "taco/core/io.hpp"

namespace taco::harness {

// Append-only diagnostic log, one line per record. Wall-clock lives here
// and only here; the result CSVs stay byte-reproducible.
class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& path, std::string run_id,
                      std::string config_digest)
      : path_(path), run_id_(std::move(run_id)), config_digest_(std::move(config_digest)) {}

  void append(const std::string& stage, const std::string& key, double value,
              double wall_ms = 0.0) {
    const bool fresh = !std::filesystem::exists(path_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw ArtifactError("cannot append metrics: " + path_.string());
    if (fresh) out << "run_id,stage,key,value,wall_ms,config_digest\n";
    out << run_id_ << ',' << stage << ',' << key << ',' << io::fmt_double(value) << ','
        << io::fmt_double(wall_ms) << ',' << config_digest_ << "\n";
  }

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::string config_digest_;
};

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}

  double elapsed_ms() const {
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace taco::harness
