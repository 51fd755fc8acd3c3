#pragma once

#include <stdexcept>
#include <string>

namespace taco {

// Caller passed arguments outside an operation's documented domain.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Tensor dimensions do not line up.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimization produced non-finite values.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite state encountered while sampling from a policy.
struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A verifier produced a non-finite score.
struct ScoringError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Feature search could not produce a finite candidate.
struct SearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage is missing one of its input artifacts.
struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An artifact's recorded upstream digest does not match the file on disk.
struct ProvenanceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad command-line or config input.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Cached and uncached generation disagreed.
struct CacheError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace taco
