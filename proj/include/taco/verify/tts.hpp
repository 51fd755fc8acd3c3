#pragma once

#include <string>
#include <vector>

#include "taco/core/errors.hpp"
#include "taco/core/rng.hpp"
#include "taco/policy/flow_policy.hpp"
#include "taco/verify/scorers.hpp"

namespace taco::verify {

// One decision step's generate-then-verify record.
struct CandidateSet {
  std::vector<PolicyOutput> candidates;
  std::vector<double> scores;
  std::size_t selected = 0;
  std::string context_digest;
};

inline Vec candidate_noise(std::uint64_t seed, std::size_t index, std::size_t action_dim) {
  Rng stream = Rng(seed).fork(index);
  return stream.normal_vec(action_dim);
}

// Encode the context once and reuse the cache across all M denoising
// passes. Noise for candidate i comes from a (seed, i) stream, so

// generation is order-independent and the M=1 candidate is a prefix of any
// larger batch.
inline std::vector<PolicyOutput> generate_candidates(const policy::FlowPolicy& policy,
                                                     const Vec& context, int instruction,
                                                     std::size_t m, std::size_t steps,
                                                     std::uint64_t seed) {
  if (m < 1) throw ContractViolation("generate_candidates: M must be >= 1");
  const policy::ContextCache cache = policy.encode_context(context, instruction);
  std::vector<PolicyOutput> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    try {
      out.push_back(
          policy.sample_action(cache, candidate_noise(seed, i, policy.config().action_dim), steps));
    } catch (const SamplingError& e) {
      throw SamplingError(std::string(e.what()) + " (candidate " + std::to_string(i) + ")");
    }
  }
  return out;
}

// Naive multi-pass baseline: re-encode the context for every candidate.
// Identical outputs to the cached path under the same noise streams.
inline std::vector<PolicyOutput> generate_candidates_uncached(const policy::FlowPolicy& policy,
                                                              const Vec& context, int instruction,
                                                              std::size_t m, std::size_t steps,
                                                              std::uint64_t seed) {
  if (m < 1) throw ContractViolation("generate_candidates: M must be >= 1");
  std::vector<PolicyOutput> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const policy::ContextCache cache = policy.encode_context(context, instruction);
    out.push_back(
        policy.sample_action(cache, candidate_noise(seed, i, policy.config().action_dim), steps));
  }
  return out;
}

inline std::vector<double> score_candidates(const Scorer& scorer, const Vec& context,
                                            int instruction,
                                            const std::vector<PolicyOutput>& candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = scorer.score(context, instruction, candidates[i]);
    if (!std::isfinite(s))
      throw ScoringError("non-finite score for candidate " + std::to_string(i));
    scores.push_back(s);
  }
  return scores;
}

// Argmax with ties to the lowest index.
inline std::size_t select_index(const std::vector<double>& scores) {
  if (scores.empty()) throw ContractViolation("select_index: empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

inline PolicyOutput select_action(const std::vector<PolicyOutput>& candidates,
                                  const std::vector<double>& scores) {
  if (candidates.empty() || candidates.size() != scores.size())
    throw ContractViolation("select_action: candidates/scores must be equal, non-empty");
  return candidates[select_index(scores)];
}

inline CandidateSet make_candidate_set(const policy::FlowPolicy& policy, const Scorer& scorer,
                                       const Vec& context, int instruction, std::size_t m,
                                       std::size_t steps, std::uint64_t seed) {
  CandidateSet set;
  set.candidates = generate_candidates(policy, context, instruction, m, steps, seed);
  set.scores = score_candidates(scorer, context, instruction, set.candidates);
  set.selected = select_index(set.scores);
  Fnv1a h;
  h.update(context);
  h.update_u64(static_cast<std::uint64_t>(instruction));
  set.context_digest = h.hex();
  return set;
}

// Full generate -> score -> select step. M=1 degenerates to plain policy
// sampling with the same noise stream.
inline PolicyOutput act_with_taco(const policy::FlowPolicy& policy, const Scorer& scorer,
                                  const Vec& context, int instruction, std::size_t m,
                                  std::size_t steps, std::uint64_t seed) {
  const CandidateSet set = make_candidate_set(policy, scorer, context, instruction, m, steps, seed);
  return set.candidates[set.selected];
}

}  // namespace taco::verify
