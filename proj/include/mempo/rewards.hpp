#pragma once

#include <span>
#include <vector>

#include "mempo/dataset.hpp"
#include "mempo/policy.hpp"
#include "mempo/trajectory.hpp"

namespace mempo {

// Binary outcome reward: 1 iff the output format is proper and the predicted
// answer is an exact match.
struct TrajectoryReward {
  double value = 0.0;  // 0 or 1
  bool format_ok = false;
  bool answer_ok = false;
};

TrajectoryReward trajectory_reward(const Trajectory& traj, const MultiObjectiveQuestion& gold,
                                   const Vocabulary& vocab);

// Step-level memory reward: answer probability conditioned on the memory
// segment alone, minus the same probability conditioned on the full rendered
// prefix (the bias term).
struct MemoryReward {
  int trajectory_index = 0;
  int step = 0;
  double p_mem = 0.0;    // in (0, 1]
  double epsilon = 0.0;  // in (0, 1]
  double value = 0.0;    // p_mem - epsilon
};

struct NoMemorySegment : std::runtime_error {
  explicit NoMemorySegment(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyAnswer : std::runtime_error {
  explicit EmptyAnswer(const std::string& what) : std::runtime_error(what) {}
};

// Geometric mean of probabilities given per-token log-probabilities:
// exp(mean(logp)). Computed in log-space so long answers cannot underflow.
double geometric_mean_probability(std::span<const double> token_logps);

// P[answer | base ++ conditioning] as the geometric mean over answer tokens.
double answer_conditional_probability(const PolicyParams& params,
                                      std::span<const TokenId> base,
                                      std::span<const TokenId> conditioning,
                                      std::span<const TokenId> answer);

// The gold answer token sequence used by every memory reward of a question:
// gold answers joined by " ; ".
std::vector<TokenId> gold_answer_tokens(const MultiObjectiveQuestion& question,
                                        const Vocabulary& vocab);

// Memory reward of step t (1-based). p_mem conditions on (query, mem content);
// epsilon conditions on (query, full rendered prefix of steps 1..t-1). Both
// conditionings end with the answer open tag so they mirror answer-generation
// conditions; when the memory text equals the prefix rendering the two
// contexts coincide and the reward is exactly zero.
MemoryReward memory_reward(const PolicyParams& params, const Vocabulary& vocab,
                           const Trajectory& traj, int t,
                           std::span<const TokenId> gold_tokens);

}  // namespace mempo
