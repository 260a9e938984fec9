#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mempo/rewards.hpp"
#include "mempo/trajectory.hpp"

namespace mempo {

enum class StdMode : std::uint8_t { Population, Sample };
enum class ZeroStdPolicy : std::uint8_t { AllZero, EpsilonFloor };
enum class GroupMode : std::uint8_t { Pooled, PerStep };

// (r_j - mean) / std. Zero-variance groups map to all zeros under AllZero,
// or use a 1e-8 denominator floor under EpsilonFloor.
std::vector<double> group_normalize(std::span<const double> rewards, StdMode std_mode,
                                    ZeroStdPolicy zero_std);

// Per-token bookkeeping of one policy generation pass: the context it was
// conditioned on and the continuation emitted, with enough labeling to place
// tokens in segments. Environment-returned tokens never appear here.
struct StepRecord {
  int step_index = 1;
  bool parse_failed = false;  // raw tail of a FormatFailure episode
  std::vector<TokenId> context;
  std::vector<TokenId> continuation;
  Eigen::VectorXd old_logp;              // recorded at collection time
  std::vector<SegmentKind> token_kind;   // per continuation position
  std::vector<bool> token_is_tag;        // tag tokens carry no memory credit
};

struct TrajectoryRollout {
  Trajectory trajectory;
  std::vector<StepRecord> steps;

  long long policy_token_count() const {
    long long n = 0;
    for (const auto& s : steps) n += static_cast<long long>(s.continuation.size());
    return n;
  }
};

// The N trajectories sampled for one query plus their rewards.
struct RolloutGroup {
  int query_index = 0;
  std::vector<TrajectoryRollout> rollouts;
  std::vector<TrajectoryReward> traj_rewards;
  std::vector<MemoryReward> mem_rewards;  // one per (i, t) with a Mem segment
};

// Token-aligned advantages for one trajectory: memory-content tokens carry
// A^T + A^M of their step, every other policy token carries A^T.
struct AdvantageMap {
  double traj_advantage = 0.0;
  std::map<int, double> mem_advantage_by_step;
  std::vector<double> token_advantage;  // aligned with the policy token stream
};

struct IndexMismatch : std::runtime_error {
  explicit IndexMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Group-relative trajectory advantages over {R^T(tau_j)}.
std::vector<double> trajectory_advantages(const RolloutGroup& group);

// Group-relative memory advantages. Pooled mode normalizes all memory rewards
// of the group together; PerStep restricts each normalization group to memory
// segments sharing a step index.
std::vector<double> memory_advantages(const RolloutGroup& group, GroupMode mode);

// Token-level combination: per-trajectory advantage arrays aligned with the
// policy token stream. `mem_adv` is parallel to group.mem_rewards.
std::vector<AdvantageMap> combine(const RolloutGroup& group, std::span<const double> traj_adv,
                                  std::span<const double> mem_adv);

// Convenience: trajectory + memory advantages + combination in one call.
std::vector<AdvantageMap> compute_advantages(const RolloutGroup& group, GroupMode mode,
                                             bool memory_credit);

}  // namespace mempo
