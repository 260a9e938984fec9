#include "mempo/advantages.hpp"

#include <cmath>

namespace mempo {

std::vector<double> group_normalize(std::span<const double> rewards, StdMode std_mode,
                                    ZeroStdPolicy zero_std) {
  const std::size_t n = rewards.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom_n =
      std_mode == StdMode::Population ? static_cast<double>(n) : static_cast<double>(n > 1 ? n - 1 : 1);
  var /= denom_n;
  const double std = std::sqrt(var);

  std::vector<double> out(n, 0.0);
  if (std == 0.0) {
    if (zero_std == ZeroStdPolicy::AllZero) return out;
    for (std::size_t i = 0; i < n; ++i) out[i] = (rewards[i] - mean) / 1e-8;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = (rewards[i] - mean) / std;
  return out;
}

std::vector<double> trajectory_advantages(const RolloutGroup& group) {
  std::vector<double> rewards;
  rewards.reserve(group.traj_rewards.size());
  for (const auto& r : group.traj_rewards) rewards.push_back(r.value);
  return group_normalize(rewards, StdMode::Population, ZeroStdPolicy::AllZero);
}

std::vector<double> memory_advantages(const RolloutGroup& group, GroupMode mode) {
  const std::size_t n = group.mem_rewards.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (mode == GroupMode::Pooled) {
    std::vector<double> rewards;
    rewards.reserve(n);
    for (const auto& r : group.mem_rewards) rewards.push_back(r.value);
    return group_normalize(rewards, StdMode::Population, ZeroStdPolicy::AllZero);
  }
  // PerStep: normalize within each step index separately.
  std::map<int, std::vector<std::size_t>> by_step;
  for (std::size_t i = 0; i < n; ++i) by_step[group.mem_rewards[i].step].push_back(i);
  for (const auto& [step, indices] : by_step) {
    std::vector<double> rewards;
    rewards.reserve(indices.size());
    for (std::size_t i : indices) rewards.push_back(group.mem_rewards[i].value);
    const auto normalized = group_normalize(rewards, StdMode::Population, ZeroStdPolicy::AllZero);
    for (std::size_t j = 0; j < indices.size(); ++j) out[indices[j]] = normalized[j];
  }
  return out;
}

std::vector<AdvantageMap> combine(const RolloutGroup& group, std::span<const double> traj_adv,
                                  std::span<const double> mem_adv) {
  if (traj_adv.size() != group.rollouts.size())
    throw IndexMismatch("trajectory advantages do not match group size");
  if (mem_adv.size() != group.mem_rewards.size())
    throw IndexMismatch("memory advantages do not match memory reward count");

  // (i, t) -> A^M lookup, validated against existing Mem segments.
  std::map<std::pair<int, int>, double> mem_by_index;
  for (std::size_t m = 0; m < group.mem_rewards.size(); ++m) {
    const MemoryReward& r = group.mem_rewards[m];
    if (r.trajectory_index < 0 ||
        r.trajectory_index >= static_cast<int>(group.rollouts.size()))
      throw IndexMismatch("memory reward names trajectory " + std::to_string(r.trajectory_index));
    const auto& traj = group.rollouts[static_cast<std::size_t>(r.trajectory_index)].trajectory;
    if (r.step < 1 || r.step > static_cast<int>(traj.steps.size()) ||
        traj.steps[static_cast<std::size_t>(r.step - 1)].find(SegmentKind::Mem) == nullptr)
      throw IndexMismatch("memory reward names step " + std::to_string(r.step) +
                          " without a memory segment");
    mem_by_index[{r.trajectory_index, r.step}] = mem_adv[m];
  }

  std::vector<AdvantageMap> maps;
  maps.reserve(group.rollouts.size());
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const TrajectoryRollout& rollout = group.rollouts[i];
    AdvantageMap map;
    map.traj_advantage = traj_adv[i];
    for (const auto& [key, adv] : mem_by_index)
      if (key.first == static_cast<int>(i)) map.mem_advantage_by_step[key.second] = adv;
    map.token_advantage.reserve(static_cast<std::size_t>(rollout.policy_token_count()));
    for (const StepRecord& step : rollout.steps) {
      const auto mem_it = map.mem_advantage_by_step.find(step.step_index);
      for (std::size_t k = 0; k < step.continuation.size(); ++k) {
        const bool in_mem = !step.parse_failed && !step.token_is_tag[k] &&
                            step.token_kind[k] == SegmentKind::Mem &&
                            mem_it != map.mem_advantage_by_step.end();
        map.token_advantage.push_back(in_mem ? map.traj_advantage + mem_it->second
                                             : map.traj_advantage);
      }
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<AdvantageMap> compute_advantages(const RolloutGroup& group, GroupMode mode,
                                             bool memory_credit) {
  const auto traj_adv = trajectory_advantages(group);
  std::vector<double> mem_adv = memory_advantages(group, mode);
  if (!memory_credit) std::fill(mem_adv.begin(), mem_adv.end(), 0.0);
  return combine(group, traj_adv, mem_adv);
}

}  // namespace mempo
