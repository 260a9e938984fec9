#pragma once

#include <functional>
#include <span>

#include "mempo/advantages.hpp"
#include "mempo/dataset.hpp"
#include "mempo/knowledge.hpp"
#include "mempo/policy.hpp"
#include "mempo/trajectory.hpp"

namespace mempo {

struct EpisodeConfig {
  int max_turns = 8;
  ContextMode context_mode = ContextMode::truncated();
  int top_k = 3;
  SampleConfig sample;
};

// Emits the policy token stream for one step. Scripted agents may inspect the
// partial trajectory (tool feedback lives there, not in truncated contexts).
using StepSampler = std::function<std::vector<TokenId>(
    std::span<const TokenId> context, int step_index, std::uint64_t step_seed,
    const Trajectory& so_far)>;

// Samples one tagged step from the policy, stopping at the first closing
// action tag.
StepSampler make_policy_sampler(const PolicyParams& params, SampleConfig base,
                                const Vocabulary& vocab);

// Replays a precomputed expert script; emits nothing once the script ends.
StepSampler make_script_sampler(const ExpertScript& script, const Vocabulary& vocab);

struct EpisodeResult {
  Trajectory trajectory;
  std::vector<StepRecord> steps;  // old_logp left empty; filled at collection
};

// The interaction loop: build the context for step t, sample one step, parse
// it, execute any tool call against the knowledge base, and stop on an answer,
// the turn limit, or a parse failure (the trajectory is retained either way).
EpisodeResult run_episode(const StepSampler& sampler, const MultiObjectiveQuestion& question,
                          const KnowledgeBase& kb, const Vocabulary& vocab,
                          const EpisodeConfig& cfg, std::uint64_t episode_seed);

// Expert demonstration for one question, or nullopt when the scripted solver
// fails (generated datasets guarantee it succeeds).
std::optional<EpisodeResult> make_demonstration(const MultiObjectiveQuestion& question,
                                                const KnowledgeBase& kb, const Vocabulary& vocab,
                                                const EpisodeConfig& cfg);

}  // namespace mempo
