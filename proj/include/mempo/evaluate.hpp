#pragma once

#include <span>
#include <vector>

#include "mempo/episode.hpp"
#include "mempo/trainer.hpp"

namespace mempo {

struct EvalRow {
  int question_index = 0;
  int em = 0;
  double f1 = 0.0;
  long long total_tokens = 0;
  long long peak_step_tokens = 0;
  int steps = 0;
  Termination terminated = Termination::TurnLimit;
};

struct EvalReport {
  int count = 0;  // zero-count reports are explicit, not NaN-laden
  double f1_mean = 0.0;
  double em_mean = 0.0;
  double tt_mean = 0.0;
  double pt_mean = 0.0;
  std::vector<EvalRow> rows;
};

struct EvalOptions {
  ContextMode mode = ContextMode::truncated();
  int max_turns = 8;
  int top_k = 3;
  int max_new_tokens = 48;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Greedy-decoding evaluation over a question set; deterministic. TT/PT are
// computed by token_usage under the same context mode the episode ran with.
EvalReport evaluate(const PolicyParams& params, std::span<const MultiObjectiveQuestion> questions,
                    const KnowledgeBase& kb, const Vocabulary& vocab, const EvalOptions& opts,
                    std::vector<Trajectory>* trajectories_out = nullptr);

struct ProbabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  long long count = 0;
  double share = 0.0;    // of all memory samples
  double mean_f1 = 0.0;  // trajectory F1 of samples in the bin
};

struct StepProbability {
  int step = 0;
  long long mem_count = 0;
  double mean_p_mem = 0.0;
  double active_share = 0.0;  // trajectories still running at this step
};

struct ProbabilityReport {
  long long mem_samples = 0;
  std::vector<ProbabilityBin> bins;
  std::vector<StepProbability> steps;
};

// Distribution of answer-given-memory probabilities over fixed [0,1] bins with
// per-bin answer quality, plus the per-step mean-probability series.
// `questions` must align with `trajectories` by position.
ProbabilityReport analyze_probabilities(const PolicyParams& params, const Vocabulary& vocab,
                                        std::span<const Trajectory> trajectories,
                                        std::span<const MultiObjectiveQuestion> questions,
                                        int num_bins = 10);

}  // namespace mempo
