#include "mempo/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mempo/rng.hpp"

namespace mempo {

namespace {

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  for (int w = 0; w < count; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

// P[answer | query, memory content] for step t, mirroring the memory-reward
// conditioning.
double memory_answer_probability(const PolicyParams& params, const Vocabulary& vocab,
                                 const Trajectory& traj, const Segment& mem,
                                 std::span<const TokenId> gold) {
  std::vector<TokenId> conditioning = mem.tokens;
  conditioning.push_back(vocab.open_tag(SegmentKind::Answer));
  return answer_conditional_probability(params, traj.query, conditioning, gold);
}

}  // namespace

EvalReport evaluate(const PolicyParams& params, std::span<const MultiObjectiveQuestion> questions,
                    const KnowledgeBase& kb, const Vocabulary& vocab, const EvalOptions& opts,
                    std::vector<Trajectory>* trajectories_out) {
  EvalReport report;
  report.count = static_cast<int>(questions.size());
  report.rows.resize(questions.size());
  std::vector<Trajectory> trajectories(questions.size());

  SampleConfig sample;
  sample.greedy = true;
  sample.max_new_tokens = opts.max_new_tokens;

  EpisodeConfig ep;
  ep.max_turns = opts.max_turns;
  ep.context_mode = opts.mode;
  ep.top_k = opts.top_k;
  ep.sample = sample;

  const StepSampler sampler = make_policy_sampler(params, sample, vocab);

  parallel_for(static_cast<int>(questions.size()), opts.workers, [&](int i) {
    const auto& question = questions[static_cast<std::size_t>(i)];
    EpisodeResult episode =
        run_episode(sampler, question, kb, vocab, ep,
                    derive_seed(opts.seed, {static_cast<std::uint64_t>(i)}));
    const Trajectory& traj = episode.trajectory;
    EvalRow row;
    row.question_index = i;
    row.steps = static_cast<int>(traj.steps.size());
    row.terminated = traj.terminated;
    if (traj.predicted_answer.has_value()) {
      const JudgeScore score =
          judge_answer(vocab.render(*traj.predicted_answer), question.gold_answers);
      row.em = score.em;
      row.f1 = score.f1;
    }
    const TokenUsage usage = token_usage(traj, opts.mode, vocab);
    row.total_tokens = usage.total_tokens;
    row.peak_step_tokens = usage.peak_step_tokens;
    report.rows[static_cast<std::size_t>(i)] = row;
    trajectories[static_cast<std::size_t>(i)] = std::move(episode.trajectory);
  });

  if (report.count > 0) {
    for (const EvalRow& row : report.rows) {
      report.f1_mean += row.f1;
      report.em_mean += row.em;
      report.tt_mean += static_cast<double>(row.total_tokens);
      report.pt_mean += static_cast<double>(row.peak_step_tokens);
    }
    const double n = static_cast<double>(report.count);
    report.f1_mean /= n;
    report.em_mean /= n;
    report.tt_mean /= n;
    report.pt_mean /= n;
  }
  if (trajectories_out != nullptr) *trajectories_out = std::move(trajectories);
  return report;
}

ProbabilityReport analyze_probabilities(const PolicyParams& params, const Vocabulary& vocab,
                                        std::span<const Trajectory> trajectories,
                                        std::span<const MultiObjectiveQuestion> questions,
                                        int num_bins) {
  if (trajectories.size() != questions.size())
    throw std::invalid_argument("trajectories and questions must align");
  if (num_bins < 1) throw std::invalid_argument("num_bins must be >= 1");

  ProbabilityReport report;
  report.bins.resize(static_cast<std::size_t>(num_bins));
  for (int b = 0; b < num_bins; ++b) {
    report.bins[static_cast<std::size_t>(b)].lo = static_cast<double>(b) / num_bins;
    report.bins[static_cast<std::size_t>(b)].hi = static_cast<double>(b + 1) / num_bins;
  }

  std::vector<double> bin_f1_sum(static_cast<std::size_t>(num_bins), 0.0);
  std::map<int, std::pair<long long, double>> per_step;  // t -> (count, p_mem sum)
  int max_steps = 0;

  for (std::size_t m = 0; m < trajectories.size(); ++m) {
    const Trajectory& traj = trajectories[m];
    max_steps = std::max(max_steps, static_cast<int>(traj.steps.size()));
    const std::vector<TokenId> gold = gold_answer_tokens(questions[m], vocab);
    double traj_f1 = 0.0;
    if (traj.predicted_answer.has_value())
      traj_f1 = judge_answer(vocab.render(*traj.predicted_answer), questions[m].gold_answers).f1;
    for (const Step& step : traj.steps) {
      const Segment* mem = step.find(SegmentKind::Mem);
      if (mem == nullptr) continue;
      const double p = memory_answer_probability(params, vocab, traj, *mem, gold);
      int bin = std::min(num_bins - 1, static_cast<int>(std::floor(p * num_bins)));
      bin = std::max(0, bin);
      ++report.bins[static_cast<std::size_t>(bin)].count;
      bin_f1_sum[static_cast<std::size_t>(bin)] += traj_f1;
      ++report.mem_samples;
      auto& slot = per_step[step.index];
      ++slot.first;
      slot.second += p;
    }
  }

  if (report.mem_samples > 0)
    for (int b = 0; b < num_bins; ++b) {
      auto& bin = report.bins[static_cast<std::size_t>(b)];
      bin.share = static_cast<double>(bin.count) / static_cast<double>(report.mem_samples);
      bin.mean_f1 = bin.count > 0 ? bin_f1_sum[static_cast<std::size_t>(b)] /
                                        static_cast<double>(bin.count)
                                  : 0.0;
    }

  for (int t = 1; t <= max_steps; ++t) {
    StepProbability row;
    row.step = t;
    long long active = 0;
    for (const Trajectory& traj : trajectories)
      if (static_cast<int>(traj.steps.size()) >= t) ++active;
    row.active_share = trajectories.empty()
                           ? 0.0
                           : static_cast<double>(active) / static_cast<double>(trajectories.size());
    const auto it = per_step.find(t);
    if (it != per_step.end()) {
      row.mem_count = it->second.first;
      row.mean_p_mem = it->second.second / static_cast<double>(it->second.first);
    }
    report.steps.push_back(row);
  }
  return report;
}

}  // namespace mempo
