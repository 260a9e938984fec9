#include "mempo/rewards.hpp"

#include <cmath>

namespace mempo {

TrajectoryReward trajectory_reward(const Trajectory& traj, const MultiObjectiveQuestion& gold,
                                   const Vocabulary& vocab) {
  TrajectoryReward reward;
  reward.format_ok = check_format(traj).valid;
  if (traj.predicted_answer.has_value()) {
    const JudgeScore score = judge_answer(vocab.render(*traj.predicted_answer), gold.gold_answers);
    reward.answer_ok = score.em == 1;
  }
  reward.value = reward.format_ok && reward.answer_ok ? 1.0 : 0.0;
  return reward;
}

double geometric_mean_probability(std::span<const double> token_logps) {
  if (token_logps.empty()) throw EmptyAnswer("geometric mean over zero tokens");
  double sum = 0.0;
  for (double lp : token_logps) sum += lp;
  return std::exp(sum / static_cast<double>(token_logps.size()));
}

double answer_conditional_probability(const PolicyParams& params,
                                      std::span<const TokenId> base,
                                      std::span<const TokenId> conditioning,
                                      std::span<const TokenId> answer) {
  if (answer.empty()) throw EmptyAnswer("answer must be non-empty");
  std::vector<TokenId> ctx(base.begin(), base.end());
  ctx.insert(ctx.end(), conditioning.begin(), conditioning.end());
  const Eigen::VectorXd logps = log_prob(params, ctx, answer);
  return geometric_mean_probability(std::span<const double>(logps.data(),
                                                            static_cast<std::size_t>(logps.size())));
}

std::vector<TokenId> gold_answer_tokens(const MultiObjectiveQuestion& question,
                                        const Vocabulary& vocab) {
  std::string joined;
  for (std::size_t i = 0; i < question.gold_answers.size(); ++i) {
    if (i > 0) joined += " ; ";
    joined += question.gold_answers[i];
  }
  return vocab.encode(joined);
}

MemoryReward memory_reward(const PolicyParams& params, const Vocabulary& vocab,
                           const Trajectory& traj, int t,
                           std::span<const TokenId> gold_tokens) {
  if (t < 1 || t > static_cast<int>(traj.steps.size()))
    throw NoMemorySegment("step " + std::to_string(t) + " out of range");
  const Step& step = traj.steps[static_cast<std::size_t>(t - 1)];
  const Segment* mem = step.find(SegmentKind::Mem);
  if (mem == nullptr)
    throw NoMemorySegment("step " + std::to_string(t) + " has no memory segment");

  // Prefix rendering of steps 1..t-1, every segment included.
  std::string prefix_text;
  for (int s = 0; s < t - 1; ++s) {
    if (s > 0) prefix_text.push_back('\n');
    prefix_text += render_step(traj.steps[static_cast<std::size_t>(s)], vocab);
  }

  const TokenId answer_open = vocab.open_tag(SegmentKind::Answer);

  std::vector<TokenId> mem_ctx = mem->tokens;
  mem_ctx.push_back(answer_open);
  std::vector<TokenId> prefix_ctx = vocab.encode(prefix_text);
  prefix_ctx.push_back(answer_open);

  MemoryReward reward;
  reward.step = t;
  reward.p_mem = answer_conditional_probability(params, traj.query, mem_ctx, gold_tokens);
  reward.epsilon = answer_conditional_probability(params, traj.query, prefix_ctx, gold_tokens);
  reward.value = reward.p_mem - reward.epsilon;
  return reward;
}

}  // namespace mempo
