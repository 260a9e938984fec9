#include "mempo/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mempo/rng.hpp"

namespace mempo {

namespace {

// Runs fn(0..n-1) on `workers` threads. Callers write results into per-index
// slots, so the output is identical for any worker count.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

// Demonstration steps as (context, continuation) pairs under truncated mode.
std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> demo_pairs(
    const Trajectory& demo, const Vocabulary& vocab) {
  std::vector<std::pair<std::vector<TokenId>, std::vector<TokenId>>> out;
  for (std::size_t s = 0; s < demo.steps.size(); ++s) {
    const int t = static_cast<int>(s) + 1;
    std::vector<TokenId> cont;
    for (const Segment& seg : demo.steps[s].segments) {
      if (seg.source != SegmentSource::PolicyGenerated) continue;
      const auto toks = segment_tokens(seg, vocab);
      cont.insert(cont.end(), toks.begin(), toks.end());
    }
    if (cont.empty()) continue;
    out.emplace_back(build_context(demo.query, demo.steps, t, ContextMode::truncated(), vocab),
                     std::move(cont));
  }
  return out;
}

}  // namespace

Optimizer::Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

void Optimizer::ascend(PolicyParams& params, const Eigen::VectorXd& grad) {
  if (kind_ == OptimizerKind::Sgd) {
    params.theta() += lr_ * grad;
    return;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (m_.size() != grad.size()) {
    m_ = Eigen::VectorXd::Zero(grad.size());
    v_ = Eigen::VectorXd::Zero(grad.size());
  }
  ++t_;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_.array().matrix() + (1.0 - beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  params.theta().array() +=
      lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps);
}

double demo_nll(const PolicyParams& params, const std::vector<Trajectory>& demos,
                const Vocabulary& vocab) {
  double loglik = 0.0;
  long long tokens = 0;
  for (const Trajectory& demo : demos) {
    for (const auto& [ctx, cont] : demo_pairs(demo, vocab)) {
      loglik += log_prob(params, ctx, cont).sum();
      tokens += static_cast<long long>(cont.size());
    }
  }
  return tokens > 0 ? -loglik / static_cast<double>(tokens) : 0.0;
}

BCReport behavior_clone(PolicyParams& params, const std::vector<Trajectory>& demos,
                        const Vocabulary& vocab, int epochs, double learning_rate,
                        OptimizerKind optimizer) {
  if (demos.empty()) throw EmptyDemoSet("behavior cloning requires at least one demonstration");
  BCReport report;
  report.epochs = epochs;
  if (epochs <= 0) return report;

  Optimizer opt(optimizer, learning_rate);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.theta().size());
    double loglik = 0.0;
    long long tokens = 0;
    for (const Trajectory& demo : demos) {
      for (const auto& [ctx, cont] : demo_pairs(demo, vocab)) {
        std::vector<double> ones(cont.size(), 1.0);
        loglik += accumulate_weighted_grad(params, ctx, cont, ones, grad).sum();
        tokens += static_cast<long long>(cont.size());
      }
    }
    if (tokens == 0) throw EmptyDemoSet("demonstrations contain no policy tokens");
    const double nll = -loglik / static_cast<double>(tokens);
    if (epoch == 0) report.nll_first = nll;
    report.nll_last = nll;
    report.token_count = tokens;
    grad /= static_cast<double>(tokens);  // mean log-likelihood ascent
    opt.ascend(params, grad);
  }
  return report;
}

RolloutGroup collect_group(const PolicyParams& params, const MultiObjectiveQuestion& question,
                           int query_index, const KnowledgeBase& kb, const Vocabulary& vocab,
                           const TrainConfig& cfg, std::uint64_t group_seed) {
  if (cfg.group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  RolloutGroup group;
  group.query_index = query_index;
  group.rollouts.resize(static_cast<std::size_t>(cfg.group_size));
  group.traj_rewards.resize(static_cast<std::size_t>(cfg.group_size));

  const std::vector<TokenId> gold = gold_answer_tokens(question, vocab);

  EpisodeConfig ep;
  ep.max_turns = cfg.max_turns;
  ep.context_mode = ContextMode::truncated();
  ep.top_k = cfg.top_k;
  ep.sample.temperature = cfg.temperature;
  ep.sample.max_new_tokens = cfg.max_new_tokens;
  ep.sample.greedy = false;

  const StepSampler sampler = make_policy_sampler(params, ep.sample, vocab);
  std::vector<std::vector<MemoryReward>> mem_slots(static_cast<std::size_t>(cfg.group_size));

  parallel_for(cfg.group_size, cfg.workers, [&](int i) {
    EpisodeResult episode =
        run_episode(sampler, question, kb, vocab, ep,
                    derive_seed(group_seed, {static_cast<std::uint64_t>(i)}));
    // Collection-time log-probs for the importance ratio.
    for (StepRecord& step : episode.steps)
      step.old_logp = log_prob(params, step.context, step.continuation);
    TrajectoryRollout rollout;
    rollout.trajectory = std::move(episode.trajectory);
    rollout.steps = std::move(episode.steps);
    group.traj_rewards[static_cast<std::size_t>(i)] =
        trajectory_reward(rollout.trajectory, question, vocab);
    for (const Step& step : rollout.trajectory.steps) {
      if (step.find(SegmentKind::Mem) == nullptr) continue;
      MemoryReward r = memory_reward(params, vocab, rollout.trajectory, step.index, gold);
      r.trajectory_index = i;
      mem_slots[static_cast<std::size_t>(i)].push_back(r);
    }
    group.rollouts[static_cast<std::size_t>(i)] = std::move(rollout);
  });

  for (auto& slot : mem_slots)
    group.mem_rewards.insert(group.mem_rewards.end(), slot.begin(), slot.end());
  return group;
}

SurrogateResult surrogate_objective(const PolicyParams& params, const PolicyParams& ref,
                                    const RolloutGroup& group,
                                    const std::vector<AdvantageMap>& advantages,
                                    const TrainConfig& cfg) {
  if (advantages.size() != group.rollouts.size())
    throw MisalignedAdvantages("advantage maps do not match group size");

  SurrogateResult result;
  result.grad = Eigen::VectorXd::Zero(params.theta().size());
  const double n_inv = 1.0 / static_cast<double>(group.rollouts.size());
  long long clipped = 0;

  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const TrajectoryRollout& rollout = group.rollouts[i];
    const AdvantageMap& adv = advantages[i];
    const long long len = rollout.policy_token_count();
    if (static_cast<long long>(adv.token_advantage.size()) != len)
      throw MisalignedAdvantages("token advantages misaligned for trajectory " +
                                 std::to_string(i));
    if (len == 0) continue;
    const double weight = n_inv / static_cast<double>(len);

    std::size_t offset = 0;
    for (const StepRecord& step : rollout.steps) {
      const std::size_t count = step.continuation.size();
      if (count == 0) continue;
      if (static_cast<std::size_t>(step.old_logp.size()) != count)
        throw MisalignedAdvantages("old log-probs missing for a collected step");

      const Eigen::VectorXd cur = log_prob(params, step.context, step.continuation);
      Eigen::VectorXd ref_lp;
      if (cfg.kl_beta != 0.0) ref_lp = log_prob(ref, step.context, step.continuation);

      std::vector<double> weights(count, 0.0);
      for (std::size_t k = 0; k < count; ++k) {
        const double a = adv.token_advantage[offset + k];
        const double gamma = std::exp(cur[static_cast<Eigen::Index>(k)] -
                                      step.old_logp[static_cast<Eigen::Index>(k)]);
        const double clamped = std::clamp(gamma, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        const double unclipped = gamma * a;
        const double clipped_term = clamped * a;
        result.clip_term += weight * std::min(unclipped, clipped_term);
        if (clipped_term < unclipped) ++clipped;
        // Gradient flows through the unclipped branch only when it attains the min.
        double w = unclipped <= clipped_term ? gamma * a : 0.0;
        if (cfg.kl_beta != 0.0) {
          const double r = ref_lp[static_cast<Eigen::Index>(k)] - cur[static_cast<Eigen::Index>(k)];
          const double er = std::exp(r);
          result.kl_value += weight * (er - r - 1.0);  // pointwise non-negative
          w -= cfg.kl_beta * (1.0 - er);
        }
        weights[k] = weight * w;
      }
      accumulate_weighted_grad(params, step.context, step.continuation, weights, result.grad);
      result.token_count += static_cast<long long>(count);
      offset += count;
    }
  }
  result.objective = result.clip_term - cfg.kl_beta * result.kl_value;
  result.clip_fraction =
      result.token_count > 0 ? static_cast<double>(clipped) / static_cast<double>(result.token_count)
                             : 0.0;
  return result;
}

std::vector<int> train_split(int question_count, double train_fraction) {
  const int cut = static_cast<int>(std::floor(train_fraction * question_count));
  std::vector<int> out;
  for (int i = 0; i < std::min(cut, question_count); ++i) out.push_back(i);
  return out;
}

std::vector<int> heldout_split(int question_count, double train_fraction) {
  const int cut = static_cast<int>(std::floor(train_fraction * question_count));
  std::vector<int> out;
  for (int i = std::min(cut, question_count); i < question_count; ++i) out.push_back(i);
  return out;
}

TrainResult train(PolicyParams params, const Dataset& dataset, const Vocabulary& vocab,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  const std::vector<int> train_queries =
      train_split(static_cast<int>(dataset.questions.size()), cfg.train_fraction);
  if (train_queries.empty()) throw std::invalid_argument("training split is empty");

  TrainResult result{snapshot(params), {}};
  PolicyParams& theta = result.params;
  const PolicyParams reference = snapshot(theta);  // fixed for the whole run
  Optimizer opt(cfg.optimizer, cfg.learning_rate);

  std::vector<int> order;
  std::uint64_t reshuffles = 0;
  std::size_t cursor = 0;
  auto next_query = [&]() {
    if (cursor >= order.size()) {
      order = train_queries;
      Rng rng(derive_seed(cfg.seed, {0x5u, reshuffles++}));
      shuffle(order, rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  for (int update = 1; update <= cfg.num_updates; ++update) {
    const PolicyParams theta_old = snapshot(theta);

    std::vector<int> batch(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) batch[static_cast<std::size_t>(b)] = next_query();

    std::vector<RolloutGroup> groups(batch.size());
    parallel_for(static_cast<int>(batch.size()), 1, [&](int b) {
      const int q = batch[static_cast<std::size_t>(b)];
      groups[static_cast<std::size_t>(b)] = collect_group(
          theta_old, dataset.questions[static_cast<std::size_t>(q)], q, dataset.kb, vocab, cfg,
          derive_seed(cfg.seed, {0x1u, static_cast<std::uint64_t>(update),
                                 static_cast<std::uint64_t>(b)}));
    });

    std::vector<std::vector<AdvantageMap>> advantage_maps(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
      advantage_maps[g] = compute_advantages(groups[g], cfg.group_mode, cfg.memory_credit);

    if (hooks.on_group)
      for (std::size_t g = 0; g < groups.size(); ++g)
        hooks.on_group(update, groups[g], advantage_maps[g]);

    UpdateReport report;
    report.update = update;
    {
      double reward_sum = 0.0;
      long long reward_count = 0;
      double mem_sum = 0.0;
      long long mem_count = 0;
      for (const auto& group : groups) {
        for (const auto& r : group.traj_rewards) {
          reward_sum += r.value;
          ++reward_count;
        }
        for (const auto& r : group.mem_rewards) {
          mem_sum += r.value;
          ++mem_count;
        }
      }
      report.mean_traj_reward = reward_count > 0 ? reward_sum / static_cast<double>(reward_count) : 0.0;
      report.mean_mem_reward = mem_count > 0 ? mem_sum / static_cast<double>(mem_count) : 0.0;
    }

    for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.theta().size());
      double clip_term = 0.0, kl_value = 0.0, clip_fraction = 0.0;
      std::vector<SurrogateResult> partial(groups.size());
      parallel_for(static_cast<int>(groups.size()), cfg.workers, [&](int g) {
        partial[static_cast<std::size_t>(g)] =
            surrogate_objective(theta, reference, groups[static_cast<std::size_t>(g)],
                                advantage_maps[static_cast<std::size_t>(g)], cfg);
      });
      for (const SurrogateResult& s : partial) {
        grad += s.grad;
        clip_term += s.clip_term;
        kl_value += s.kl_value;
        clip_fraction += s.clip_fraction;
      }
      const double scale = 1.0 / static_cast<double>(groups.size());
      grad *= scale;
      report.surrogate_value = clip_term * scale;
      report.kl_value = kl_value * scale;
      report.clip_fraction = clip_fraction * scale;
      report.grad_norm = grad.norm();

      if (!grad.allFinite() || !theta.finite()) {
        std::vector<std::string> batch_jsonl;
        for (const auto& group : groups)
          for (const auto& rollout : group.rollouts)
            batch_jsonl.push_back(trajectory_to_json(rollout.trajectory, vocab));
        throw NonFiniteGradient(update, std::move(batch_jsonl));
      }
      opt.ascend(theta, grad);
      if (!theta.finite()) {
        std::vector<std::string> batch_jsonl;
        for (const auto& group : groups)
          for (const auto& rollout : group.rollouts)
            batch_jsonl.push_back(trajectory_to_json(rollout.trajectory, vocab));
        throw NonFiniteGradient(update, std::move(batch_jsonl));
      }
    }

    result.reports.push_back(report);
    if (hooks.on_update) hooks.on_update(report);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 &&
        (update % cfg.checkpoint_every == 0 || update == cfg.num_updates))
      hooks.on_checkpoint(update, theta);
  }
  return result;
}

}  // namespace mempo
