#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mempo/advantages.hpp"
#include "mempo/episode.hpp"

namespace mempo {

enum class OptimizerKind : std::uint8_t { Sgd, Adam };

struct TrainConfig {
  // optimization
  int group_size = 8;  // N rollouts per query
  int batch_size = 16; // queries per update
  double learning_rate = 0.05;
  double clip_epsilon = 0.2;
  double kl_beta = 1e-3;
  int max_turns = 8;
  int epochs_per_batch = 1;
  std::uint64_t seed = 0;
  GroupMode group_mode = GroupMode::Pooled;
  int num_updates = 200;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  bool memory_credit = true;  // false reproduces the trajectory-only control

  // rollout sampling
  double temperature = 1.0;
  int max_new_tokens = 48;
  int top_k = 3;

  // model
  int model_dim = 48;
  int model_window = 24;

  // behavior cloning
  int bc_epochs = 60;
  double bc_learning_rate = 0.05;
  OptimizerKind bc_optimizer = OptimizerKind::Adam;
  int bc_max_demos = 200;

  // bookkeeping
  double train_fraction = 0.75;
  int checkpoint_every = 100;
  int workers = 1;
};

struct UpdateReport {
  int update = 0;
  double surrogate_value = 0.0;  // clipped term of the objective
  double kl_value = 0.0;         // per-token estimate vs the reference policy
  double clip_fraction = 0.0;    // share of tokens on the clipped branch
  double grad_norm = 0.0;
  double mean_traj_reward = 0.0;
  double mean_mem_reward = 0.0;
};

struct EmptyDemoSet : std::runtime_error {
  explicit EmptyDemoSet(const std::string& what) : std::runtime_error(what) {}
};

struct MisalignedAdvantages : std::runtime_error {
  explicit MisalignedAdvantages(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteGradient : std::runtime_error {
  NonFiniteGradient(int update_index, std::vector<std::string> batch_jsonl)
      : std::runtime_error("non-finite gradient at update " + std::to_string(update_index)),
        update(update_index),
        batch(std::move(batch_jsonl)) {}
  int update;
  std::vector<std::string> batch;  // offending batch, one trajectory per line
};

// First-order optimizer state shared by behavior cloning and policy updates.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);
  // Gradient-ascent step: params += direction(grad).
  void ascend(PolicyParams& params, const Eigen::VectorXd& grad);

 private:
  OptimizerKind kind_;
  double lr_;
  long long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct BCReport {
  int epochs = 0;
  long long token_count = 0;
  double nll_first = 0.0;
  double nll_last = 0.0;
};

// Maximizes the log-likelihood of all policy-generated tokens in the
// demonstrations given their truncated-mode contexts. Environment tokens
// never enter the loss.
BCReport behavior_clone(PolicyParams& params, const std::vector<Trajectory>& demos,
                        const Vocabulary& vocab, int epochs, double learning_rate,
                        OptimizerKind optimizer);

// Mean demonstration NLL per token under the current parameters.
double demo_nll(const PolicyParams& params, const std::vector<Trajectory>& demos,
                const Vocabulary& vocab);

// N rollouts for one query under the given (old) policy, with rewards and
// collection-time log-probs attached.
RolloutGroup collect_group(const PolicyParams& params, const MultiObjectiveQuestion& question,
                           int query_index, const KnowledgeBase& kb, const Vocabulary& vocab,
                           const TrainConfig& cfg, std::uint64_t group_seed);

struct SurrogateResult {
  double clip_term = 0.0;      // (1/N) sum_i (1/|tau_i|) sum_k min(gamma A, clip(gamma) A)
  double kl_value = 0.0;       // same weighting, vs the reference policy
  double objective = 0.0;      // clip_term - beta * kl_value
  double clip_fraction = 0.0;  // strictly-clipped token share
  long long token_count = 0;
  Eigen::VectorXd grad;        // d objective / d theta
};

// Clipped importance-weighted objective with KL regularization against the
// reference policy, over policy-generated tokens only.
SurrogateResult surrogate_objective(const PolicyParams& params, const PolicyParams& ref,
                                    const RolloutGroup& group,
                                    const std::vector<AdvantageMap>& advantages,
                                    const TrainConfig& cfg);

struct TrainHooks {
  std::function<void(const UpdateReport&)> on_update;
  std::function<void(int update, const RolloutGroup&, const std::vector<AdvantageMap>&)> on_group;
  std::function<void(int update, const PolicyParams&)> on_checkpoint;
};

struct TrainResult {
  PolicyParams params;
  std::vector<UpdateReport> reports;
};

// The optimization loop: per update, snapshot the old policy, collect a batch
// of rollout groups, compute dual-level advantages, and take ascent steps on
// the clipped KL-regularized objective. Deterministic under cfg.seed.
TrainResult train(PolicyParams params, const Dataset& dataset, const Vocabulary& vocab,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

// Question indices of the train / held-out split at the given fraction.
std::vector<int> train_split(int question_count, double train_fraction);
std::vector<int> heldout_split(int question_count, double train_fraction);

}  // namespace mempo
