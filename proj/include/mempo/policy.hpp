#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mempo/vocab.hpp"

namespace mempo {

// Architecture hyperparameters of the autoregressive token policy: the next
// token is predicted from the mean embedding of the last `window` context
// tokens through one tanh hidden layer and a linear vocabulary projection.
struct PolicyDims {
  int vocab = 0;
  int dim = 32;
  int window = 16;

  bool operator==(const PolicyDims&) const = default;
};

// All parameters live in one flat vector; the embedding table, hidden affine
// map, and output projection are Eigen maps into it. That makes snapshots,
// ascent updates, and finite-difference probes one-liners.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(PolicyDims dims, std::string vocab_hash);

  static PolicyParams zeros(PolicyDims dims, std::string vocab_hash);
  static PolicyParams random_init(PolicyDims dims, std::string vocab_hash, double scale,
                                  std::uint64_t seed);

  const PolicyDims& dims() const { return dims_; }
  const std::string& vocab_hash() const { return vocab_hash_; }
  Eigen::Index param_count() const { return theta_.size(); }

  Eigen::VectorXd& theta() { return theta_; }
  const Eigen::VectorXd& theta() const { return theta_; }

  // vocab x dim embedding table.
  Eigen::Map<const Eigen::MatrixXd> embedding() const;
  Eigen::Map<Eigen::MatrixXd> embedding();
  // dim x dim hidden weights.
  Eigen::Map<const Eigen::MatrixXd> hidden_w() const;
  Eigen::Map<Eigen::MatrixXd> hidden_w();
  // dim hidden bias.
  Eigen::Map<const Eigen::VectorXd> hidden_b() const;
  Eigen::Map<Eigen::VectorXd> hidden_b();
  // dim x vocab output projection.
  Eigen::Map<const Eigen::MatrixXd> output() const;
  Eigen::Map<Eigen::MatrixXd> output();

  bool finite() const { return theta_.allFinite(); }

 private:
  PolicyDims dims_;
  std::string vocab_hash_;
  Eigen::VectorXd theta_;
};

// Deep immutable copy serving as pi_ref / pi_theta_old.
inline PolicyParams snapshot(const PolicyParams& params) { return params; }

struct SampleConfig {
  double temperature = 1.0;
  int max_new_tokens = 64;
  std::uint64_t seed = 0;
  std::vector<TokenId> stop_tokens;
  bool greedy = false;  // argmax decoding, ties to the lowest token id
};

// Next-token logits given the context (pre-softmax, temperature-free).
Eigen::VectorXd next_token_logits(const PolicyParams& params, std::span<const TokenId> context);

// Per-token conditional log-probabilities of the continuation under teacher
// forcing. Every entry is <= 0 and each exp sums to one over the vocabulary.
Eigen::VectorXd log_prob(const PolicyParams& params, std::span<const TokenId> context,
                         std::span<const TokenId> continuation);

// Ancestral sampling, deterministic under (params, context, cfg.seed); stops
// after emitting a stop token or at max_new_tokens.
std::vector<TokenId> sample(const PolicyParams& params, std::span<const TokenId> context,
                            const SampleConfig& cfg);

// Accumulates sum_l weight_l * d/d theta log pi(continuation_l | ...) into
// grad (flat, same layout as theta). Returns the per-token log-probs so
// callers can reuse the forward pass.
Eigen::VectorXd accumulate_weighted_grad(const PolicyParams& params,
                                         std::span<const TokenId> context,
                                         std::span<const TokenId> continuation,
                                         std::span<const double> weights, Eigen::VectorXd& grad);

// d/d theta of sum_l log pi(continuation_l | ...).
Eigen::VectorXd grad_log_prob(const PolicyParams& params, std::span<const TokenId> context,
                              std::span<const TokenId> continuation);

// Versioned JSON checkpoint carrying dims, the vocabulary hash, and the flat
// parameter vector. Loading refuses a mismatched vocabulary hash.
std::string checkpoint_to_json(const PolicyParams& params);
PolicyParams checkpoint_from_json(const std::string& text);
void save_checkpoint(const PolicyParams& params, const std::string& path);
PolicyParams load_checkpoint(const std::string& path, const std::string& expected_vocab_hash);

}  // namespace mempo
