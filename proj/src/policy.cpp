#include "mempo/policy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mempo/rng.hpp"

namespace mempo {

namespace {

using nlohmann::json;

Eigen::Index embedding_size(const PolicyDims& d) {
  return static_cast<Eigen::Index>(d.vocab) * d.dim;
}
// The context summary stacks two fixed pooling profiles over the last
// `window` embeddings: a uniform mean (what is in scope) and a recency-decayed
// mean (what was just said). The hidden affine map consumes both.
Eigen::Index summary_size(const PolicyDims& d) { return 2 * static_cast<Eigen::Index>(d.dim); }
Eigen::Index hidden_w_size(const PolicyDims& d) {
  return static_cast<Eigen::Index>(d.dim) * summary_size(d);
}

constexpr double kRecencyDecay = 0.7;

// theta layout: [embedding | hidden_w | hidden_b | output]
Eigen::Index theta_size(const PolicyDims& d) {
  return embedding_size(d) + hidden_w_size(d) + d.dim + static_cast<Eigen::Index>(d.dim) * d.vocab;
}

// Pooling weights over the last w tokens, index 0 = most recent; each profile
// sums to one.
void pooling_weights(int w, std::vector<double>& uniform, std::vector<double>& recency) {
  uniform.assign(static_cast<std::size_t>(w), 1.0 / w);
  recency.resize(static_cast<std::size_t>(w));
  double total = 0.0;
  double coef = 1.0;
  for (int j = 0; j < w; ++j) {
    recency[static_cast<std::size_t>(j)] = coef;
    total += coef;
    coef *= kRecencyDecay;
  }
  for (double& r : recency) r /= total;
}

void check_tokens(const PolicyDims& dims, std::span<const TokenId> tokens) {
  for (TokenId t : tokens)
    if (t < 0 || t >= dims.vocab)
      throw OutOfVocabulary("token id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(dims.vocab));
}

// Stacked [uniform mean; recency-decayed mean] of the last `window` context
// token embeddings.
Eigen::VectorXd context_summary(const PolicyParams& params, std::span<const TokenId> context) {
  const auto& dims = params.dims();
  const int w = std::min<int>(dims.window, static_cast<int>(context.size()));
  std::vector<double> uniform, recency;
  pooling_weights(w, uniform, recency);
  Eigen::VectorXd summary = Eigen::VectorXd::Zero(summary_size(dims));
  const auto emb = params.embedding();
  for (int j = 0; j < w; ++j) {
    const auto row = emb.row(context[context.size() - 1 - static_cast<std::size_t>(j)]);
    summary.head(dims.dim) += uniform[static_cast<std::size_t>(j)] * row.transpose();
    summary.tail(dims.dim) += recency[static_cast<std::size_t>(j)] * row.transpose();
  }
  return summary;
}

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

PolicyParams::PolicyParams(PolicyDims dims, std::string vocab_hash)
    : dims_(dims), vocab_hash_(std::move(vocab_hash)) {
  if (dims_.vocab < 1 || dims_.dim < 1 || dims_.window < 1)
    throw std::invalid_argument("policy dims must be positive");
  theta_ = Eigen::VectorXd::Zero(theta_size(dims_));
}

PolicyParams PolicyParams::zeros(PolicyDims dims, std::string vocab_hash) {
  return PolicyParams(dims, std::move(vocab_hash));
}

PolicyParams PolicyParams::random_init(PolicyDims dims, std::string vocab_hash, double scale,
                                       std::uint64_t seed) {
  PolicyParams p(dims, std::move(vocab_hash));
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.theta_.size(); ++i) p.theta_[i] = scale * normal01(rng);
  return p;
}

Eigen::Map<const Eigen::MatrixXd> PolicyParams::embedding() const {
  return {theta_.data(), dims_.vocab, dims_.dim};
}
Eigen::Map<Eigen::MatrixXd> PolicyParams::embedding() {
  return {theta_.data(), dims_.vocab, dims_.dim};
}
Eigen::Map<const Eigen::MatrixXd> PolicyParams::hidden_w() const {
  return {theta_.data() + embedding_size(dims_), dims_.dim, summary_size(dims_)};
}
Eigen::Map<Eigen::MatrixXd> PolicyParams::hidden_w() {
  return {theta_.data() + embedding_size(dims_), dims_.dim, summary_size(dims_)};
}
Eigen::Map<const Eigen::VectorXd> PolicyParams::hidden_b() const {
  return {theta_.data() + embedding_size(dims_) + hidden_w_size(dims_), dims_.dim};
}
Eigen::Map<Eigen::VectorXd> PolicyParams::hidden_b() {
  return {theta_.data() + embedding_size(dims_) + hidden_w_size(dims_), dims_.dim};
}
Eigen::Map<const Eigen::MatrixXd> PolicyParams::output() const {
  return {theta_.data() + embedding_size(dims_) + hidden_w_size(dims_) + dims_.dim, dims_.dim,
          dims_.vocab};
}
Eigen::Map<Eigen::MatrixXd> PolicyParams::output() {
  return {theta_.data() + embedding_size(dims_) + hidden_w_size(dims_) + dims_.dim, dims_.dim,
          dims_.vocab};
}

Eigen::VectorXd next_token_logits(const PolicyParams& params, std::span<const TokenId> context) {
  if (context.empty()) throw std::invalid_argument("context must be non-empty");
  check_tokens(params.dims(), context);
  const Eigen::VectorXd cbar = context_summary(params, context);
  const Eigen::VectorXd h = (params.hidden_w() * cbar + params.hidden_b()).array().tanh();
  return params.output().transpose() * h;
}

Eigen::VectorXd log_prob(const PolicyParams& params, std::span<const TokenId> context,
                         std::span<const TokenId> continuation) {
  if (continuation.empty()) throw std::invalid_argument("continuation must be non-empty");
  check_tokens(params.dims(), continuation);
  std::vector<TokenId> ctx(context.begin(), context.end());
  Eigen::VectorXd out(static_cast<Eigen::Index>(continuation.size()));
  for (std::size_t l = 0; l < continuation.size(); ++l) {
    const Eigen::VectorXd z = next_token_logits(params, ctx);
    out[static_cast<Eigen::Index>(l)] = z[continuation[l]] - log_sum_exp(z);
    ctx.push_back(continuation[l]);
  }
  return out;
}

std::vector<TokenId> sample(const PolicyParams& params, std::span<const TokenId> context,
                            const SampleConfig& cfg) {
  if (cfg.temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (cfg.max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
  std::vector<TokenId> ctx(context.begin(), context.end());
  std::vector<TokenId> out;
  Rng rng(cfg.seed);
  for (int step = 0; step < cfg.max_new_tokens; ++step) {
    const Eigen::VectorXd z = next_token_logits(params, ctx);
    TokenId tok = 0;
    if (cfg.greedy) {
      Eigen::Index arg = 0;
      z.maxCoeff(&arg);  // first maximum: ties break to the lowest id
      tok = static_cast<TokenId>(arg);
    } else {
      Eigen::VectorXd scaled = z / cfg.temperature;
      const Eigen::ArrayXd p = (scaled.array() - log_sum_exp(scaled)).exp();
      const double u = uniform01(rng) * p.sum();
      double acc = 0.0;
      Eigen::Index chosen = p.size() - 1;
      for (Eigen::Index v = 0; v < p.size(); ++v) {
        acc += p[v];
        if (u < acc) {
          chosen = v;
          break;
        }
      }
      tok = static_cast<TokenId>(chosen);
    }
    out.push_back(tok);
    ctx.push_back(tok);
    for (TokenId s : cfg.stop_tokens)
      if (s == tok) return out;
  }
  return out;
}

Eigen::VectorXd accumulate_weighted_grad(const PolicyParams& params,
                                         std::span<const TokenId> context,
                                         std::span<const TokenId> continuation,
                                         std::span<const double> weights, Eigen::VectorXd& grad) {
  if (continuation.empty()) throw std::invalid_argument("continuation must be non-empty");
  if (context.empty()) throw std::invalid_argument("context must be non-empty");
  if (weights.size() != continuation.size())
    throw std::invalid_argument("weights must align with continuation");
  check_tokens(params.dims(), context);
  check_tokens(params.dims(), continuation);
  if (grad.size() != params.theta().size()) grad = Eigen::VectorXd::Zero(params.theta().size());

  const auto& dims = params.dims();
  Eigen::Map<Eigen::MatrixXd> demb(grad.data(), dims.vocab, dims.dim);
  Eigen::Map<Eigen::MatrixXd> dhw(grad.data() + embedding_size(dims), dims.dim,
                                  summary_size(dims));
  Eigen::Map<Eigen::VectorXd> dhb(grad.data() + embedding_size(dims) + hidden_w_size(dims),
                                  dims.dim);
  Eigen::Map<Eigen::MatrixXd> dout(
      grad.data() + embedding_size(dims) + hidden_w_size(dims) + dims.dim, dims.dim, dims.vocab);

  std::vector<TokenId> ctx(context.begin(), context.end());
  Eigen::VectorXd logps(static_cast<Eigen::Index>(continuation.size()));

  for (std::size_t l = 0; l < continuation.size(); ++l) {
    const Eigen::VectorXd cbar = context_summary(params, ctx);
    const Eigen::VectorXd pre = params.hidden_w() * cbar + params.hidden_b();
    const Eigen::VectorXd h = pre.array().tanh();
    const Eigen::VectorXd z = params.output().transpose() * h;
    const double lse = log_sum_exp(z);
    const TokenId y = continuation[l];
    logps[static_cast<Eigen::Index>(l)] = z[y] - lse;

    const double wgt = weights[l];
    if (wgt != 0.0) {
      Eigen::VectorXd g = -((z.array() - lse).exp());  // -softmax
      g[y] += 1.0;
      g *= wgt;

      dout.noalias() += h * g.transpose();
      const Eigen::VectorXd dh = params.output() * g;
      const Eigen::VectorXd da = dh.array() * (1.0 - h.array().square());
      dhw.noalias() += da * cbar.transpose();
      dhb += da;
      const Eigen::VectorXd dc = params.hidden_w().transpose() * da;
      const int w = std::min<int>(dims.window, static_cast<int>(ctx.size()));
      std::vector<double> uniform, recency;
      pooling_weights(w, uniform, recency);
      for (int j = 0; j < w; ++j) {
        const std::size_t ju = static_cast<std::size_t>(j);
        demb.row(ctx[ctx.size() - 1 - ju]) +=
            uniform[ju] * dc.head(dims.dim).transpose() +
            recency[ju] * dc.tail(dims.dim).transpose();
      }
    }
    ctx.push_back(y);
  }
  return logps;
}

Eigen::VectorXd grad_log_prob(const PolicyParams& params, std::span<const TokenId> context,
                              std::span<const TokenId> continuation) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.theta().size());
  std::vector<double> ones(continuation.size(), 1.0);
  accumulate_weighted_grad(params, context, continuation, ones, grad);
  return grad;
}

std::string checkpoint_to_json(const PolicyParams& params) {
  json j;
  j["format"] = "mempo-checkpoint";
  j["version"] = 1;
  j["vocab_hash"] = params.vocab_hash();
  j["dims"] = {{"vocab", params.dims().vocab},
               {"dim", params.dims().dim},
               {"window", params.dims().window}};
  std::vector<double> theta(params.theta().data(), params.theta().data() + params.theta().size());
  j["theta"] = theta;
  return j.dump();
}

PolicyParams checkpoint_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format").get<std::string>() != "mempo-checkpoint")
    throw std::runtime_error("not a policy checkpoint");
  if (j.at("version").get<int>() != 1)
    throw std::runtime_error("unsupported checkpoint version");
  PolicyDims dims;
  dims.vocab = j.at("dims").at("vocab").get<int>();
  dims.dim = j.at("dims").at("dim").get<int>();
  dims.window = j.at("dims").at("window").get<int>();
  PolicyParams params(dims, j.at("vocab_hash").get<std::string>());
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(theta.size()) != params.theta().size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (Eigen::Index i = 0; i < params.theta().size(); ++i)
    params.theta()[i] = theta[static_cast<std::size_t>(i)];
  return params;
}

void save_checkpoint(const PolicyParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(params) << "\n";
}

PolicyParams load_checkpoint(const std::string& path, const std::string& expected_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  PolicyParams params = checkpoint_from_json(ss.str());
  if (!expected_vocab_hash.empty() && params.vocab_hash() != expected_vocab_hash)
    throw std::runtime_error("checkpoint vocabulary hash " + params.vocab_hash() +
                             " does not match dataset vocabulary hash " + expected_vocab_hash);
  return params;
}

}  // namespace mempo
