#include "mempo/episode.hpp"

#include "mempo/rng.hpp"

namespace mempo {

StepSampler make_policy_sampler(const PolicyParams& params, SampleConfig base,
                                const Vocabulary& vocab) {
  base.stop_tokens = {vocab.close_tag(SegmentKind::ToolCall),
                      vocab.close_tag(SegmentKind::Answer)};
  return [&params, base](std::span<const TokenId> context, int /*step_index*/,
                         std::uint64_t step_seed, const Trajectory& /*so_far*/) {
    SampleConfig cfg = base;
    cfg.seed = step_seed;
    return sample(params, context, cfg);
  };
}

StepSampler make_script_sampler(const ExpertScript& script, const Vocabulary& vocab) {
  return [script, &vocab](std::span<const TokenId> /*context*/, int step_index,
                          std::uint64_t /*seed*/, const Trajectory& /*so_far*/) {
    if (step_index < 1 || step_index > static_cast<int>(script.step_texts.size()))
      return std::vector<TokenId>{};
    return vocab.encode(script.step_texts[static_cast<std::size_t>(step_index - 1)]);
  };
}

namespace {

// Per-token segment labels for the sampled stream, reconstructed from the
// parsed step. The stream is exactly the concatenation of tagged segments.
void label_tokens(const Step& step, StepRecord& record) {
  record.token_kind.clear();
  record.token_is_tag.clear();
  for (const Segment& seg : step.segments) {
    if (seg.source != SegmentSource::PolicyGenerated) continue;
    record.token_kind.push_back(seg.kind);
    record.token_is_tag.push_back(true);
    for (std::size_t i = 0; i < seg.tokens.size(); ++i) {
      record.token_kind.push_back(seg.kind);
      record.token_is_tag.push_back(false);
    }
    record.token_kind.push_back(seg.kind);
    record.token_is_tag.push_back(true);
  }
}

}  // namespace

EpisodeResult run_episode(const StepSampler& sampler, const MultiObjectiveQuestion& question,
                          const KnowledgeBase& kb, const Vocabulary& vocab,
                          const EpisodeConfig& cfg, std::uint64_t episode_seed) {
  if (cfg.max_turns < 1) throw std::invalid_argument("max_turns must be >= 1");
  if (cfg.top_k < 1) throw std::invalid_argument("top_k must be >= 1");

  EpisodeResult result;
  Trajectory& traj = result.trajectory;
  traj.query = vocab.encode(question.query);
  traj.terminated = Termination::TurnLimit;

  for (int t = 1; t <= cfg.max_turns; ++t) {
    StepRecord record;
    record.step_index = t;
    record.context = build_context(traj.query, traj.steps, t, cfg.context_mode, vocab);
    record.continuation =
        sampler(record.context, t, derive_seed(episode_seed, {static_cast<std::uint64_t>(t)}),
                traj);

    const ParseResult parsed = parse_step(vocab.render(record.continuation), vocab);
    if (!parsed.ok()) {
      record.parse_failed = true;
      record.token_kind.assign(record.continuation.size(), SegmentKind::Think);
      record.token_is_tag.assign(record.continuation.size(), false);
      result.steps.push_back(std::move(record));
      traj.terminated = Termination::FormatFailure;
      return result;
    }

    Step step = *parsed.step;
    step.index = t;
    // A policy stream claiming environment output is a format failure even
    // though the grammar itself admits information segments (round-trips of
    // fully assembled steps need them).
    if (step.find(SegmentKind::Information) != nullptr) {
      record.parse_failed = true;
      record.token_kind.assign(record.continuation.size(), SegmentKind::Think);
      record.token_is_tag.assign(record.continuation.size(), false);
      result.steps.push_back(std::move(record));
      traj.terminated = Termination::FormatFailure;
      return result;
    }
    label_tokens(step, record);
    if (record.token_kind.size() != record.continuation.size())
      throw std::logic_error("segment labels misaligned with sampled stream");
    result.steps.push_back(std::move(record));

    if (const Segment* call = step.find(SegmentKind::ToolCall)) {
      const ToolResult tool = search(kb, vocab.render(call->tokens), cfg.top_k);
      std::string info_text;
      for (std::size_t d = 0; d < tool.documents.size(); ++d) {
        if (d > 0) info_text.push_back(' ');
        info_text += tool.documents[d];
      }
      Segment info;
      info.kind = SegmentKind::Information;
      info.source = SegmentSource::EnvironmentReturned;
      info.tokens = vocab.encode(info_text);
      step.segments.push_back(std::move(info));
      traj.steps.push_back(std::move(step));
      continue;
    }

    const Segment* answer = step.find(SegmentKind::Answer);
    traj.steps.push_back(std::move(step));
    if (answer != nullptr) {
      traj.predicted_answer = traj.steps.back().find(SegmentKind::Answer)->tokens;
      traj.terminated = Termination::Answered;
      return result;
    }
  }
  return result;
}

std::optional<EpisodeResult> make_demonstration(const MultiObjectiveQuestion& question,
                                                const KnowledgeBase& kb, const Vocabulary& vocab,
                                                const EpisodeConfig& cfg) {
  const ExpertScript script = make_expert_script(question, kb, cfg.top_k);
  if (!script.solved) return std::nullopt;
  EpisodeConfig demo_cfg = cfg;
  demo_cfg.max_turns = std::max(cfg.max_turns, static_cast<int>(script.step_texts.size()));
  EpisodeResult result = run_episode(make_script_sampler(script, vocab), question, kb, vocab,
                                     demo_cfg, /*episode_seed=*/0);
  if (result.trajectory.terminated != Termination::Answered) return std::nullopt;
  return result;
}

}  // namespace mempo
