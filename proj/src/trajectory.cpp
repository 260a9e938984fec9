#include "mempo/trajectory.hpp"

#include <algorithm>
#include <array>

#include "json.hpp"

namespace mempo {

namespace {

using nlohmann::json;

constexpr std::array<const char*, kSegmentKindCount> kKindNames = {"mem", "think", "tool_call",
                                                                   "information", "answer"};

std::optional<SegmentKind> kind_from_name(std::string_view name) {
  for (int k = 0; k < kSegmentKindCount; ++k)
    if (name == kKindNames[static_cast<std::size_t>(k)]) return static_cast<SegmentKind>(k);
  return std::nullopt;
}

std::optional<SegmentKind> open_tag_kind(std::string_view surface) {
  for (int k = 0; k < kSegmentKindCount; ++k)
    if (surface == open_tag_surface(static_cast<SegmentKind>(k))) return static_cast<SegmentKind>(k);
  return std::nullopt;
}

std::optional<SegmentKind> close_tag_kind(std::string_view surface) {
  for (int k = 0; k < kSegmentKindCount; ++k)
    if (surface == close_tag_surface(static_cast<SegmentKind>(k)))
      return static_cast<SegmentKind>(k);
  return std::nullopt;
}

bool looks_like_tag(std::string_view s) { return !s.empty() && s.front() == '<'; }

// Shared step grammar: Mem?, Think, (ToolCall, Information?) | Answer.
// Duplicate kinds are reported as DuplicateSegment, everything else that
// breaks the phase machine as IllegalOrder.
void validate_segment_order(const std::vector<Segment>& segments,
                            const std::vector<std::size_t>& offsets, int step,
                            std::vector<Violation>& out) {
  std::array<bool, kSegmentKindCount> seen = {};
  int phase = 0;  // 0: Mem|Think, 2: action, 3: after ToolCall, 4: terminal
  std::size_t think_slot_offset = 0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const SegmentKind kind = segments[i].kind;
    const std::size_t off = i < offsets.size() ? offsets[i] : 0;
    if (seen[static_cast<int>(kind)]) {
      out.push_back({ViolationKind::DuplicateSegment, off, step,
                     std::string("duplicate segment: ") + kKindNames[static_cast<int>(kind)]});
      continue;
    }
    seen[static_cast<int>(kind)] = true;
    switch (phase) {
      case 0:
        if (kind == SegmentKind::Mem) {
          phase = 1;
        } else if (kind == SegmentKind::Think) {
          phase = 2;
        } else {
          out.push_back({ViolationKind::IllegalOrder, off, step,
                         std::string(kKindNames[static_cast<int>(kind)]) + " before think"});
          phase = 4;
        }
        break;
      case 1:
        if (kind == SegmentKind::Think) {
          phase = 2;
        } else {
          out.push_back({ViolationKind::IllegalOrder, off, step,
                         std::string(kKindNames[static_cast<int>(kind)]) + " where think expected"});
          phase = 4;
        }
        break;
      case 2:
        if (kind == SegmentKind::ToolCall) {
          phase = 3;
        } else if (kind == SegmentKind::Answer) {
          phase = 4;
        } else {
          out.push_back({ViolationKind::IllegalOrder, off, step,
                         std::string(kKindNames[static_cast<int>(kind)]) + " where action expected"});
          phase = 4;
        }
        break;
      case 3:
        if (kind == SegmentKind::Information) {
          phase = 4;
        } else {
          out.push_back({ViolationKind::IllegalOrder, off, step,
                         std::string(kKindNames[static_cast<int>(kind)]) + " after tool_call"});
          phase = 4;
        }
        break;
      default:
        out.push_back({ViolationKind::IllegalOrder, off, step,
                       std::string(kKindNames[static_cast<int>(kind)]) + " after step ended"});
        break;
    }
    think_slot_offset = off;
  }
  if (!seen[static_cast<int>(SegmentKind::Think)])
    out.push_back({ViolationKind::MissingThink, think_slot_offset, step, "step has no think segment"});
  if (!seen[static_cast<int>(SegmentKind::ToolCall)] && !seen[static_cast<int>(SegmentKind::Answer)])
    out.push_back({ViolationKind::MissingAction, think_slot_offset, step,
                   "step has neither tool_call nor answer"});
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const bool env = segments[i].kind == SegmentKind::Information;
    const bool is_env = segments[i].source == SegmentSource::EnvironmentReturned;
    if (env != is_env)
      out.push_back({ViolationKind::IllegalOrder, i < offsets.size() ? offsets[i] : 0, step,
                     "segment source inconsistent with kind"});
  }
}

}  // namespace

const Segment* Step::find(SegmentKind kind) const {
  for (const auto& seg : segments)
    if (seg.kind == kind) return &seg;
  return nullptr;
}

const char* violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::UnclosedTag: return "UnclosedTag";
    case ViolationKind::IllegalOrder: return "IllegalOrder";
    case ViolationKind::DuplicateSegment: return "DuplicateSegment";
    case ViolationKind::UnknownTag: return "UnknownTag";
    case ViolationKind::NestedTag: return "NestedTag";
    case ViolationKind::StrayText: return "StrayText";
    case ViolationKind::UnknownToken: return "UnknownToken";
    case ViolationKind::MissingThink: return "MissingThink";
    case ViolationKind::MissingAction: return "MissingAction";
    case ViolationKind::EmptyMemory: return "EmptyMemory";
    case ViolationKind::MissingAnswer: return "MissingAnswer";
    case ViolationKind::AnswerNotFinal: return "AnswerNotFinal";
    case ViolationKind::BadStepIndex: return "BadStepIndex";
    case ViolationKind::InconsistentTermination: return "InconsistentTermination";
  }
  return "Unknown";
}

ParseResult parse_step(std::string_view text, const Vocabulary& vocab) {
  ParseResult result;
  std::vector<Segment> segments;
  std::vector<std::size_t> seg_offsets;

  bool inside = false;
  SegmentKind current_kind = SegmentKind::Think;
  std::size_t current_open_offset = 0;
  std::vector<TokenId> current_tokens;

  for (const Lexeme& lex : split_lexemes(text)) {
    const auto open_kind = open_tag_kind(lex.text);
    const auto close_kind = close_tag_kind(lex.text);
    if (!inside) {
      if (open_kind) {
        inside = true;
        current_kind = *open_kind;
        current_open_offset = lex.offset;
        current_tokens.clear();
      } else if (close_kind) {
        result.violations.push_back({ViolationKind::UnclosedTag, lex.offset, 0,
                                     "close tag without matching open: " + lex.text});
      } else if (looks_like_tag(lex.text)) {
        result.violations.push_back(
            {ViolationKind::UnknownTag, lex.offset, 0, "unknown tag: " + lex.text});
      } else {
        result.violations.push_back(
            {ViolationKind::StrayText, lex.offset, 0, "text outside any segment: " + lex.text});
      }
      continue;
    }
    // Inside a segment: only content words and the matching close tag are legal.
    if (close_kind && *close_kind == current_kind) {
      Segment seg;
      seg.kind = current_kind;
      seg.tokens = std::move(current_tokens);
      seg.source = current_kind == SegmentKind::Information ? SegmentSource::EnvironmentReturned
                                                            : SegmentSource::PolicyGenerated;
      segments.push_back(std::move(seg));
      seg_offsets.push_back(current_open_offset);
      current_tokens.clear();
      inside = false;
      continue;
    }
    if (open_kind) {
      result.violations.push_back({ViolationKind::NestedTag, lex.offset, 0,
                                   "tag opened inside " +
                                       std::string(open_tag_surface(current_kind)) + ": " +
                                       lex.text});
      continue;
    }
    if (close_kind) {
      result.violations.push_back({ViolationKind::UnclosedTag, current_open_offset, 0,
                                   std::string(open_tag_surface(current_kind)) +
                                       " closed by mismatched " + lex.text});
      inside = false;
      current_tokens.clear();
      continue;
    }
    if (looks_like_tag(lex.text)) {
      result.violations.push_back(
          {ViolationKind::UnknownTag, lex.offset, 0, "unknown tag: " + lex.text});
      continue;
    }
    if (!vocab.contains(lex.text)) {
      result.violations.push_back(
          {ViolationKind::UnknownToken, lex.offset, 0, "out-of-vocabulary word: " + lex.text});
      continue;
    }
    current_tokens.push_back(vocab.id(lex.text));
  }
  if (inside)
    result.violations.push_back({ViolationKind::UnclosedTag, current_open_offset, 0,
                                 std::string(open_tag_surface(current_kind)) + " never closed"});

  validate_segment_order(segments, seg_offsets, 0, result.violations);
  if (result.violations.empty()) {
    Step step;
    step.index = 1;
    step.segments = std::move(segments);
    result.step = std::move(step);
  }
  return result;
}

std::string render_step(const Step& step, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < step.segments.size(); ++i) {
    const Segment& seg = step.segments[i];
    if (i > 0) out.push_back('\n');
    out += open_tag_surface(seg.kind);
    out += vocab.render(seg.tokens);
    out += close_tag_surface(seg.kind);
  }
  return out;
}

std::vector<TokenId> segment_tokens(const Segment& seg, const Vocabulary& vocab) {
  std::vector<TokenId> out;
  out.reserve(seg.tokens.size() + 2);
  out.push_back(vocab.open_tag(seg.kind));
  out.insert(out.end(), seg.tokens.begin(), seg.tokens.end());
  out.push_back(vocab.close_tag(seg.kind));
  return out;
}

std::vector<TokenId> step_tokens(const Step& step, const Vocabulary& vocab) {
  std::vector<TokenId> out;
  for (const Segment& seg : step.segments) {
    auto toks = segment_tokens(seg, vocab);
    out.insert(out.end(), toks.begin(), toks.end());
  }
  return out;
}

FormatVerdict check_format(const Trajectory& traj) {
  FormatVerdict verdict;
  auto& v = verdict.violations;

  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const Step& step = traj.steps[i];
    if (step.index != static_cast<int>(i) + 1)
      v.push_back({ViolationKind::BadStepIndex, 0, step.index,
                   "expected index " + std::to_string(i + 1)});
    validate_segment_order(step.segments, {}, step.index, v);
    const Segment* mem = step.find(SegmentKind::Mem);
    if (step.index >= 2) {
      if (mem == nullptr)
        v.push_back({ViolationKind::EmptyMemory, 0, step.index, "memory segment absent"});
      else if (mem->tokens.empty())
        v.push_back({ViolationKind::EmptyMemory, 0, step.index, "memory segment empty"});
    }
  }

  std::vector<int> answer_steps;
  for (const Step& step : traj.steps)
    if (step.find(SegmentKind::Answer) != nullptr) answer_steps.push_back(step.index);

  if (traj.terminated == Termination::Answered) {
    if (answer_steps.empty()) {
      v.push_back({ViolationKind::MissingAnswer, 0, 0, "terminated Answered without answer segment"});
    } else {
      if (answer_steps.size() > 1 || answer_steps.back() != static_cast<int>(traj.steps.size()))
        v.push_back({ViolationKind::AnswerNotFinal, 0, answer_steps.front(),
                     "answer must appear exactly once, in the final step"});
    }
    if (!traj.predicted_answer.has_value()) {
      v.push_back(
          {ViolationKind::InconsistentTermination, 0, 0, "Answered but predicted_answer missing"});
    } else if (!answer_steps.empty()) {
      const Segment* ans = traj.steps.back().find(SegmentKind::Answer);
      if (ans != nullptr && ans->tokens != *traj.predicted_answer)
        v.push_back({ViolationKind::InconsistentTermination, 0, 0,
                     "predicted_answer differs from final answer segment"});
    }
  } else {
    if (!answer_steps.empty())
      v.push_back({ViolationKind::InconsistentTermination, 0, answer_steps.front(),
                   "answer segment present without Answered termination"});
    if (traj.predicted_answer.has_value())
      v.push_back({ViolationKind::InconsistentTermination, 0, 0,
                   "predicted_answer present without Answered termination"});
    v.push_back({ViolationKind::MissingAnswer, 0, 0, "trajectory did not reach an answer"});
  }

  verdict.valid = v.empty();
  return verdict;
}

std::vector<TokenId> build_context(const std::vector<TokenId>& query,
                                   const std::vector<Step>& prior_steps, int step_index,
                                   ContextMode mode, const Vocabulary& vocab) {
  std::vector<TokenId> ctx = query;
  if (step_index <= 1) return ctx;
  const int prior_count = std::min<int>(step_index - 1, static_cast<int>(prior_steps.size()));

  if (mode.kind == ContextMode::Kind::Truncated) {
    // The conditioning is the memory content itself, untagged: the policy can
    // then tell a fresh step (no tag tokens in sight) from the state right
    // after closing its own memory segment.
    const Step& prev = prior_steps[static_cast<std::size_t>(prior_count - 1)];
    if (const Segment* mem = prev.find(SegmentKind::Mem))
      ctx.insert(ctx.end(), mem->tokens.begin(), mem->tokens.end());
    return ctx;
  }

  int first = 0;
  if (mode.kind == ContextMode::Kind::WindowK)
    first = std::max(0, prior_count - std::max(0, mode.window));
  for (int s = first; s < prior_count; ++s) {
    auto toks = step_tokens(prior_steps[static_cast<std::size_t>(s)], vocab);
    ctx.insert(ctx.end(), toks.begin(), toks.end());
  }
  return ctx;
}

TokenUsage token_usage(const Trajectory& traj, ContextMode mode, const Vocabulary& vocab) {
  TokenUsage usage;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    const auto ctx = build_context(traj.query, traj.steps, t, mode, vocab);
    long long generated = 0;
    for (const Segment& seg : traj.steps[i].segments)
      if (seg.source == SegmentSource::PolicyGenerated)
        generated += static_cast<long long>(seg.tokens.size()) + 2;
    const long long step_total = static_cast<long long>(ctx.size()) + generated;
    usage.total_tokens += step_total;
    usage.peak_step_tokens = std::max(usage.peak_step_tokens, step_total);
  }
  return usage;
}

std::string trajectory_to_json(const Trajectory& traj, const Vocabulary& vocab) {
  json j;
  j["query"] = vocab.render(traj.query);
  j["steps"] = json::array();
  for (const Step& step : traj.steps) {
    json js;
    js["index"] = step.index;
    js["segments"] = json::array();
    for (const Segment& seg : step.segments) {
      json jseg;
      jseg["kind"] = kKindNames[static_cast<int>(seg.kind)];
      jseg["text"] = vocab.render(seg.tokens);
      js["segments"].push_back(std::move(jseg));
    }
    j["steps"].push_back(std::move(js));
  }
  if (traj.predicted_answer.has_value())
    j["predicted_answer"] = vocab.render(*traj.predicted_answer);
  else
    j["predicted_answer"] = nullptr;
  switch (traj.terminated) {
    case Termination::Answered: j["terminated"] = "Answered"; break;
    case Termination::TurnLimit: j["terminated"] = "TurnLimit"; break;
    case Termination::FormatFailure: j["terminated"] = "FormatFailure"; break;
  }
  return j.dump();
}

Trajectory trajectory_from_json(const std::string& line, const Vocabulary& vocab) {
  const json j = json::parse(line);
  Trajectory traj;
  traj.query = vocab.encode(j.at("query").get<std::string>());
  for (const auto& js : j.at("steps")) {
    Step step;
    step.index = js.at("index").get<int>();
    for (const auto& jseg : js.at("segments")) {
      Segment seg;
      const auto kind = kind_from_name(jseg.at("kind").get<std::string>());
      if (!kind) throw std::runtime_error("unknown segment kind: " + jseg.at("kind").dump());
      seg.kind = *kind;
      seg.tokens = vocab.encode(jseg.at("text").get<std::string>());
      seg.source = seg.kind == SegmentKind::Information ? SegmentSource::EnvironmentReturned
                                                        : SegmentSource::PolicyGenerated;
      step.segments.push_back(std::move(seg));
    }
    traj.steps.push_back(std::move(step));
  }
  if (!j.at("predicted_answer").is_null())
    traj.predicted_answer = vocab.encode(j.at("predicted_answer").get<std::string>());
  const std::string term = j.at("terminated").get<std::string>();
  if (term == "Answered")
    traj.terminated = Termination::Answered;
  else if (term == "TurnLimit")
    traj.terminated = Termination::TurnLimit;
  else if (term == "FormatFailure")
    traj.terminated = Termination::FormatFailure;
  else
    throw std::runtime_error("unknown termination: " + term);
  return traj;
}

}  // namespace mempo
