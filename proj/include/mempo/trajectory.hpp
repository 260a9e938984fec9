#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mempo/vocab.hpp"

namespace mempo {

enum class SegmentSource : std::uint8_t { PolicyGenerated, EnvironmentReturned };

struct Segment {
  SegmentKind kind = SegmentKind::Think;
  std::vector<TokenId> tokens;  // content only; tags are implicit in kind
  SegmentSource source = SegmentSource::PolicyGenerated;

  bool operator==(const Segment&) const = default;
};

// One interaction round. Segment order is Mem?, Think, (ToolCall, Information?) | Answer.
struct Step {
  int index = 1;  // 1-based
  std::vector<Segment> segments;

  const Segment* find(SegmentKind kind) const;
  bool operator==(const Step&) const = default;
};

enum class Termination : std::uint8_t { Answered, TurnLimit, FormatFailure };

struct Trajectory {
  std::vector<TokenId> query;
  std::vector<Step> steps;
  std::optional<std::vector<TokenId>> predicted_answer;
  Termination terminated = Termination::TurnLimit;
};

enum class ViolationKind : std::uint8_t {
  UnclosedTag,
  IllegalOrder,
  DuplicateSegment,
  UnknownTag,
  NestedTag,
  StrayText,
  UnknownToken,
  MissingThink,
  MissingAction,
  EmptyMemory,
  MissingAnswer,
  AnswerNotFinal,
  BadStepIndex,
  InconsistentTermination,
};

const char* violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::size_t offset = 0;  // byte offset into the parsed text, when applicable
  int step = 0;            // 1-based step index, 0 when not step-scoped
  std::string detail;
};

struct ParseResult {
  std::optional<Step> step;  // engaged iff ok()
  std::vector<Violation> violations;
  bool ok() const { return step.has_value(); }
};

// Parses the raw tagged text of one interaction step. The grammar is flat:
// nested tags are rejected, untagged non-whitespace between segments is
// rejected, and segment order must be Mem?, Think, (ToolCall, Information?) | Answer.
ParseResult parse_step(std::string_view text, const Vocabulary& vocab);

// Canonical inverse of parse_step: one newline between segments, no padding
// inside tags. parse_step(render_step(s)) == s for any structurally valid s.
std::string render_step(const Step& step, const Vocabulary& vocab);

// Tag-wrapped token sequence of a segment: open tag, content, close tag.
std::vector<TokenId> segment_tokens(const Segment& seg, const Vocabulary& vocab);

// All segments of a step as tokens, in order, tags included.
std::vector<TokenId> step_tokens(const Step& step, const Vocabulary& vocab);

struct FormatVerdict {
  bool valid = false;
  std::vector<Violation> violations;
};

// Structural validity of a fully assembled trajectory: every step well formed
// in-place, contiguous 1-based indices, memory non-empty from step 2 on, and
// exactly the final step answers iff the trajectory terminated with an answer.
FormatVerdict check_format(const Trajectory& traj);

// Context-construction mode for step-t inference. Truncated feeds only the
// query plus the previous step's memory segment; Full feeds the query plus
// every prior segment; a window of k retains the last k full steps.
struct ContextMode {
  enum class Kind : std::uint8_t { Truncated, Full, WindowK } kind = Kind::Truncated;
  int window = 0;  // used by WindowK

  static ContextMode truncated() { return {Kind::Truncated, 0}; }
  static ContextMode full() { return {Kind::Full, 0}; }
  static ContextMode window_k(int k) { return {Kind::WindowK, k}; }
  bool operator==(const ContextMode&) const = default;
};

// The token sequence fed to the policy when generating step `step_index`
// (1-based) of a trajectory with the given prior steps.
std::vector<TokenId> build_context(const std::vector<TokenId>& query,
                                   const std::vector<Step>& prior_steps, int step_index,
                                   ContextMode mode, const Vocabulary& vocab);

struct TokenUsage {
  long long total_tokens = 0;
  long long peak_step_tokens = 0;
};

// Per-step cost is context fed to the policy plus tokens the policy generated
// (tags included); environment-returned tokens are only ever counted through
// the contexts that carry them.
TokenUsage token_usage(const Trajectory& traj, ContextMode mode, const Vocabulary& vocab);

// JSONL interchange: one trajectory per line, segment text stored as the
// rendered surface string.
std::string trajectory_to_json(const Trajectory& traj, const Vocabulary& vocab);
Trajectory trajectory_from_json(const std::string& line, const Vocabulary& vocab);

}  // namespace mempo
