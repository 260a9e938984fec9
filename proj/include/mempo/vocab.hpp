#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mempo {

using TokenId = std::int32_t;

// The five segment kinds of a tagged interaction step.
enum class SegmentKind : std::uint8_t { Mem = 0, Think, ToolCall, Information, Answer };

inline constexpr int kSegmentKindCount = 5;

// Tag surfaces, indexed by SegmentKind. Each tag is a single reserved
// vocabulary token so parsing stays unambiguous.
std::string_view open_tag_surface(SegmentKind kind);
std::string_view close_tag_surface(SegmentKind kind);

struct OutOfVocabulary : std::runtime_error {
  explicit OutOfVocabulary(const std::string& what) : std::runtime_error(what) {}
};

// A lexeme produced by the text splitter: a surface plus its byte offset in
// the source string. Offsets are what parse errors point at.
struct Lexeme {
  std::string text;
  std::size_t offset = 0;
};

// Splits raw text into lexemes: whitespace separates, "<...>" spans lex as a
// single candidate tag, and ; , ? . : are single-character tokens. ASCII is
// lowercased so the closed vocabulary stays case-free.
std::vector<Lexeme> split_lexemes(std::string_view text);

// Closed word-level vocabulary. Ids are dense, surfaces unique and non-empty.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Builds the vocabulary from word surfaces. The ten tag tokens are always
  // inserted first, in kind order, so their ids are stable.
  static Vocabulary build(const std::vector<std::string>& words);

  TokenId id(std::string_view surface) const;
  bool contains(std::string_view surface) const;
  const std::string& surface(TokenId id) const;
  std::size_t size() const { return surfaces_.size(); }

  TokenId open_tag(SegmentKind kind) const { return open_tags_[static_cast<int>(kind)]; }
  TokenId close_tag(SegmentKind kind) const { return close_tags_[static_cast<int>(kind)]; }
  bool is_tag(TokenId id) const { return id >= 0 && id < 2 * kSegmentKindCount; }

  // Tokenizes text; throws OutOfVocabulary naming the offending word.
  std::vector<TokenId> encode(std::string_view text) const;
  // Joins surfaces with single spaces.
  std::string render(std::span<const TokenId> tokens) const;

  // FNV-1a 64 over all surfaces, as a fixed-width hex string. Checkpoints
  // record this and refuse to load against a different vocabulary.
  std::string hash() const;

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, TokenId> ids_;
  TokenId open_tags_[kSegmentKindCount] = {};
  TokenId close_tags_[kSegmentKindCount] = {};
};

}  // namespace mempo
