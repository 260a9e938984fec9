#include "mempo/vocab.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace mempo {

namespace {

constexpr std::array<std::string_view, kSegmentKindCount> kOpenTags = {
    "<mem>", "<think>", "<tool_call>", "<information>", "<answer>"};
constexpr std::array<std::string_view, kSegmentKindCount> kCloseTags = {
    "</mem>", "</think>", "</tool_call>", "</information>", "</answer>"};

constexpr std::string_view kPunct = ";,?.:";

bool is_punct(char c) { return kPunct.find(c) != std::string_view::npos; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

}  // namespace

std::string_view open_tag_surface(SegmentKind kind) { return kOpenTags[static_cast<int>(kind)]; }
std::string_view close_tag_surface(SegmentKind kind) { return kCloseTags[static_cast<int>(kind)]; }

std::vector<Lexeme> split_lexemes(std::string_view text) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '<') {
      // Lex a whole "<...>" span as one candidate tag token. A '<' that never
      // closes before whitespace is kept as-is and will fail vocabulary lookup.
      std::size_t j = i + 1;
      while (j < n && text[j] != '>' && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < n && text[j] == '>') {
        std::string tag;
        for (std::size_t k = i; k <= j; ++k) tag.push_back(lower(text[k]));
        out.push_back({std::move(tag), i});
        i = j + 1;
        continue;
      }
      std::string word;
      for (std::size_t k = i; k < j; ++k) word.push_back(lower(text[k]));
      out.push_back({std::move(word), i});
      i = j;
      continue;
    }
    if (is_punct(c)) {
      out.push_back({std::string(1, c), i});
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string word;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j])) && !is_punct(text[j]) &&
           text[j] != '<') {
      word.push_back(lower(text[j]));
      ++j;
    }
    out.push_back({std::move(word), i});
    i = j;
  }
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& words) {
  Vocabulary v;
  auto add = [&v](std::string_view s) -> TokenId {
    auto it = v.ids_.find(std::string(s));
    if (it != v.ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(v.surfaces_.size());
    v.surfaces_.emplace_back(s);
    v.ids_.emplace(std::string(s), id);
    return id;
  };
  for (int k = 0; k < kSegmentKindCount; ++k) v.open_tags_[k] = add(kOpenTags[k]);
  for (int k = 0; k < kSegmentKindCount; ++k) v.close_tags_[k] = add(kCloseTags[k]);
  for (const auto& w : words) {
    if (w.empty()) throw std::invalid_argument("vocabulary surfaces must be non-empty");
    add(w);
  }
  return v;
}

TokenId Vocabulary::id(std::string_view surface) const {
  auto it = ids_.find(std::string(surface));
  if (it == ids_.end()) throw OutOfVocabulary("unknown token: " + std::string(surface));
  return it->second;
}

bool Vocabulary::contains(std::string_view surface) const {
  return ids_.find(std::string(surface)) != ids_.end();
}

const std::string& Vocabulary::surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size())
    throw OutOfVocabulary("token id out of range: " + std::to_string(id));
  return surfaces_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const Lexeme& lex : split_lexemes(text)) out.push_back(id(lex.text));
  return out;
}

std::string Vocabulary::render(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += surface(tokens[i]);
  }
  return out;
}

std::string Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  };
  for (const auto& s : surfaces_) {
    for (char c : s) mix(c);
    mix('\n');
  }
  static const char* digits = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i) {
    hex[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return hex;
}

}  // namespace mempo
