#include "mempo/knowledge.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace mempo {

namespace {

std::set<std::string> token_set(const std::string& text) {
  std::set<std::string> out;
  for (const Lexeme& lex : split_lexemes(text)) out.insert(lex.text);
  return out;
}

}  // namespace

KnowledgeBase::KnowledgeBase(std::vector<Fact> facts) : facts_(std::move(facts)) {
  // Documents are keyed by subject entity, in first-appearance order of the
  // fact list, each rendering that entity's facts sorted by relation.
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Fact*>> by_subject;
  for (const Fact& f : facts_) {
    auto [it, inserted] = by_subject.try_emplace(f.subject);
    if (inserted) order.push_back(f.subject);
    it->second.push_back(&f);
  }
  for (const std::string& entity : order) {
    auto& fs = by_subject[entity];
    std::sort(fs.begin(), fs.end(),
              [](const Fact* a, const Fact* b) { return a->relation < b->relation; });
    std::string text = entity + " :";
    for (const Fact* f : fs)
      text += " the " + f->relation + " of " + f->subject + " is " + f->object + " .";
    documents_.push_back({entity, std::move(text)});
  }
}

std::string KnowledgeBase::lookup(const std::string& subject, const std::string& relation) const {
  for (const Fact& f : facts_)
    if (f.subject == subject && f.relation == relation) return f.object;
  return {};
}

bool KnowledgeBase::has_subject(const std::string& subject) const {
  for (const Fact& f : facts_)
    if (f.subject == subject) return true;
  return false;
}

ToolResult search(const KnowledgeBase& kb, const std::string& query, int top_k) {
  ToolResult result;
  result.query = query;
  if (top_k < 1) return result;
  const auto q = token_set(query);
  if (q.empty()) return result;

  std::vector<std::pair<int, std::size_t>> scored;  // (score, doc id)
  for (std::size_t i = 0; i < kb.documents().size(); ++i) {
    const auto d = token_set(kb.documents()[i].text);
    int score = 0;
    for (const auto& tok : q)
      if (d.count(tok)) ++score;
    if (score > 0) scored.emplace_back(score, i);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; i < scored.size() && i < static_cast<std::size_t>(top_k); ++i)
    result.documents.push_back(kb.documents()[scored[i].second].text);
  return result;
}

}  // namespace mempo
