#pragma once

#include <string>
#include <vector>

#include "mempo/vocab.hpp"

namespace mempo {

// One (subject, relation, object) triple. (subject, relation) pairs are
// unique within a knowledge base.
struct Fact {
  std::string subject;
  std::string relation;
  std::string object;

  bool operator==(const Fact&) const = default;
};

struct Document {
  std::string entity;  // doc id = position in KnowledgeBase::documents
  std::string text;
};

// Immutable fact store plus the derived per-entity documents the search tool
// serves. Safe to share across rollout workers.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<Fact> facts);

  const std::vector<Fact>& facts() const { return facts_; }
  const std::vector<Document>& documents() const { return documents_; }

  // Object of the unique (subject, relation) fact, or empty if absent.
  std::string lookup(const std::string& subject, const std::string& relation) const;
  bool has_subject(const std::string& subject) const;

 private:
  std::vector<Fact> facts_;
  std::vector<Document> documents_;
};

struct ToolResult {
  std::string query;
  std::vector<std::string> documents;  // at most top_k, ordered by score desc
};

// Lexical-overlap retrieval: score is the number of distinct normalized
// tokens shared between query and document; ties break by document id
// ascending; zero-score documents are never returned.
ToolResult search(const KnowledgeBase& kb, const std::string& query, int top_k);

}  // namespace mempo
