#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mempo/knowledge.hpp"
#include "mempo/vocab.hpp"

namespace mempo {

// A single question objective: a 1- or 2-hop fact chain, its natural-language
// question, and the gold answer (object of the final hop).
struct Objective {
  std::vector<Fact> hops;
  std::string question;
  std::string gold_answer;
};

struct MultiObjectiveQuestion {
  std::vector<Objective> objectives;
  std::string query;                     // objective questions joined by " also , "
  std::vector<std::string> gold_answers; // one per objective, in order
};

struct GenConfig {
  int k = 2;
  int n = 100;
  int kb_size = 200;
  std::uint64_t seed = 0;
  double two_hop_fraction = 0.0;
};

struct Dataset {
  GenConfig config;
  KnowledgeBase kb;
  std::vector<MultiObjectiveQuestion> questions;
};

struct InsufficientCapacity : std::runtime_error {
  explicit InsufficientCapacity(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic under seed. Every question is solvable by the scripted
// breadth-first expert within 2·k searches, and the knowledge base always
// contains at least three documents beyond those supporting any question.
Dataset generate_dataset(const GenConfig& cfg);

// The words, beyond tags, that dataset text can use: question/document
// templates plus the scripted demonstration phrasing.
const std::vector<std::string>& template_words();

// Closed vocabulary over every surface the dataset can produce. Deterministic
// for a given dataset.
Vocabulary build_vocabulary(const Dataset& dataset);

std::string dataset_to_json(const Dataset& dataset);
Dataset dataset_from_json(const std::string& text);

// --- answer judging -------------------------------------------------------

struct JudgeScore {
  int em = 0;     // 1 iff part count matches and every part matches positionally
  double f1 = 0;  // mean word-level F1 over gold positions
};

// Lowercase, strip punctuation, drop the articles {a, an, the}, collapse
// whitespace.
std::string normalize_answer(std::string_view text);

// Positional scoring of a semicolon-separated prediction against the ordered
// gold answers.
JudgeScore judge_answer(const std::string& pred, const std::vector<std::string>& gold_answers);

// --- scripted expert -------------------------------------------------------

// Replayable solution script: per-step policy text in tagged form. Used for
// demonstrations, solvability verification, and oracle baselines.
struct ExpertScript {
  bool solved = false;
  int searches = 0;
  std::vector<std::string> step_texts;
  std::vector<std::string> answers;
};

// Solves a question with the search tool only (no direct fact lookups),
// spending at most 2·k searches: per hop, query "subject relation" and fall
// back to the bare subject when budget allows.
ExpertScript make_expert_script(const MultiObjectiveQuestion& question, const KnowledgeBase& kb,
                                int top_k);

}  // namespace mempo
