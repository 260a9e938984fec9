#include "mempo/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "mempo/rng.hpp"

namespace mempo {

namespace {

using nlohmann::json;

const std::vector<std::string> kRelations = {"leader",   "capital", "color",  "founder",
                                             "mascot",   "rival",   "anthem", "currency"};

const std::vector<std::string> kTemplateWords = {"what", "is",    "the",   "of",     "also",
                                                 "plan", "search", "ready", "answer", "next"};

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::string objective_question(const Objective& obj) {
  if (obj.hops.size() == 1)
    return "what is the " + obj.hops[0].relation + " of " + obj.hops[0].subject + " ?";
  return "what is the " + obj.hops[1].relation + " of the " + obj.hops[0].relation + " of " +
         obj.hops[0].subject + " ?";
}

// Finds the object of "the <relation> of <subject> is X ." in any of the
// returned documents, scanning in rank order.
std::optional<std::string> extract_object(const std::vector<std::string>& docs,
                                          const std::string& subject,
                                          const std::string& relation) {
  const std::string pattern = "the " + relation + " of " + subject + " is ";
  for (const std::string& doc : docs) {
    const auto pos = doc.find(pattern);
    if (pos == std::string::npos) continue;
    std::size_t start = pos + pattern.size();
    std::size_t end = start;
    while (end < doc.size() && doc[end] != ' ') ++end;
    if (end > start) return doc.substr(start, end - start);
  }
  return std::nullopt;
}

std::string make_entity_name(Rng& rng, std::set<std::string>& taken,
                             const std::set<std::string>& reserved) {
  static const char* consonants = "bdfgklmnprstvz";
  static const char* vowels = "aeiou";
  for (;;) {
    const std::size_t syllables = 2 + uniform_index(rng, 2);  // 2 or 3
    std::string name;
    for (std::size_t s = 0; s < syllables; ++s) {
      name.push_back(consonants[uniform_index(rng, 14)]);
      name.push_back(vowels[uniform_index(rng, 5)]);
    }
    if (reserved.count(name) || taken.count(name)) continue;
    taken.insert(name);
    return name;
  }
}

}  // namespace

const std::vector<std::string>& template_words() { return kTemplateWords; }

ExpertScript make_expert_script(const MultiObjectiveQuestion& question, const KnowledgeBase& kb,
                                int top_k) {
  ExpertScript script;
  const int k = static_cast<int>(question.objectives.size());
  const int budget = 2 * k;

  // Minimum searches still required for objectives after `obj`, plus the
  // remaining hops of the current objective.
  auto min_remaining = [&](std::size_t obj, std::size_t hops_left) {
    int need = static_cast<int>(hops_left);
    for (std::size_t j = obj + 1; j < question.objectives.size(); ++j)
      need += static_cast<int>(question.objectives[j].hops.size());
    return need;
  };

  std::vector<std::string> found;

  auto mem_text = [&](const std::optional<std::string>& next_marker) {
    std::vector<std::string> parts = found;
    if (next_marker) parts.push_back("next " + *next_marker);
    return join(parts, " ; ");
  };

  for (std::size_t obj = 0; obj < question.objectives.size(); ++obj) {
    const Objective& objective = question.objectives[obj];
    std::string subject = objective.hops[0].subject;
    for (std::size_t hop = 0; hop < objective.hops.size(); ++hop) {
      const std::string& relation = objective.hops[hop].relation;
      std::string query = subject + " " + relation;
      // Every step carries a memory segment, step 1 included: the running
      // answer list plus a "next <query>" marker for the pending search. That
      // keeps truncated contexts distinct across steps.
      auto attempt = [&](const std::string& q) -> std::optional<std::string> {
        std::string text = "<mem>" + mem_text(q) + "</mem>\n";
        text += "<think>plan search</think>\n<tool_call>" + q + "</tool_call>";
        script.step_texts.push_back(text);
        ++script.searches;
        return extract_object(search(kb, q, top_k).documents, subject, relation);
      };
      auto result = attempt(query);
      if (!result &&
          script.searches + 1 + min_remaining(obj, objective.hops.size() - hop - 1) <= budget)
        result = attempt(subject);
      if (!result) return script;  // unsolved; script retained for diagnostics
      subject = *result;
    }
    found.push_back(subject);
  }

  script.answers = found;
  const std::string final_answer = join(found, " ; ");
  script.step_texts.push_back("<mem>" + final_answer + "</mem>\n<think>ready answer</think>\n<answer>" +
                              final_answer + "</answer>");
  script.solved = true;
  return script;
}

Dataset generate_dataset(const GenConfig& cfg) {
  if (cfg.k < 1 || cfg.n < 1 || cfg.kb_size < 1)
    throw std::invalid_argument("gen-data requires k >= 1, n >= 1, kb_size >= 1");
  if (cfg.two_hop_fraction < 0.0 || cfg.two_hop_fraction > 1.0)
    throw std::invalid_argument("two_hop_fraction must lie in [0, 1]");

  Rng rng(cfg.seed);

  // Chains per answer-slot pool: enough for n distinct slot combinations.
  int m = std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(cfg.n),
                                                          1.0 / cfg.k))) +
                          1);
  while (static_cast<long long>(cfg.k) * m > cfg.kb_size && m > 2) --m;
  if (static_cast<long long>(cfg.k) * m > cfg.kb_size)
    throw InsufficientCapacity("kb_size " + std::to_string(cfg.kb_size) +
                               " cannot hold chains for " + std::to_string(cfg.k) +
                               " objective slots");
  if (std::pow(static_cast<double>(m), cfg.k) < static_cast<double>(cfg.n))
    throw InsufficientCapacity("kb_size " + std::to_string(cfg.kb_size) +
                               " cannot support " + std::to_string(cfg.n) + " distinct " +
                               std::to_string(cfg.k) + "-objective questions");

  std::set<std::string> reserved(kTemplateWords.begin(), kTemplateWords.end());
  reserved.insert(kRelations.begin(), kRelations.end());
  std::set<std::string> taken;

  // One entity cycle per slot pool; every entity has exactly one outgoing
  // chain fact, so chain objects are always subjects too.
  std::vector<std::vector<std::string>> pools(static_cast<std::size_t>(cfg.k));
  for (auto& pool : pools)
    for (int i = 0; i < m; ++i) pool.push_back(make_entity_name(rng, taken, reserved));

  std::vector<Fact> facts;
  for (const auto& pool : pools) {
    std::vector<std::size_t> target(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) target[i] = (i + 1) % pool.size();
    shuffle(target, rng);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      std::size_t t = target[i];
      if (t == i) t = (i + 1) % pool.size();
      const std::string& rel = kRelations[uniform_index(rng, kRelations.size())];
      facts.push_back({pool[i], rel, pool[t]});
    }
  }

  // Remaining budget becomes single-fact distractor entities pointing at
  // existing subjects, which keeps the chain closure intact.
  std::vector<std::string> chain_entities;
  for (const auto& pool : pools)
    chain_entities.insert(chain_entities.end(), pool.begin(), pool.end());
  const int fillers = cfg.kb_size - cfg.k * m;
  for (int i = 0; i < fillers; ++i) {
    const std::string entity = make_entity_name(rng, taken, reserved);
    const std::string& rel = kRelations[uniform_index(rng, kRelations.size())];
    const std::string& obj = chain_entities[uniform_index(rng, chain_entities.size())];
    facts.push_back({entity, rel, obj});
  }

  Dataset dataset;
  dataset.config = cfg;
  dataset.kb = KnowledgeBase(facts);

  auto chain_fact = [&](const std::string& subject) -> const Fact* {
    for (const Fact& f : dataset.kb.facts())
      if (f.subject == subject) return &f;
    return nullptr;
  };

  std::set<std::vector<int>> used;
  for (int q = 0; q < cfg.n; ++q) {
    bool committed = false;
    for (int attempt = 0; attempt < 400 && !committed; ++attempt) {
      std::vector<int> key;
      MultiObjectiveQuestion question;
      for (int p = 0; p < cfg.k; ++p) {
        const int idx = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(m)));
        const bool two_hop = uniform01(rng) < cfg.two_hop_fraction;
        const std::string& subject = pools[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
        Objective obj;
        const Fact* first = chain_fact(subject);
        obj.hops.push_back(*first);
        if (two_hop) obj.hops.push_back(*chain_fact(first->object));
        obj.gold_answer = obj.hops.back().object;
        obj.question = objective_question(obj);
        key.push_back(idx * 2 + (two_hop ? 1 : 0));
        question.objectives.push_back(std::move(obj));
      }
      if (used.count(key)) continue;

      std::vector<std::string> parts;
      for (const Objective& obj : question.objectives) {
        parts.push_back(obj.question);
        question.gold_answers.push_back(obj.gold_answer);
      }
      question.query = join(parts, " also , ");

      const ExpertScript script = make_expert_script(question, dataset.kb, 3);
      if (!script.solved || script.answers != question.gold_answers) continue;

      used.insert(key);
      dataset.questions.push_back(std::move(question));
      committed = true;
    }
    if (!committed)
      throw InsufficientCapacity("could not sample question " + std::to_string(q + 1) + " of " +
                                 std::to_string(cfg.n));
  }
  return dataset;
}

Vocabulary build_vocabulary(const Dataset& dataset) {
  std::set<std::string> words;
  words.insert(kTemplateWords.begin(), kTemplateWords.end());
  for (char c : std::string(";,?.:")) words.insert(std::string(1, c));
  for (const Fact& f : dataset.kb.facts()) {
    words.insert(f.subject);
    words.insert(f.relation);
    words.insert(f.object);
  }
  for (const auto& q : dataset.questions)
    for (const Lexeme& lex : split_lexemes(q.query)) words.insert(lex.text);
  return Vocabulary::build(std::vector<std::string>(words.begin(), words.end()));
}

std::string dataset_to_json(const Dataset& dataset) {
  json j;
  j["config"] = {{"k", dataset.config.k},
                 {"n", dataset.config.n},
                 {"kb_size", dataset.config.kb_size},
                 {"seed", dataset.config.seed},
                 {"two_hop_fraction", dataset.config.two_hop_fraction}};
  j["facts"] = json::array();
  for (const Fact& f : dataset.kb.facts())
    j["facts"].push_back({{"s", f.subject}, {"r", f.relation}, {"o", f.object}});
  j["questions"] = json::array();
  for (const auto& q : dataset.questions) {
    json jq;
    jq["objectives"] = json::array();
    for (const Objective& obj : q.objectives) {
      json jo;
      jo["hops"] = json::array();
      for (const Fact& f : obj.hops)
        jo["hops"].push_back({{"s", f.subject}, {"r", f.relation}, {"o", f.object}});
      jo["question"] = obj.question;
      jo["gold_answer"] = obj.gold_answer;
      jq["objectives"].push_back(std::move(jo));
    }
    jq["query"] = q.query;
    jq["gold_answers"] = q.gold_answers;
    j["questions"].push_back(std::move(jq));
  }
  return j.dump(2);
}

Dataset dataset_from_json(const std::string& text) {
  const json j = json::parse(text);
  Dataset dataset;
  const auto& jc = j.at("config");
  dataset.config.k = jc.at("k").get<int>();
  dataset.config.n = jc.at("n").get<int>();
  dataset.config.kb_size = jc.at("kb_size").get<int>();
  dataset.config.seed = jc.at("seed").get<std::uint64_t>();
  dataset.config.two_hop_fraction = jc.at("two_hop_fraction").get<double>();
  std::vector<Fact> facts;
  for (const auto& jf : j.at("facts"))
    facts.push_back({jf.at("s").get<std::string>(), jf.at("r").get<std::string>(),
                     jf.at("o").get<std::string>()});
  dataset.kb = KnowledgeBase(std::move(facts));
  for (const auto& jq : j.at("questions")) {
    MultiObjectiveQuestion q;
    for (const auto& jo : jq.at("objectives")) {
      Objective obj;
      for (const auto& jf : jo.at("hops"))
        obj.hops.push_back({jf.at("s").get<std::string>(), jf.at("r").get<std::string>(),
                            jf.at("o").get<std::string>()});
      obj.question = jo.at("question").get<std::string>();
      obj.gold_answer = jo.at("gold_answer").get<std::string>();
      q.objectives.push_back(std::move(obj));
    }
    q.query = jq.at("query").get<std::string>();
    q.gold_answers = jq.at("gold_answers").get<std::vector<std::string>>();
    dataset.questions.push_back(std::move(q));
  }
  return dataset;
}

std::string normalize_answer(std::string_view text) {
  std::string spaced;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      spaced.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    else
      spaced.push_back(' ');
  }
  std::string out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (word != "a" && word != "an" && word != "the") {
      if (!out.empty()) out.push_back(' ');
      out += word;
    }
    word.clear();
  };
  for (char c : spaced) {
    if (c == ' ')
      flush();
    else
      word.push_back(c);
  }
  flush();
  return out;
}

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (char c : text) {
    if (c == ' ') {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(c);
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

double word_f1(const std::string& pred_norm, const std::string& gold_norm) {
  const auto pred = split_words(pred_norm);
  const auto gold = split_words(gold_norm);
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> gold_counts;
  for (const auto& w : gold) ++gold_counts[w];
  int overlap = 0;
  for (const auto& w : pred) {
    auto it = gold_counts.find(w);
    if (it != gold_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

JudgeScore judge_answer(const std::string& pred, const std::vector<std::string>& gold_answers) {
  std::vector<std::string> parts;
  std::string part;
  for (char c : pred) {
    if (c == ';') {
      parts.push_back(part);
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  parts.push_back(part);

  JudgeScore score;
  const std::size_t k = gold_answers.size();
  if (k == 0) return score;

  bool exact = parts.size() == k;
  double f1_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string gold_norm = normalize_answer(gold_answers[i]);
    if (i < parts.size()) {
      const std::string pred_norm = normalize_answer(parts[i]);
      if (pred_norm != gold_norm) exact = false;
      f1_sum += word_f1(pred_norm, gold_norm);
    } else {
      exact = false;
    }
  }
  score.em = exact ? 1 : 0;
  score.f1 = f1_sum / static_cast<double>(k);
  return score;
}

}  // namespace mempo
