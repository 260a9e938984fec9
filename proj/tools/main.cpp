// Command-line laboratory for self-memory policy optimization: synthetic
// multi-objective QA data, behavior cloning, RL training, evaluation, reward
// scoring, and probability analysis.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mempo/config.hpp"
#include "mempo/evaluate.hpp"
#include "mempo/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

mempo::Dataset load_dataset(const std::string& path) {
  return mempo::dataset_from_json(read_file(path));
}

mempo::ContextMode parse_mode(const std::string& text) {
  if (text == "truncated") return mempo::ContextMode::truncated();
  if (text == "full") return mempo::ContextMode::full();
  if (text.rfind("window:", 0) == 0) {
    const int k = std::stoi(text.substr(7));
    if (k < 0) throw mempo::ConfigError("window size must be >= 0");
    return mempo::ContextMode::window_k(k);
  }
  throw mempo::ConfigError("unknown mode '" + text + "' (expected truncated|full|window:K)");
}

std::vector<mempo::MultiObjectiveQuestion> select_subset(const mempo::Dataset& dataset,
                                                         const std::string& subset,
                                                         double train_fraction) {
  const int n = static_cast<int>(dataset.questions.size());
  std::vector<int> indices;
  if (subset == "all") {
    for (int i = 0; i < n; ++i) indices.push_back(i);
  } else if (subset == "train") {
    indices = mempo::train_split(n, train_fraction);
  } else if (subset == "heldout") {
    indices = mempo::heldout_split(n, train_fraction);
  } else {
    throw mempo::ConfigError("unknown subset '" + subset + "' (expected all|train|heldout)");
  }
  std::vector<mempo::MultiObjectiveQuestion> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(dataset.questions[static_cast<std::size_t>(i)]);
  return out;
}

json eval_report_json(const mempo::EvalReport& report, const std::string& mode) {
  json j;
  j["mode"] = mode;
  j["count"] = report.count;
  j["f1_mean"] = report.f1_mean;
  j["em_mean"] = report.em_mean;
  j["tt_mean"] = report.tt_mean;
  j["pt_mean"] = report.pt_mean;
  j["rows"] = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["question"] = row.question_index;
    r["em"] = row.em;
    r["f1"] = row.f1;
    r["total_tokens"] = row.total_tokens;
    r["peak_step_tokens"] = row.peak_step_tokens;
    r["steps"] = row.steps;
    r["terminated"] = row.terminated == mempo::Termination::Answered     ? "Answered"
                      : row.terminated == mempo::Termination::TurnLimit ? "TurnLimit"
                                                                        : "FormatFailure";
    j["rows"].push_back(std::move(r));
  }
  return j;
}

struct CommonFlags {
  std::string config_path;
  std::string preset = "desk";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "flat key = value config file");
  cmd->add_option("--preset", flags.preset, "config preset: desk|paper")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "master seed override")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
}

mempo::TrainConfig resolve_config(const CommonFlags& flags) {
  return mempo::load_config(flags.preset, flags.config_path,
                            flags.seed_set ? &flags.seed : nullptr);
}

int cmd_gen_data(int k, int n, int kb_size, std::uint64_t seed, double two_hop_frac,
                 const std::string& out_dir) {
  mempo::RunManifest manifest;
  manifest.command = "gen-data";
  manifest.seed = seed;
  manifest.config = {{"k", std::to_string(k)},
                     {"n", std::to_string(n)},
                     {"kb_size", std::to_string(kb_size)},
                     {"two_hop_fraction", fmt(two_hop_frac)}};
  manifest.started_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);

  mempo::GenConfig cfg;
  cfg.k = k;
  cfg.n = n;
  cfg.kb_size = kb_size;
  cfg.seed = seed;
  cfg.two_hop_fraction = two_hop_frac;
  const mempo::Dataset dataset = mempo::generate_dataset(cfg);
  const std::string dataset_path = out_dir + "/dataset.json";
  write_file(dataset_path, mempo::dataset_to_json(dataset));

  manifest.dataset_path = dataset_path;
  manifest.dataset_hash = mempo::file_hash(dataset_path);
  manifest.vocab_hash = mempo::build_vocabulary(dataset).hash();
  manifest.finished_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);

  std::cout << "wrote " << dataset_path << " with " << dataset.questions.size() << " questions, "
            << dataset.kb.facts().size() << " facts\n";
  return 0;
}

int cmd_bc(const std::string& dataset_path, const std::string& out_dir, const CommonFlags& flags) {
  const mempo::TrainConfig cfg = resolve_config(flags);
  const mempo::Dataset dataset = load_dataset(dataset_path);
  const mempo::Vocabulary vocab = mempo::build_vocabulary(dataset);

  mempo::RunManifest manifest;
  manifest.command = "bc";
  manifest.config = mempo::config_to_kv(cfg);
  manifest.seed = cfg.seed;
  manifest.dataset_path = dataset_path;
  manifest.dataset_hash = mempo::file_hash(dataset_path);
  manifest.vocab_hash = vocab.hash();
  manifest.started_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);

  mempo::EpisodeConfig demo_cfg;
  demo_cfg.max_turns = cfg.max_turns;
  demo_cfg.top_k = cfg.top_k;

  const auto train_idx =
      mempo::train_split(static_cast<int>(dataset.questions.size()), cfg.train_fraction);
  std::vector<mempo::Trajectory> demos;
  std::string demo_lines;
  for (int q : train_idx) {
    if (static_cast<int>(demos.size()) >= cfg.bc_max_demos) break;
    const auto demo = mempo::make_demonstration(dataset.questions[static_cast<std::size_t>(q)],
                                                dataset.kb, vocab, demo_cfg);
    if (!demo) continue;
    demo_lines += mempo::trajectory_to_json(demo->trajectory, vocab);
    demo_lines += "\n";
    demos.push_back(demo->trajectory);
  }
  if (demos.empty()) throw std::runtime_error("no demonstrations could be scripted");
  write_file(out_dir + "/demos.jsonl", demo_lines);

  mempo::PolicyDims dims{static_cast<int>(vocab.size()), cfg.model_dim, cfg.model_window};
  mempo::PolicyParams params = mempo::PolicyParams::random_init(
      dims, vocab.hash(), 0.02, mempo::derive_seed(cfg.seed, {0xbcu}));
  const mempo::BCReport report = mempo::behavior_clone(params, demos, vocab, cfg.bc_epochs,
                                                       cfg.bc_learning_rate, cfg.bc_optimizer);
  mempo::save_checkpoint(params, out_dir + "/bc_checkpoint.json");

  manifest.finished_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);
  std::cout << "behavior cloning: " << demos.size() << " demos, " << report.token_count
            << " tokens, nll " << fmt(report.nll_first) << " -> " << fmt(report.nll_last) << "\n";
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& init_path,
              const std::string& out_dir, const CommonFlags& flags) {
  const mempo::TrainConfig cfg = resolve_config(flags);
  const mempo::Dataset dataset = load_dataset(dataset_path);
  const mempo::Vocabulary vocab = mempo::build_vocabulary(dataset);

  mempo::RunManifest manifest;
  manifest.command = "train";
  manifest.config = mempo::config_to_kv(cfg);
  manifest.seed = cfg.seed;
  manifest.dataset_path = dataset_path;
  manifest.dataset_hash = mempo::file_hash(dataset_path);
  manifest.vocab_hash = vocab.hash();
  manifest.started_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);

  mempo::PolicyParams params =
      init_path.empty()
          ? mempo::PolicyParams::random_init(
                mempo::PolicyDims{static_cast<int>(vocab.size()), cfg.model_dim, cfg.model_window},
                vocab.hash(), 0.02, mempo::derive_seed(cfg.seed, {0x11u}))
          : mempo::load_checkpoint(init_path, vocab.hash());

  fs::create_directories(out_dir);
  std::ofstream updates(out_dir + "/updates.csv", std::ios::binary);
  updates << "update,surrogate_value,kl_value,clip_fraction,grad_norm,mean_traj_reward,mean_mem_"
             "reward\n";
  std::ofstream audit_traj(out_dir + "/audit_traj.csv", std::ios::binary);
  audit_traj << "update,query,traj_id,reward_T,adv_T\n";
  std::ofstream audit_mem(out_dir + "/audit_mem.csv", std::ios::binary);
  audit_mem << "update,query,traj_id,step,reward_M,adv_M\n";

  mempo::TrainHooks hooks;
  hooks.on_update = [&updates](const mempo::UpdateReport& r) {
    updates << r.update << ',' << fmt(r.surrogate_value) << ',' << fmt(r.kl_value) << ','
            << fmt(r.clip_fraction) << ',' << fmt(r.grad_norm) << ',' << fmt(r.mean_traj_reward)
            << ',' << fmt(r.mean_mem_reward) << "\n";
  };
  hooks.on_group = [&](int update, const mempo::RolloutGroup& group,
                       const std::vector<mempo::AdvantageMap>& maps) {
    const auto traj_adv = mempo::trajectory_advantages(group);
    for (std::size_t i = 0; i < group.traj_rewards.size(); ++i)
      audit_traj << update << ',' << group.query_index << ',' << i << ','
                 << fmt(group.traj_rewards[i].value) << ',' << fmt(traj_adv[i]) << "\n";
    for (const auto& r : group.mem_rewards) {
      const auto& map = maps[static_cast<std::size_t>(r.trajectory_index)];
      const auto it = map.mem_advantage_by_step.find(r.step);
      const double adv = it != map.mem_advantage_by_step.end() ? it->second : 0.0;
      audit_mem << update << ',' << group.query_index << ',' << r.trajectory_index << ',' << r.step
                << ',' << fmt(r.value) << ',' << fmt(adv) << "\n";
    }
  };
  hooks.on_checkpoint = [&out_dir](int update, const mempo::PolicyParams& p) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_%06d.json", update);
    mempo::save_checkpoint(p, out_dir + "/" + name);
  };

  try {
    const mempo::TrainResult result = mempo::train(params, dataset, vocab, cfg, hooks);
    mempo::save_checkpoint(result.params, out_dir + "/checkpoint_final.json");
  } catch (const mempo::NonFiniteGradient& e) {
    std::string lines;
    for (const auto& line : e.batch) lines += line + "\n";
    write_file(out_dir + "/failed_batch.jsonl", lines);
    std::cerr << e.what() << "; offending batch written to " << out_dir
              << "/failed_batch.jsonl\n";
    throw;
  }

  manifest.finished_utc = mempo::utc_timestamp();
  mempo::write_manifest(manifest, out_dir);
  std::cout << "trained " << cfg.num_updates << " updates into " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& dataset_path, const std::string& checkpoint_path,
             const std::string& mode_text, const std::string& subset, double train_fraction,
             const std::string& out_path, const std::string& traj_path, int max_turns, int top_k,
             int max_new_tokens, std::uint64_t seed, int workers) {
  const mempo::Dataset dataset = load_dataset(dataset_path);
  const mempo::Vocabulary vocab = mempo::build_vocabulary(dataset);
  const mempo::PolicyParams params = mempo::load_checkpoint(checkpoint_path, vocab.hash());
  const auto questions = select_subset(dataset, subset, train_fraction);

  mempo::EvalOptions opts;
  opts.mode = parse_mode(mode_text);
  opts.max_turns = max_turns;
  opts.top_k = top_k;
  opts.max_new_tokens = max_new_tokens;
  opts.seed = seed;
  opts.workers = workers;

  std::vector<mempo::Trajectory> trajectories;
  const mempo::EvalReport report =
      mempo::evaluate(params, questions, dataset.kb, vocab, opts,
                      traj_path.empty() ? nullptr : &trajectories);

  const json j = eval_report_json(report, mode_text);
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_file(out_path, j.dump(2) + "\n");
  if (!traj_path.empty()) {
    std::string lines;
    for (const auto& traj : trajectories) lines += mempo::trajectory_to_json(traj, vocab) + "\n";
    write_file(traj_path, lines);
  }
  std::cerr << "eval " << mode_text << " subset=" << subset << ": em " << fmt(report.em_mean)
            << " f1 " << fmt(report.f1_mean) << " tt " << fmt(report.tt_mean) << " pt "
            << fmt(report.pt_mean) << "\n";
  return 0;
}

int cmd_score(const std::string& dataset_path, const std::string& checkpoint_path,
              const std::string& traj_path, const std::string& out_dir) {
  const mempo::Dataset dataset = load_dataset(dataset_path);
  const mempo::Vocabulary vocab = mempo::build_vocabulary(dataset);
  const mempo::PolicyParams params = mempo::load_checkpoint(checkpoint_path, vocab.hash());

  std::map<std::string, const mempo::MultiObjectiveQuestion*> by_query;
  for (const auto& q : dataset.questions) by_query[q.query] = &q;

  fs::create_directories(out_dir);
  std::ofstream traj_csv(out_dir + "/rewards_traj.csv", std::ios::binary);
  traj_csv << "traj_id,reward,format_ok,answer_ok\n";
  std::ofstream mem_csv(out_dir + "/rewards_mem.csv", std::ios::binary);
  mem_csv << "traj_id,step,p_mem,epsilon,reward\n";

  std::istringstream lines(read_file(traj_path));
  std::string line;
  int traj_id = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const mempo::Trajectory traj = mempo::trajectory_from_json(line, vocab);
    const auto it = by_query.find(vocab.render(traj.query));
    if (it == by_query.end())
      throw std::runtime_error("trajectory " + std::to_string(traj_id) +
                               " does not match any dataset question");
    const mempo::MultiObjectiveQuestion& gold = *it->second;
    const mempo::TrajectoryReward reward = mempo::trajectory_reward(traj, gold, vocab);
    traj_csv << traj_id << ',' << fmt(reward.value) << ',' << (reward.format_ok ? 1 : 0) << ','
             << (reward.answer_ok ? 1 : 0) << "\n";
    const auto gold_tokens = mempo::gold_answer_tokens(gold, vocab);
    for (const auto& step : traj.steps) {
      if (step.find(mempo::SegmentKind::Mem) == nullptr) continue;
      const mempo::MemoryReward r =
          mempo::memory_reward(params, vocab, traj, step.index, gold_tokens);
      mem_csv << traj_id << ',' << step.index << ',' << fmt(r.p_mem) << ',' << fmt(r.epsilon)
              << ',' << fmt(r.value) << "\n";
    }
    ++traj_id;
  }
  std::cout << "scored " << traj_id << " trajectories into " << out_dir << "\n";
  return 0;
}

int cmd_analyze(const std::string& dataset_path, const std::string& checkpoint_path,
                const std::string& mode_text, const std::string& subset, double train_fraction,
                const std::string& out_dir, int bins, int max_turns, int top_k,
                int max_new_tokens, std::uint64_t seed, int workers) {
  const mempo::Dataset dataset = load_dataset(dataset_path);
  const mempo::Vocabulary vocab = mempo::build_vocabulary(dataset);
  const mempo::PolicyParams params = mempo::load_checkpoint(checkpoint_path, vocab.hash());
  const auto questions = select_subset(dataset, subset, train_fraction);

  mempo::EvalOptions opts;
  opts.mode = parse_mode(mode_text);
  opts.max_turns = max_turns;
  opts.top_k = top_k;
  opts.max_new_tokens = max_new_tokens;
  opts.seed = seed;
  opts.workers = workers;

  std::vector<mempo::Trajectory> trajectories;
  mempo::evaluate(params, questions, dataset.kb, vocab, opts, &trajectories);
  const mempo::ProbabilityReport report =
      mempo::analyze_probabilities(params, vocab, trajectories, questions, bins);

  fs::create_directories(out_dir);
  std::ofstream bins_csv(out_dir + "/bins.csv", std::ios::binary);
  bins_csv << "bin_lo,bin_hi,count,share,mean_f1\n";
  for (const auto& bin : report.bins)
    bins_csv << fmt(bin.lo) << ',' << fmt(bin.hi) << ',' << bin.count << ',' << fmt(bin.share)
             << ',' << fmt(bin.mean_f1) << "\n";
  std::ofstream steps_csv(out_dir + "/steps.csv", std::ios::binary);
  steps_csv << "step,mem_count,mean_p_mem,active_share\n";
  for (const auto& row : report.steps)
    steps_csv << row.step << ',' << row.mem_count << ',' << fmt(row.mean_p_mem) << ','
              << fmt(row.active_share) << "\n";
  std::cout << "analyzed " << report.mem_samples << " memory samples into " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_path) {
  std::ifstream in(run_dir + "/updates.csv");
  if (!in) throw std::runtime_error("no updates.csv in " + run_dir);
  std::string header;
  std::getline(in, header);
  std::vector<std::array<double, 7>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 7> row{};
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 7 && std::getline(ss, cell, ','); ++c) row[static_cast<std::size_t>(c)] = std::stod(cell);
    rows.push_back(row);
  }
  json j;
  j["run_dir"] = run_dir;
  j["updates"] = rows.size();
  if (!rows.empty()) {
    const std::size_t quartile = std::max<std::size_t>(1, rows.size() / 4);
    auto mean_reward = [&rows](std::size_t begin, std::size_t end) {
      double sum = 0.0;
      for (std::size_t i = begin; i < end; ++i) sum += rows[i][5];
      return sum / static_cast<double>(end - begin);
    };
    j["mean_traj_reward_first_quartile"] = mean_reward(0, quartile);
    j["mean_traj_reward_last_quartile"] = mean_reward(rows.size() - quartile, rows.size());
    j["final_kl"] = rows.back()[2];
    double clip = 0.0;
    for (const auto& row : rows) clip += row[3];
    j["mean_clip_fraction"] = clip / static_cast<double>(rows.size());
    j["final_grad_norm"] = rows.back()[4];
  }
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_file(out_path, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-memory policy optimization laboratory"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-objective QA dataset");
  int gen_k = 2, gen_n = 100, gen_kb = 200;
  std::uint64_t gen_seed = 0;
  double gen_two_hop = 0.0;
  std::string gen_out;
  gen->add_option("--k", gen_k, "objectives per question")->capture_default_str();
  gen->add_option("--n", gen_n, "question count")->capture_default_str();
  gen->add_option("--kb-size", gen_kb, "fact count")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
  gen->add_option("--two-hop-frac", gen_two_hop, "fraction of 2-hop objectives")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();

  // bc
  auto* bc = app.add_subcommand("bc", "script demonstrations and behavior-clone a policy");
  std::string bc_dataset, bc_out;
  CommonFlags bc_flags;
  bc->add_option("--dataset", bc_dataset, "dataset.json path")->required();
  bc->add_option("--out-dir", bc_out, "output directory")->required();
  add_common(bc, bc_flags);

  // train
  auto* train = app.add_subcommand("train", "run policy optimization");
  std::string train_dataset, train_init, train_out;
  CommonFlags train_flags;
  train->add_option("--dataset", train_dataset, "dataset.json path")->required();
  train->add_option("--init", train_init, "initial checkpoint (defaults to random init)");
  train->add_option("--out-dir", train_out, "output directory")->required();
  add_common(train, train_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_dataset, eval_ckpt, eval_mode = "truncated", eval_subset = "all";
  std::string eval_out, eval_traj;
  double eval_frac = 0.75;
  int eval_turns = 8, eval_topk = 3, eval_newtok = 48, eval_workers = 1;
  std::uint64_t eval_seed = 0;
  eval->add_option("--dataset", eval_dataset, "dataset.json path")->required();
  eval->add_option("--checkpoint", eval_ckpt, "policy checkpoint")->required();
  eval->add_option("--mode", eval_mode, "truncated|full|window:K")->capture_default_str();
  eval->add_option("--subset", eval_subset, "all|train|heldout")->capture_default_str();
  eval->add_option("--train-fraction", eval_frac, "split fraction for subsets")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "report JSON path (stdout when omitted)");
  eval->add_option("--trajectories", eval_traj, "also write trajectories JSONL here");
  eval->add_option("--max-turns", eval_turns, "episode turn cap")->capture_default_str();
  eval->add_option("--top-k", eval_topk, "search results per call")->capture_default_str();
  eval->add_option("--max-new-tokens", eval_newtok, "per-step generation cap")
      ->capture_default_str();
  eval->add_option("--seed", eval_seed, "episode seed")->capture_default_str();
  eval->add_option("--workers", eval_workers, "evaluation threads")->capture_default_str();

  // score
  auto* score = app.add_subcommand("score", "reward trajectories from a JSONL file");
  std::string score_dataset, score_ckpt, score_traj, score_out;
  score->add_option("--dataset", score_dataset, "dataset.json path")->required();
  score->add_option("--checkpoint", score_ckpt, "policy checkpoint")->required();
  score->add_option("--trajectories", score_traj, "trajectory JSONL path")->required();
  score->add_option("--out-dir", score_out, "output directory")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "conditional-probability analysis CSVs");
  std::string an_dataset, an_ckpt, an_mode = "truncated", an_subset = "all", an_out;
  double an_frac = 0.75;
  int an_bins = 10, an_turns = 8, an_topk = 3, an_newtok = 48, an_workers = 1;
  std::uint64_t an_seed = 0;
  analyze->add_option("--dataset", an_dataset, "dataset.json path")->required();
  analyze->add_option("--checkpoint", an_ckpt, "policy checkpoint")->required();
  analyze->add_option("--mode", an_mode, "truncated|full|window:K")->capture_default_str();
  analyze->add_option("--subset", an_subset, "all|train|heldout")->capture_default_str();
  analyze->add_option("--train-fraction", an_frac, "split fraction")->capture_default_str();
  analyze->add_option("--out-dir", an_out, "output directory")->required();
  analyze->add_option("--bins", an_bins, "histogram bin count")->capture_default_str();
  analyze->add_option("--max-turns", an_turns, "episode turn cap")->capture_default_str();
  analyze->add_option("--top-k", an_topk, "search results per call")->capture_default_str();
  analyze->add_option("--max-new-tokens", an_newtok, "per-step generation cap")
      ->capture_default_str();
  analyze->add_option("--seed", an_seed, "episode seed")->capture_default_str();
  analyze->add_option("--workers", an_workers, "evaluation threads")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "summarize a training run directory");
  std::string rep_dir, rep_out;
  report->add_option("--run-dir", rep_dir, "training output directory")->required();
  report->add_option("--out", rep_out, "summary JSON path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems exit 1, help exits 0
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_k, gen_n, gen_kb, gen_seed, gen_two_hop, gen_out);
    if (bc->parsed()) return cmd_bc(bc_dataset, bc_out, bc_flags);
    if (train->parsed()) return cmd_train(train_dataset, train_init, train_out, train_flags);
    if (eval->parsed())
      return cmd_eval(eval_dataset, eval_ckpt, eval_mode, eval_subset, eval_frac, eval_out,
                      eval_traj, eval_turns, eval_topk, eval_newtok, eval_seed, eval_workers);
    if (score->parsed()) return cmd_score(score_dataset, score_ckpt, score_traj, score_out);
    if (analyze->parsed())
      return cmd_analyze(an_dataset, an_ckpt, an_mode, an_subset, an_frac, an_out, an_bins,
                         an_turns, an_topk, an_newtok, an_seed, an_workers);
    if (report->parsed()) return cmd_report(rep_dir, rep_out);
  } catch (const mempo::NonFiniteGradient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
