#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdraft/config.hpp"
#include "mdraft/draft.hpp"
#include "mdraft/log.hpp"
#include "mdraft/runio.hpp"
#include "mdraft/task.hpp"
#include "mdraft/text.hpp"
#include "mdraft/trainer.hpp"
#include "mdraft/version.hpp"

namespace {

using namespace mdraft;

// Exit codes: 0 success, 1 validation findings, 2 usage/config, 3 runtime.
constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

TrainingConfig load_effective_config(const std::string& config_path,
                                     const std::vector<std::string>& overrides) {
  ConfigMap map = config_path.empty() ? ConfigMap{} : load_config_file(config_path);
  apply_overrides(map, overrides);
  return config_from_map(map);
}

int cmd_gen_suite(const std::string& out, int count, int depth, std::uint64_t seed) {
  if (count < 1) throw ConfigError("--count must be >= 1");
  if (depth < kMinDepth || depth > kMaxDepth) {
    throw ConfigError("--depth must be in [" + std::to_string(kMinDepth) + ", " +
                      std::to_string(kMaxDepth) + "]");
  }
  const std::vector<Query> suite = make_suite(seed, count, depth);
  save_suite(suite, out);
  std::cout << "wrote " << suite.size() << " tasks to " << out << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::string run_dir) {
  const TrainingConfig cfg = load_effective_config(config_path, overrides);
  if (run_dir.empty()) run_dir = "runs/run-" + config_hash(cfg);

  Trainer trainer(cfg);
  RunWriter writer(run_dir, cfg);
  TrainResult result;
  try {
    result = trainer.train(&writer);
  } catch (...) {
    writer.finish("failed", ConvergenceReport{std::nullopt, cfg.validation_threshold, 0.0});
    throw;
  }
  writer.finish(result.stopped_early ? "stopped_early" : "completed", result.report);

  std::cout << "run directory: " << run_dir << '\n';
  std::cout << "iterations run: " << result.history.size() << '\n';
  std::cout << "final mean reward: " << format_double(result.report.final_mean_reward) << '\n';
  if (result.report.steps_to_threshold) {
    std::cout << "reached threshold " << format_double(result.report.threshold)
              << " at iteration " << *result.report.steps_to_threshold << '\n';
  } else {
    std::cout << "threshold " << format_double(result.report.threshold) << " not reached\n";
  }
  return kExitOk;
}

int cmd_validate(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open draft file: " + path);

  // Drafts are separated by their closing "#### <answer>" lines.
  struct Chunk {
    int start_line;
    std::string text;
  };
  std::vector<Chunk> chunks;
  std::string line;
  std::string current;
  int line_no = 0;
  int current_start = 1;
  bool current_has_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    current += line;
    current += '\n';
    const std::string_view stripped = trim(line);
    if (!stripped.empty()) current_has_content = true;
    if (stripped.rfind("####", 0) == 0) {
      chunks.push_back({current_start, current});
      current.clear();
      current_has_content = false;
      current_start = line_no + 1;
    }
  }
  if (current_has_content) chunks.push_back({current_start, current});
  if (chunks.empty()) {
    std::cerr << "error: " << path << ": empty draft file\n";
    return kExitConfig;
  }

  bool all_valid = true;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    ParsedDraft parsed;
    try {
      parsed = parse_draft(chunks[i].text);
    } catch (const ParseError& e) {
      const int global_line = e.line > 0 ? chunks[i].start_line + e.line - 1 : chunks[i].start_line;
      std::cerr << "error: " << path << ":" << global_line << ": " << e.what() << '\n';
      return kExitConfig;
    }
    const ValidationReport report = validate_draft(parsed);
    if (report.valid) {
      std::cout << "draft " << i + 1 << ": ok (" << parsed.steps.size() << " steps)\n";
    } else {
      all_valid = false;
      std::cout << "draft " << i + 1 << ": invalid\n";
      for (const auto& v : report.violations) {
        if (v.step_index < 0) {
          std::cout << "  answer: " << violation_name(v.code) << '\n';
        } else {
          std::cout << "  step " << v.step_index + 1 << ": " << violation_name(v.code);
          if (v.code == Violation::too_many_words) {
            std::cout << " (" << parsed.steps[static_cast<std::size_t>(v.step_index)].word_count
                      << " words, limit " << kMaxStepWords << ")";
          }
          std::cout << '\n';
        }
      }
    }
  }
  return all_valid ? kExitOk : kExitInvalid;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("run incomplete: missing " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.empty() || line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_export(const std::string& run_dir, const std::string& kind) {
  if (kind == "learning_curve") {
    const auto metrics = read_csv(run_dir + "/metrics.csv");
    const auto validation = read_csv(run_dir + "/validation.csv");
    std::map<std::string, std::string> val_by_iter;
    for (std::size_t i = 1; i < validation.size(); ++i) {
      val_by_iter[validation[i][0]] = validation[i][1];
    }
    std::cout << "iteration,train_reward,validation_reward\n";
    for (std::size_t i = 1; i < metrics.size(); ++i) {
      const auto& row = metrics[i];
      auto it = val_by_iter.find(row[0]);
      std::cout << row[0] << ',' << row[1] << ','
                << (it == val_by_iter.end() ? "" : it->second) << '\n';
    }
    return kExitOk;
  }
  if (kind == "reward_components") {
    const auto metrics = read_csv(run_dir + "/metrics.csv");
    std::cout << "stage,task,peer,coherence,diversity,combined\n";
    for (std::size_t i = 1; i < metrics.size(); ++i) {
      const auto& row = metrics[i];
      std::cout << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3] << ',' << row[4]
                << ',' << row[5] << '\n';
    }
    return kExitOk;
  }
  if (kind == "ablation_summary") {
    const TrainingConfig cfg = config_from_map(load_config_file(run_dir + "/config.cfg"));
    std::ifstream rin(run_dir + "/report.json", std::ios::binary);
    if (!rin) throw ConfigError("run incomplete: missing " + run_dir + "/report.json");
    nlohmann::json report;
    rin >> report;
    std::string variant = "full";
    if (cfg.drafts_per_query == 1) {
      variant = "no_drafts";
    } else if (cfg.eval_mode == PeerEvalMode::constant) {
      variant = "no_peer_eval";
    }
    std::cout << "variant,final_mean_reward,steps_to_threshold,threshold,status\n";
    std::cout << variant << ',' << format_double(report.at("final_mean_reward").get<double>())
              << ',';
    if (!report.at("steps_to_threshold").is_null()) {
      std::cout << report.at("steps_to_threshold").get<int>();
    }
    std::cout << ',' << format_double(report.at("threshold").get<double>()) << ','
              << report.at("status").get<std::string>() << '\n';
    return kExitOk;
  }
  throw ConfigError("unknown export kind: " + kind);
}

int cmd_eval(const std::string& run_dir, std::optional<int> iter_opt,
             const std::string& suite_path, const std::vector<std::string>& overrides) {
  ConfigMap map = load_config_file(run_dir + "/config.cfg");
  apply_overrides(map, overrides);
  const TrainingConfig cfg = config_from_map(map);

  int iter = 0;
  const std::string ckpt_root = run_dir + "/checkpoints";
  if (iter_opt) {
    iter = *iter_opt;
  } else {
    if (!std::filesystem::is_directory(ckpt_root)) {
      throw ConfigError("run has no checkpoints: " + ckpt_root);
    }
    for (const auto& entry : std::filesystem::directory_iterator(ckpt_root)) {
      const auto v = parse_int(entry.path().filename().string());
      if (v) iter = std::max(iter, static_cast<int>(*v));
    }
    if (iter == 0) throw ConfigError("run has no checkpoints: " + ckpt_root);
  }
  const std::string base = ckpt_root + "/" + std::to_string(iter);

  Trainer trainer(cfg);
  for (int a = 0; a < cfg.num_agents; ++a) {
    load_policy_checkpoint(base + "/agent_" + std::to_string(a) + ".ckpt",
                           trainer.agent(a).policy, trainer.agent(a).critic);
  }
  trainer.reward_model() = load_reward_checkpoint(base + "/reward_model.ckpt");

  std::vector<Query> suite;
  if (!suite_path.empty()) {
    suite = load_suite(suite_path);
  } else {
    suite.assign(trainer.validation_suite().begin(), trainer.validation_suite().end());
  }
  const EvalSummary s = trainer.evaluate_suite(suite, 0);
  std::cout << "queries,mean_task_reward,agreement,specialization,diversity\n";
  std::cout << s.queries << ',' << format_double(s.mean_task_reward) << ','
            << format_double(s.agreement) << ',' << format_double(s.specialization) << ','
            << format_double(s.diversity) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-agent multi-draft reasoning trainer"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-suite", "Generate a synthetic task suite (JSONL)");
  std::string gen_out;
  int gen_count = 500;
  int gen_depth = 3;
  std::uint64_t gen_seed = 42;
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--count", gen_count, "Number of tasks");
  gen->add_option("--depth", gen_depth, "Operations per task chain");
  gen->add_option("--seed", gen_seed, "Suite seed");

  auto* train = app.add_subcommand("train", "Train agents on a task suite");
  std::string train_config;
  std::vector<std::string> train_sets;
  std::string train_run_dir;
  train->add_option("--config", train_config, "Config file (key = value lines)");
  train->add_option("--set", train_sets, "Override a config key, e.g. --set run.seed=7");
  train->add_option("--run-dir", train_run_dir,
                    "Run output directory (default runs/run-<config hash>)");

  auto* validate = app.add_subcommand("validate", "Check a draft text file for violations");
  std::string validate_path;
  validate->add_option("file", validate_path, "Draft text file")->required();

  auto* exp = app.add_subcommand("export", "Emit CSV views of a finished run");
  std::string export_run;
  std::string export_kind;
  exp->add_option("--run", export_run, "Run directory")->required();
  exp->add_option("--kind", export_kind,
                  "learning_curve:  iteration,train_reward,validation_reward\n"
                  "reward_components: stage,task,peer,coherence,diversity,combined\n"
                  "ablation_summary: variant,final_mean_reward,steps_to_threshold,...")
      ->required()
      ->check(CLI::IsMember({"learning_curve", "reward_components", "ablation_summary"}));

  auto* eval = app.add_subcommand("eval", "Run a checkpoint on a suite without learning");
  std::string eval_run;
  int eval_iter = -1;
  std::string eval_suite;
  std::vector<std::string> eval_sets;
  eval->add_option("--run", eval_run, "Run directory with checkpoints")->required();
  eval->add_option("--iter", eval_iter, "Checkpoint iteration (default: latest)");
  eval->add_option("--suite", eval_suite, "Task suite (default: the run's validation suite)");
  eval->add_option("--set", eval_sets, "Override a config key for evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_suite(gen_out, gen_count, gen_depth, gen_seed);
    if (train->parsed()) return cmd_train(train_config, train_sets, train_run_dir);
    if (validate->parsed()) return cmd_validate(validate_path);
    if (exp->parsed()) return cmd_export(export_run, export_kind);
    if (eval->parsed()) {
      return cmd_eval(eval_run, eval_iter >= 0 ? std::optional<int>(eval_iter) : std::nullopt,
                      eval_suite, eval_sets);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SuiteNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
