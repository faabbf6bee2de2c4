#ifndef MDRAFT_TRAINER_HPP
#define MDRAFT_TRAINER_HPP

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdraft/config.hpp"
#include "mdraft/peer.hpp"
#include "mdraft/policy.hpp"
#include "mdraft/reward.hpp"
#include "mdraft/rl.hpp"
#include "mdraft/runio.hpp"
#include "mdraft/task.hpp"

namespace mdraft {

struct SuiteNotFound : Error {
  explicit SuiteNotFound(const std::string& what) : Error(what) {}
};

inline constexpr int kPhaseCount = 6;
inline constexpr std::array<const char*, kPhaseCount> kPhaseNames = {
    "generation", "evaluation", "selection", "execution", "policy_update", "reward_update"};

struct IterationMetrics {
  int iteration = 0;
  double mean_task_reward = 0.0;  // realized reward of executed drafts
  double reward_peer = 0.0;       // mean aggregated peer scalar
  double reward_coherence = 0.0;  // mean aggregated coherence criterion
  double reward_diversity = 0.0;  // mean per-agent draft-set diversity
  double reward_combined = 0.0;   // mean training reward over all drafts
  double agreement = 0.0;
  double specialization = 0.0;
  // Wall-clock numbers are kept out of the deterministic outputs.
  std::array<double, kPhaseCount> phase_start_ms{};
  std::array<double, kPhaseCount> phase_ms{};
};

struct ValidationPoint {
  int iteration = 0;
  double mean_reward = 0.0;
};

struct ConvergenceReport {
  std::optional<int> steps_to_threshold;
  double threshold = 0.0;
  double final_mean_reward = 0.0;
};

// Mean over queries of the fraction of agent pairs with equal answers;
// queries with fewer than two answers count as full agreement. Throws
// EmptyInput when there are no queries.
double agreement(std::span<const std::vector<std::string>> answers_by_query);

// Mean pairwise total-variation distance between per-agent strategy
// histograms (normalized internally); 0.0 for a single agent. Throws
// EmptyInput on no histograms or an all-zero histogram, LengthMismatch on
// ragged lengths.
double specialization(std::span<const std::vector<double>> histograms);

// First point at or above the threshold; final reward is the last point's.
ConvergenceReport convergence_steps(std::span<const ValidationPoint> history, double threshold);

struct TrainResult {
  std::vector<IterationMetrics> history;
  std::vector<ValidationPoint> validation;
  ConvergenceReport report;
  bool stopped_early = false;
};

struct EvalSummary {
  double mean_task_reward = 0.0;
  double agreement = 0.0;
  double specialization = 0.0;
  double diversity = 0.0;
  int queries = 0;
};

struct AgentState {
  PolicyParams policy;
  ValueParams critic;
  std::unique_ptr<CombinedUpdater> updater;
};

// Owns a run directory: config copy, manifest, metrics/timings/validation
// CSVs, event JSONL, checkpoints. Wall-clock data goes to timings.csv only,
// so metrics.csv and events.jsonl are byte-stable across thread counts.
class RunWriter {
 public:
  RunWriter(const std::string& dir, const TrainingConfig& cfg);

  void metrics_row(const IterationMetrics& m);
  void timing_rows(const IterationMetrics& m);
  void validation_row(const ValidationPoint& p);
  void event(const nlohmann::json& record);
  void checkpoint(int iteration, std::span<const AgentState> agents,
                  const RewardModelParams& phi);
  void finish(const std::string& status, const ConvergenceReport& report);
  void flush();

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  RunLock lock_;
  CsvWriter metrics_;
  CsvWriter timings_;
  CsvWriter validation_;
  JsonlWriter events_;
  RunManifest manifest_;
};

// Runs the training loop: per iteration, draft generation for every agent,
// cross-agent evaluation, reward prediction and per-agent selection,
// execution of selected drafts, policy updates, and a reward-model update,
// in that order.
class Trainer {
 public:
  // Loads the task suites named by the config (throws SuiteNotFound).
  explicit Trainer(const TrainingConfig& cfg);
  // In-memory suites; validation may be empty when only run_iteration is used.
  Trainer(const TrainingConfig& cfg, std::vector<Query> suite, std::vector<Query> validation);

  IterationMetrics run_iteration(int iteration, std::span<const Query> batch,
                                 RunWriter* io = nullptr);
  TrainResult train(RunWriter* io = nullptr);

  // Measurement pass without updates: generate, evaluate, select, execute.
  EvalSummary evaluate_suite(std::span<const Query> suite, int iteration_tag) const;

  std::vector<Query> next_batch();

  const TrainingConfig& config() const { return cfg_; }
  const FeatureLayout& layout() const { return layout_; }
  std::span<const AgentState> agents() const { return agents_; }
  AgentState& agent(int i) { return agents_.at(static_cast<std::size_t>(i)); }
  const RewardModelParams& reward_model() const { return phi_; }
  RewardModelParams& reward_model() { return phi_; }
  std::span<const Query> suite() const { return suite_; }
  std::span<const Query> validation_suite() const { return validation_; }

 private:
  void init_agents();

  TrainingConfig cfg_;
  FeatureLayout layout_;
  std::vector<AgentState> agents_;
  RewardModelParams phi_;
  std::vector<Query> suite_;
  std::vector<Query> validation_;
  std::vector<int> order_;
  std::size_t order_pos_ = 0;
  std::uint64_t order_epoch_ = 0;
};

}  // namespace mdraft

#endif  // MDRAFT_TRAINER_HPP
