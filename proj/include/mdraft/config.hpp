#ifndef MDRAFT_CONFIG_HPP
#define MDRAFT_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mdraft/error.hpp"
#include "mdraft/peer.hpp"
#include "mdraft/rl.hpp"
#include "mdraft/task.hpp"

namespace mdraft {

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

enum class PeerEvalMode { normal, constant };
enum class BackendMode { policy, http };

struct BackendSettings {
  BackendMode mode = BackendMode::policy;
  std::string endpoint;
  std::string model;
  double timeout_sec = 30.0;
  int max_retries = 2;
  bool pass_temperature = true;
  int concurrency = 4;
};

// Flat key-value config. Unknown keys are errors so typos cannot silently
// fall back to defaults.
struct TrainingConfig {
  int num_agents = 3;
  int drafts_per_query = 5;

  std::uint64_t seed = 42;
  int iterations = 150;
  int batch_size = 16;
  int threads = 1;

  std::string suite_path = "data/dev500.jsonl";
  std::string validation_suite_path;  // empty: held-out suite derived from seed
  int task_depth = 3;

  PPOConfig ppo;
  bool selected_only = false;

  double policy_init_scale = 0.01;
  double history_repulsion = 1.0;

  PeerEvalMode eval_mode = PeerEvalMode::normal;
  double noise_sigma = 0.1;

  int rm_hidden_dim = 16;
  double rm_learning_rate = 0.5;
  double rm_init_scale = 0.1;
  int rm_epochs = 4;
  // Iterations whose non-selected drafts take recentered peer scalars as
  // rewards while the reward model calibrates; after that, its predictions.
  int rm_burn_in = 3;

  TaskRewardWeights reward_weights;

  int validation_every = 25;
  int validation_patience = 3;
  double validation_threshold = 0.8;

  BackendSettings backend;
};

using ConfigMap = std::map<std::string, std::string>;

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
// Throws ConfigError with a 1-based line number on malformed or duplicate
// lines.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

// Applies "key=value" override strings (CLI --set) on top of a map.
void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides);

// Validates every key against the schema; unknown keys, unparsable values,
// and out-of-range values all throw ConfigError naming the key.
TrainingConfig config_from_map(const ConfigMap& map);

// Canonical form: every key present, sorted, values round-trip formatted.
ConfigMap config_to_map(const TrainingConfig& cfg);
std::string dump_config(const TrainingConfig& cfg);

// FNV-1a 64-bit digest of the canonical dump, as 16 hex digits.
std::string config_hash(const TrainingConfig& cfg);

}  // namespace mdraft

#endif  // MDRAFT_CONFIG_HPP
