#include "mdraft/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mdraft/text.hpp"

namespace mdraft {
namespace {

std::string trim_copy(const std::string& s) { return std::string(trim(s)); }

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

int parse_int_value(const std::string& key, const std::string& value) {
  auto v = parse_int(value);
  if (!v) bad_key(key, "expected an integer, got '" + value + "'");
  return static_cast<int>(*v);
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) bad_key(key, "expected an unsigned integer, got '" + value + "'");
  return out;
}

double parse_double_value(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) bad_key(key, "expected a number, got '" + value + "'");
  return out;
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_key(key, "expected true or false, got '" + value + "'");
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) bad_key(key, why);
}

// One handler per known key keeps parse and dump in a single table.
struct KeySpec {
  std::function<void(TrainingConfig&, const std::string&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

std::string bool_str(bool b) { return b ? "true" : "false"; }

const std::map<std::string, KeySpec>& schema() {
  static const std::map<std::string, KeySpec> table = {
      {"agents.count",
       {[](TrainingConfig& c, const std::string& v) {
          c.num_agents = parse_int_value("agents.count", v);
          require(c.num_agents >= 1, "agents.count", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.num_agents); }}},
      {"agents.drafts_per_query",
       {[](TrainingConfig& c, const std::string& v) {
          c.drafts_per_query = parse_int_value("agents.drafts_per_query", v);
          require(c.drafts_per_query >= 1, "agents.drafts_per_query", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.drafts_per_query); }}},
      {"backend.concurrency",
       {[](TrainingConfig& c, const std::string& v) {
          c.backend.concurrency = parse_int_value("backend.concurrency", v);
          require(c.backend.concurrency >= 1, "backend.concurrency", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.backend.concurrency); }}},
      {"backend.endpoint",
       {[](TrainingConfig& c, const std::string& v) { c.backend.endpoint = v; },
        [](const TrainingConfig& c) { return c.backend.endpoint; }}},
      {"backend.max_retries",
       {[](TrainingConfig& c, const std::string& v) {
          c.backend.max_retries = parse_int_value("backend.max_retries", v);
          require(c.backend.max_retries >= 0, "backend.max_retries", "must be >= 0");
        },
        [](const TrainingConfig& c) { return std::to_string(c.backend.max_retries); }}},
      {"backend.mode",
       {[](TrainingConfig& c, const std::string& v) {
          if (v == "policy") {
            c.backend.mode = BackendMode::policy;
          } else if (v == "http") {
            c.backend.mode = BackendMode::http;
          } else {
            bad_key("backend.mode", "expected policy or http, got '" + v + "'");
          }
        },
        [](const TrainingConfig& c) {
          return std::string(c.backend.mode == BackendMode::policy ? "policy" : "http");
        }}},
      {"backend.model",
       {[](TrainingConfig& c, const std::string& v) { c.backend.model = v; },
        [](const TrainingConfig& c) { return c.backend.model; }}},
      {"backend.pass_temperature",
       {[](TrainingConfig& c, const std::string& v) {
          c.backend.pass_temperature = parse_bool_value("backend.pass_temperature", v);
        },
        [](const TrainingConfig& c) { return bool_str(c.backend.pass_temperature); }}},
      {"backend.timeout_sec",
       {[](TrainingConfig& c, const std::string& v) {
          c.backend.timeout_sec = parse_double_value("backend.timeout_sec", v);
          require(c.backend.timeout_sec > 0.0, "backend.timeout_sec", "must be > 0");
        },
        [](const TrainingConfig& c) { return format_double(c.backend.timeout_sec); }}},
      {"eval.mode",
       {[](TrainingConfig& c, const std::string& v) {
          if (v == "normal") {
            c.eval_mode = PeerEvalMode::normal;
          } else if (v == "constant") {
            c.eval_mode = PeerEvalMode::constant;
          } else {
            bad_key("eval.mode", "expected normal or constant, got '" + v + "'");
          }
        },
        [](const TrainingConfig& c) {
          return std::string(c.eval_mode == PeerEvalMode::normal ? "normal" : "constant");
        }}},
      {"eval.noise_sigma",
       {[](TrainingConfig& c, const std::string& v) {
          c.noise_sigma = parse_double_value("eval.noise_sigma", v);
          require(c.noise_sigma >= 0.0 && c.noise_sigma <= kMaxNoiseSigma, "eval.noise_sigma",
                  "must be in [0, " + format_double(kMaxNoiseSigma) + "]");
        },
        [](const TrainingConfig& c) { return format_double(c.noise_sigma); }}},
      {"policy.history_repulsion",
       {[](TrainingConfig& c, const std::string& v) {
          c.history_repulsion = parse_double_value("policy.history_repulsion", v);
          require(c.history_repulsion >= 0.0, "policy.history_repulsion", "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.history_repulsion); }}},
      {"policy.init_scale",
       {[](TrainingConfig& c, const std::string& v) {
          c.policy_init_scale = parse_double_value("policy.init_scale", v);
          require(c.policy_init_scale >= 0.0, "policy.init_scale", "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.policy_init_scale); }}},
      {"ppo.clip_epsilon",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.clip_epsilon = parse_double_value("ppo.clip_epsilon", v);
          require(c.ppo.clip_epsilon > 0.0 && c.ppo.clip_epsilon < 1.0, "ppo.clip_epsilon",
                  "must be in (0, 1)");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.clip_epsilon); }}},
      {"ppo.discount",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.discount = parse_double_value("ppo.discount", v);
          require(c.ppo.discount >= 0.0 && c.ppo.discount <= 1.0, "ppo.discount",
                  "must be in [0, 1]");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.discount); }}},
      {"ppo.epochs_per_batch",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.epochs_per_batch = parse_int_value("ppo.epochs_per_batch", v);
          require(c.ppo.epochs_per_batch >= 1, "ppo.epochs_per_batch", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.ppo.epochs_per_batch); }}},
      {"ppo.gae_lambda",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.gae_lambda = parse_double_value("ppo.gae_lambda", v);
          require(c.ppo.gae_lambda >= 0.0 && c.ppo.gae_lambda <= 1.0, "ppo.gae_lambda",
                  "must be in [0, 1]");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.gae_lambda); }}},
      {"ppo.imitation_weight",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.imitation_weight = parse_double_value("ppo.imitation_weight", v);
          require(c.ppo.imitation_weight >= 0.0, "ppo.imitation_weight", "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.imitation_weight); }}},
      {"ppo.learning_rate",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.learning_rate = parse_double_value("ppo.learning_rate", v);
          require(c.ppo.learning_rate > 0.0, "ppo.learning_rate", "must be > 0");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.learning_rate); }}},
      {"ppo.selected_only",
       {[](TrainingConfig& c, const std::string& v) {
          c.selected_only = parse_bool_value("ppo.selected_only", v);
        },
        [](const TrainingConfig& c) { return bool_str(c.selected_only); }}},
      {"ppo.weight_decay",
       {[](TrainingConfig& c, const std::string& v) {
          c.ppo.weight_decay = parse_double_value("ppo.weight_decay", v);
          require(c.ppo.weight_decay >= 0.0, "ppo.weight_decay", "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.ppo.weight_decay); }}},
      {"reward_model.burn_in",
       {[](TrainingConfig& c, const std::string& v) {
          c.rm_burn_in = parse_int_value("reward_model.burn_in", v);
          require(c.rm_burn_in >= 0, "reward_model.burn_in", "must be >= 0");
        },
        [](const TrainingConfig& c) { return std::to_string(c.rm_burn_in); }}},
      {"reward_model.epochs",
       {[](TrainingConfig& c, const std::string& v) {
          c.rm_epochs = parse_int_value("reward_model.epochs", v);
          require(c.rm_epochs >= 1, "reward_model.epochs", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.rm_epochs); }}},
      {"reward_model.hidden_dim",
       {[](TrainingConfig& c, const std::string& v) {
          c.rm_hidden_dim = parse_int_value("reward_model.hidden_dim", v);
          require(c.rm_hidden_dim >= 1, "reward_model.hidden_dim", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.rm_hidden_dim); }}},
      {"reward_model.init_scale",
       {[](TrainingConfig& c, const std::string& v) {
          c.rm_init_scale = parse_double_value("reward_model.init_scale", v);
          require(c.rm_init_scale > 0.0, "reward_model.init_scale", "must be > 0");
        },
        [](const TrainingConfig& c) { return format_double(c.rm_init_scale); }}},
      {"reward_model.learning_rate",
       {[](TrainingConfig& c, const std::string& v) {
          c.rm_learning_rate = parse_double_value("reward_model.learning_rate", v);
          require(c.rm_learning_rate > 0.0, "reward_model.learning_rate", "must be > 0");
        },
        [](const TrainingConfig& c) { return format_double(c.rm_learning_rate); }}},
      {"rewards.answer_weight",
       {[](TrainingConfig& c, const std::string& v) {
          c.reward_weights.answer = parse_double_value("rewards.answer_weight", v);
          require(c.reward_weights.answer >= 0.0, "rewards.answer_weight", "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.reward_weights.answer); }}},
      {"rewards.intermediate_weight",
       {[](TrainingConfig& c, const std::string& v) {
          c.reward_weights.intermediate = parse_double_value("rewards.intermediate_weight", v);
          require(c.reward_weights.intermediate >= 0.0, "rewards.intermediate_weight",
                  "must be >= 0");
        },
        [](const TrainingConfig& c) { return format_double(c.reward_weights.intermediate); }}},
      {"run.batch_size",
       {[](TrainingConfig& c, const std::string& v) {
          c.batch_size = parse_int_value("run.batch_size", v);
          require(c.batch_size >= 1, "run.batch_size", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.batch_size); }}},
      {"run.iterations",
       {[](TrainingConfig& c, const std::string& v) {
          c.iterations = parse_int_value("run.iterations", v);
          require(c.iterations >= 0, "run.iterations", "must be >= 0");
        },
        [](const TrainingConfig& c) { return std::to_string(c.iterations); }}},
      {"run.seed",
       {[](TrainingConfig& c, const std::string& v) { c.seed = parse_u64_value("run.seed", v); },
        [](const TrainingConfig& c) { return std::to_string(c.seed); }}},
      {"run.threads",
       {[](TrainingConfig& c, const std::string& v) {
          c.threads = parse_int_value("run.threads", v);
          require(c.threads >= 1, "run.threads", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.threads); }}},
      {"tasks.depth",
       {[](TrainingConfig& c, const std::string& v) {
          c.task_depth = parse_int_value("tasks.depth", v);
          require(c.task_depth >= kMinDepth && c.task_depth <= kMaxDepth, "tasks.depth",
                  "must be in [" + std::to_string(kMinDepth) + ", " + std::to_string(kMaxDepth) +
                      "]");
        },
        [](const TrainingConfig& c) { return std::to_string(c.task_depth); }}},
      {"tasks.suite",
       {[](TrainingConfig& c, const std::string& v) { c.suite_path = v; },
        [](const TrainingConfig& c) { return c.suite_path; }}},
      {"tasks.validation_suite",
       {[](TrainingConfig& c, const std::string& v) { c.validation_suite_path = v; },
        [](const TrainingConfig& c) { return c.validation_suite_path; }}},
      {"validation.every",
       {[](TrainingConfig& c, const std::string& v) {
          c.validation_every = parse_int_value("validation.every", v);
          require(c.validation_every >= 1, "validation.every", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.validation_every); }}},
      {"validation.patience",
       {[](TrainingConfig& c, const std::string& v) {
          c.validation_patience = parse_int_value("validation.patience", v);
          require(c.validation_patience >= 1, "validation.patience", "must be >= 1");
        },
        [](const TrainingConfig& c) { return std::to_string(c.validation_patience); }}},
      {"validation.threshold",
       {[](TrainingConfig& c, const std::string& v) {
          c.validation_threshold = parse_double_value("validation.threshold", v);
          require(c.validation_threshold >= 0.0 && c.validation_threshold <= 1.0,
                  "validation.threshold", "must be in [0, 1]");
        },
        [](const TrainingConfig& c) { return format_double(c.validation_threshold); }}},
  };
  return table;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::string stripped = trim_copy(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        stripped + "'");
    }
    std::string key = trim_copy(stripped.substr(0, eq));
    std::string value = trim_copy(stripped.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!map.emplace(key, value).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must look like key=value, got '" + item + "'");
    }
    std::string key = trim_copy(item.substr(0, eq));
    std::string value = trim_copy(item.substr(eq + 1));
    if (key.empty()) throw ConfigError("override with empty key: '" + item + "'");
    map[key] = value;
  }
}

TrainingConfig config_from_map(const ConfigMap& map) {
  TrainingConfig cfg;
  const auto& table = schema();
  for (const auto& [key, value] : map) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
  }
  // Keeps every reward component inside [0, 1].
  if (cfg.reward_weights.answer + cfg.reward_weights.intermediate > 1.0 + 1e-12) {
    throw ConfigError(
        "rewards.answer_weight + rewards.intermediate_weight must not exceed 1");
  }
  return cfg;
}

ConfigMap config_to_map(const TrainingConfig& cfg) {
  ConfigMap map;
  for (const auto& [key, spec] : schema()) map.emplace(key, spec.get(cfg));
  return map;
}

std::string dump_config(const TrainingConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : config_to_map(cfg)) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::string config_hash(const TrainingConfig& cfg) {
  const std::string dump = dump_config(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace mdraft
