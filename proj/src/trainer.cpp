#include "mdraft/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include "mdraft/backend.hpp"
#include "mdraft/log.hpp"
#include "mdraft/rng.hpp"
#include "mdraft/text.hpp"
#include "mdraft/version.hpp"

namespace mdraft {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start, Clock::time_point now) {
  return std::chrono::duration<double, std::milli>(now - start).count();
}

// Work-stealing loop over [0, n). Items write only their own slots, so any
// schedule is equivalent to the serial order. The first exception wins and
// is rethrown after all workers drain.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::min(threads, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

[[noreturn]] void rethrow_with_context(const std::string& phase, std::int64_t query_id, int agent,
                                       const std::exception& e) {
  throw Error(phase + " failed at query " + std::to_string(query_id) + ", agent " +
              std::to_string(agent) + ": " + e.what());
}

struct DraftSlot {
  SampleResult sample;
  int policy_version = 0;
  std::vector<PeerEvaluation> evals;
  AggregatedEval agg;
  RewardFeatures features;
  double predicted = 0.0;
};

struct AgentQueryCell {
  std::vector<DraftSlot> slots;   // K entries
  std::vector<Draft> drafts;      // the K drafts, generation order
  int selected = 0;
  TaskReward executed;
};

struct Pipeline {
  std::vector<std::vector<AgentQueryCell>> grid;  // [query][agent]
  std::vector<RewardPrediction> global_winner;    // per query, logging only
  std::array<double, 4> phase_start_ms{};
  std::array<double, 4> phase_ms{};
};

AggregatedEval neutral_eval(const DraftRef& ref) {
  AggregatedEval agg;
  agg.draft_ref = ref;
  agg.criteria_mean.fill(0.5);
  agg.scalar_mean = 0.5;
  agg.count = 0;
  return agg;
}

PeerEvaluation constant_eval(int evaluator_id, const DraftRef& ref) {
  PeerEvaluation ev;
  ev.evaluator_id = evaluator_id;
  ev.draft_ref = ref;
  ev.criteria.fill(0.5);
  ev.scalar = 0.5;
  ev.feedback = "constant scores";
  return ev;
}

// Generation through execution, shared by training iterations and
// measurement passes. The stream tags keep their randomness disjoint.
Pipeline run_pipeline(const TrainingConfig& cfg, std::span<const AgentState> agents,
                      const RewardModelParams& phi, std::span<const Query> batch, int iteration,
                      StreamTag gen_tag, StreamTag eval_tag, Clock::time_point run_start) {
  const int num_queries = static_cast<int>(batch.size());
  const int num_agents = cfg.num_agents;
  const int drafts = cfg.drafts_per_query;
  const auto iter_u = static_cast<std::uint64_t>(iteration);

  Pipeline p;
  p.grid.resize(static_cast<std::size_t>(num_queries));
  for (auto& row : p.grid) row.resize(static_cast<std::size_t>(num_agents));

  const int items = num_queries * num_agents;
  auto cell_of = [&](int item) -> AgentQueryCell& {
    return p.grid[static_cast<std::size_t>(item / num_agents)]
                 [static_cast<std::size_t>(item % num_agents)];
  };

  // Generation: drafts within one (query, agent) cell are sequential because
  // each conditions on its predecessors; cells are independent.
  const bool http = cfg.backend.mode == BackendMode::http;
  const int gen_threads = http ? std::min(cfg.threads, cfg.backend.concurrency) : cfg.threads;
  const auto gen_start = Clock::now();
  parallel_for(items, gen_threads, [&](int item) {
    const int qi = item / num_agents;
    const int a = item % num_agents;
    const Query& query = batch[static_cast<std::size_t>(qi)];
    AgentQueryCell& cell = cell_of(item);
    cell.slots.resize(static_cast<std::size_t>(drafts));
    std::vector<Draft> history;
    history.reserve(static_cast<std::size_t>(drafts));
    try {
      for (int k = 0; k < drafts; ++k) {
        const StrategyHint hint = make_hint(k, drafts);
        const double temp = temperature_schedule(k, drafts);
        DraftSlot& slot = cell.slots[static_cast<std::size_t>(k)];
        const auto& agent = agents[static_cast<std::size_t>(a)];
        if (http) {
          slot.sample.draft = llm_generate(cfg.backend, agent.policy.agent_id, query, history,
                                           hint, temp);
          slot.sample.traj.ref = ref_of(query.id, slot.sample.draft);
        } else {
          const std::uint64_t seed =
              derive_seed(cfg.seed, gen_tag,
                          {iter_u, static_cast<std::uint64_t>(query.id),
                           static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(k)});
          slot.sample = sample_draft(agent.policy, query, history, hint, temp, seed);
          for (auto& st : slot.sample.traj.steps) {
            st.value_estimate = value_estimate(agent.critic, st.features);
          }
        }
        slot.policy_version = agent.policy.version;
        history.push_back(slot.sample.draft);
      }
    } catch (const std::exception& e) {
      rethrow_with_context("generation", query.id, a, e);
    }
    cell.drafts = std::move(history);
  });
  const auto gen_end = Clock::now();

  // Peer evaluation: every other agent scores every draft.
  parallel_for(items, cfg.threads, [&](int item) {
    const int qi = item / num_agents;
    const int author = item % num_agents;
    const Query& query = batch[static_cast<std::size_t>(qi)];
    AgentQueryCell& cell = cell_of(item);
    try {
      for (int k = 0; k < drafts; ++k) {
        DraftSlot& slot = cell.slots[static_cast<std::size_t>(k)];
        const DraftRef ref = ref_of(query.id, slot.sample.draft);
        for (int e = 0; e < num_agents; ++e) {
          if (e == author) continue;
          if (cfg.eval_mode == PeerEvalMode::constant) {
            slot.evals.push_back(constant_eval(e, ref));
          } else {
            EvaluatorProfile profile;
            profile.agent_id = e;
            profile.noise_sigma = cfg.noise_sigma;
            profile.seed = derive_seed(cfg.seed, eval_tag, {iter_u, static_cast<std::uint64_t>(e)});
            slot.evals.push_back(evaluate(profile, slot.sample.draft, query));
          }
        }
        slot.agg = slot.evals.empty() ? neutral_eval(ref) : aggregate(slot.evals);
      }
    } catch (const std::exception& e) {
      rethrow_with_context("evaluation", query.id, author, e);
    }
  });
  const auto eval_end = Clock::now();

  // Reward prediction and selection. Serial: cheap and order-sensitive.
  p.global_winner.reserve(static_cast<std::size_t>(num_queries));
  for (int qi = 0; qi < num_queries; ++qi) {
    std::vector<RewardPrediction> all;
    all.reserve(static_cast<std::size_t>(num_agents * drafts));
    for (int a = 0; a < num_agents; ++a) {
      AgentQueryCell& cell = p.grid[static_cast<std::size_t>(qi)][static_cast<std::size_t>(a)];
      std::vector<RewardPrediction> own;
      own.reserve(static_cast<std::size_t>(drafts));
      for (int k = 0; k < drafts; ++k) {
        DraftSlot& slot = cell.slots[static_cast<std::size_t>(k)];
        slot.features = featurize(slot.sample.draft, slot.agg, cell.drafts, drafts);
        slot.predicted = predict(phi, slot.features.x);
        own.push_back({slot.features.ref, slot.predicted});
      }
      const RewardPrediction& best = select(own);
      cell.selected = static_cast<int>(&best - own.data());
      all.insert(all.end(), own.begin(), own.end());
    }
    p.global_winner.push_back(select(all));
  }
  const auto sel_end = Clock::now();

  // Execution of each agent's selected draft against the task.
  for (int qi = 0; qi < num_queries; ++qi) {
    const Query& query = batch[static_cast<std::size_t>(qi)];
    for (int a = 0; a < num_agents; ++a) {
      AgentQueryCell& cell = p.grid[static_cast<std::size_t>(qi)][static_cast<std::size_t>(a)];
      cell.executed = task_reward(cell.drafts[static_cast<std::size_t>(cell.selected)], query,
                                  cfg.reward_weights);
    }
  }
  const auto exec_end = Clock::now();

  p.phase_start_ms = {ms_since(run_start, gen_start), ms_since(run_start, gen_end),
                      ms_since(run_start, eval_end), ms_since(run_start, sel_end)};
  p.phase_ms = {ms_since(gen_start, gen_end), ms_since(gen_end, eval_end),
                ms_since(eval_end, sel_end), ms_since(sel_end, exec_end)};
  return p;
}

std::vector<std::vector<std::string>> selected_answers(const Pipeline& p) {
  std::vector<std::vector<std::string>> answers;
  answers.reserve(p.grid.size());
  for (const auto& row : p.grid) {
    std::vector<std::string> per_agent;
    per_agent.reserve(row.size());
    for (const auto& cell : row) {
      per_agent.push_back(cell.drafts[static_cast<std::size_t>(cell.selected)].answer);
    }
    answers.push_back(std::move(per_agent));
  }
  return answers;
}

std::vector<std::vector<double>> strategy_histograms(const Pipeline& p, int num_agents,
                                                     int drafts) {
  std::vector<std::vector<double>> hist(static_cast<std::size_t>(num_agents),
                                        std::vector<double>(static_cast<std::size_t>(drafts), 0.0));
  for (const auto& row : p.grid) {
    for (std::size_t a = 0; a < row.size(); ++a) {
      const auto& cell = row[a];
      const int strat = cell.drafts[static_cast<std::size_t>(cell.selected)].meta.strategy_id;
      hist[a][static_cast<std::size_t>(strat)] += 1.0;
    }
  }
  return hist;
}

}  // namespace

double agreement(std::span<const std::vector<std::string>> answers_by_query) {
  if (answers_by_query.empty()) throw EmptyInput("agreement over no queries");
  double total = 0.0;
  for (const auto& answers : answers_by_query) {
    const std::size_t n = answers.size();
    if (n < 2) {
      total += 1.0;
      continue;
    }
    int pairs = 0;
    int matches = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        ++pairs;
        if (answers[i] == answers[j]) ++matches;
      }
    }
    total += static_cast<double>(matches) / static_cast<double>(pairs);
  }
  return total / static_cast<double>(answers_by_query.size());
}

double specialization(std::span<const std::vector<double>> histograms) {
  if (histograms.empty()) throw EmptyInput("specialization over no histograms");
  const std::size_t bins = histograms.front().size();
  std::vector<std::vector<double>> norm;
  norm.reserve(histograms.size());
  for (const auto& h : histograms) {
    if (h.size() != bins) throw LengthMismatch("histograms differ in length");
    const double sum = std::accumulate(h.begin(), h.end(), 0.0);
    if (sum <= 0.0) throw EmptyInput("histogram with no mass");
    std::vector<double> n(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) n[i] = h[i] / sum;
    norm.push_back(std::move(n));
  }
  if (norm.size() < 2) return 0.0;
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < norm.size(); ++i) {
    for (std::size_t j = i + 1; j < norm.size(); ++j) {
      double tv = 0.0;
      for (std::size_t b = 0; b < bins; ++b) tv += std::abs(norm[i][b] - norm[j][b]);
      total += 0.5 * tv;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

ConvergenceReport convergence_steps(std::span<const ValidationPoint> history, double threshold) {
  ConvergenceReport report;
  report.threshold = threshold;
  for (const auto& p : history) {
    if (!report.steps_to_threshold && p.mean_reward >= threshold) {
      report.steps_to_threshold = p.iteration;
    }
  }
  if (!history.empty()) report.final_mean_reward = history.back().mean_reward;
  return report;
}

RunWriter::RunWriter(const std::string& dir, const TrainingConfig& cfg)
    : dir_(dir),
      lock_(dir),
      metrics_(dir + "/metrics.csv", {"iteration", "task", "peer", "coherence", "diversity",
                                      "combined", "agreement", "specialization"}),
      timings_(dir + "/timings.csv", {"iteration", "phase", "start_ms", "duration_ms"}),
      validation_(dir + "/validation.csv", {"iteration", "reward"}),
      events_(dir + "/events.jsonl") {
  std::ofstream cfg_out(dir + "/config.cfg", std::ios::binary | std::ios::trunc);
  if (!cfg_out) throw IoError("cannot write config copy in " + dir);
  cfg_out << dump_config(cfg);
  manifest_.config_hash = config_hash(cfg);
  manifest_.code_version = kVersion;
  manifest_.seed = cfg.seed;
  manifest_.started_at = iso8601_utc_now();
  manifest_.status = "running";
  manifest_.artifacts = {"config.cfg", "metrics.csv", "timings.csv", "validation.csv",
                         "events.jsonl"};
  save_manifest(dir_ + "/manifest.json", manifest_);
}

void RunWriter::metrics_row(const IterationMetrics& m) {
  metrics_.write_row({std::to_string(m.iteration), format_double(m.mean_task_reward),
                      format_double(m.reward_peer), format_double(m.reward_coherence),
                      format_double(m.reward_diversity), format_double(m.reward_combined),
                      format_double(m.agreement), format_double(m.specialization)});
}

void RunWriter::timing_rows(const IterationMetrics& m) {
  for (int p = 0; p < kPhaseCount; ++p) {
    timings_.write_row({std::to_string(m.iteration), kPhaseNames[static_cast<std::size_t>(p)],
                        format_double(m.phase_start_ms[static_cast<std::size_t>(p)]),
                        format_double(m.phase_ms[static_cast<std::size_t>(p)])});
  }
}

void RunWriter::validation_row(const ValidationPoint& p) {
  validation_.write_row({std::to_string(p.iteration), format_double(p.mean_reward)});
}

void RunWriter::event(const nlohmann::json& record) { events_.write(record); }

void RunWriter::checkpoint(int iteration, std::span<const AgentState> agents,
                           const RewardModelParams& phi) {
  const std::string base = dir_ + "/checkpoints/" + std::to_string(iteration);
  std::filesystem::create_directories(base);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    save_policy_checkpoint(base + "/agent_" + std::to_string(i) + ".ckpt", agents[i].policy,
                           agents[i].critic);
  }
  save_reward_checkpoint(base + "/reward_model.ckpt", phi);
}

void RunWriter::finish(const std::string& status, const ConvergenceReport& report) {
  nlohmann::json j;
  j["final_mean_reward"] = report.final_mean_reward;
  if (report.steps_to_threshold) {
    j["steps_to_threshold"] = *report.steps_to_threshold;
  } else {
    j["steps_to_threshold"] = nullptr;
  }
  j["status"] = status;
  j["threshold"] = report.threshold;
  std::ofstream out(dir_ + "/report.json", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report in " + dir_);
  out << j.dump(2) << '\n';
  manifest_.finished_at = iso8601_utc_now();
  manifest_.status = status;
  manifest_.artifacts.push_back("report.json");
  save_manifest(dir_ + "/manifest.json", manifest_);
  flush();
}

void RunWriter::flush() {
  metrics_.flush();
  timings_.flush();
  validation_.flush();
  events_.flush();
}

Trainer::Trainer(const TrainingConfig& cfg) : cfg_(cfg), layout_{cfg.drafts_per_query} {
  if (cfg_.suite_path.empty()) throw SuiteNotFound("no task suite configured");
  if (!std::filesystem::exists(cfg_.suite_path)) {
    throw SuiteNotFound("task suite not found: " + cfg_.suite_path);
  }
  suite_ = load_suite(cfg_.suite_path);
  if (cfg_.validation_suite_path.empty()) {
    validation_ = make_suite(derive_seed(cfg_.seed, StreamTag::validation), 100, cfg_.task_depth);
  } else {
    if (!std::filesystem::exists(cfg_.validation_suite_path)) {
      throw SuiteNotFound("validation suite not found: " + cfg_.validation_suite_path);
    }
    validation_ = load_suite(cfg_.validation_suite_path);
  }
  init_agents();
}

Trainer::Trainer(const TrainingConfig& cfg, std::vector<Query> suite,
                 std::vector<Query> validation)
    : cfg_(cfg),
      layout_{cfg.drafts_per_query},
      suite_(std::move(suite)),
      validation_(std::move(validation)) {
  init_agents();
}

void Trainer::init_agents() {
  agents_.clear();
  agents_.reserve(static_cast<std::size_t>(cfg_.num_agents));
  for (int i = 0; i < cfg_.num_agents; ++i) {
    AgentState agent;
    agent.policy =
        PolicyParams::initial(i, layout_, derive_seed(cfg_.seed, StreamTag::init,
                                                      {static_cast<std::uint64_t>(i)}),
                              cfg_.policy_init_scale, cfg_.history_repulsion);
    agent.critic = ValueParams::zeros(i, layout_.dim());
    agent.updater = std::make_unique<CombinedUpdater>(layout_, cfg_.ppo);
    agents_.push_back(std::move(agent));
  }
  phi_ = initial_reward_model(cfg_.drafts_per_query, cfg_.rm_hidden_dim,
                              derive_seed(cfg_.seed, StreamTag::reward_model),
                              cfg_.rm_init_scale);
}

std::vector<Query> Trainer::next_batch() {
  if (suite_.empty()) throw SuiteNotFound("task suite is empty");
  std::vector<Query> batch;
  batch.reserve(static_cast<std::size_t>(cfg_.batch_size));
  while (batch.size() < static_cast<std::size_t>(cfg_.batch_size)) {
    if (order_pos_ >= order_.size()) {
      order_.resize(suite_.size());
      std::iota(order_.begin(), order_.end(), 0);
      Rng rng(derive_seed(cfg_.seed, StreamTag::batch_order, {order_epoch_++}));
      for (std::size_t i = order_.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order_[i - 1], order_[j]);
      }
      order_pos_ = 0;
    }
    batch.push_back(suite_[static_cast<std::size_t>(order_[order_pos_++])]);
  }
  return batch;
}

IterationMetrics Trainer::run_iteration(int iteration, std::span<const Query> batch,
                                        RunWriter* io) {
  if (batch.empty()) throw EmptyInput("empty query batch");
  const auto run_start = Clock::now();
  const int num_agents = cfg_.num_agents;
  const int drafts = cfg_.drafts_per_query;
  const bool updates_enabled = cfg_.backend.mode == BackendMode::policy;

  Pipeline p = run_pipeline(cfg_, agents_, phi_, batch, iteration, StreamTag::generation,
                            StreamTag::evaluation, run_start);

  // Policy updates: one combined PPO + imitation + critic step per agent over
  // all of its drafts. Selected drafts carry the realized reward; the rest
  // take the reward model's prediction, except during the burn-in iterations
  // where the model is still calibrating to the realized scale and the peer
  // scalar (recentered onto the executed mean so neither stratum is favored)
  // is the better-informed signal.
  const bool burn_in = iteration <= cfg_.rm_burn_in;
  double exec_mean = 0.0;
  double scalar_mean = 0.0;
  for (std::size_t qi = 0; qi < batch.size(); ++qi) {
    for (int a = 0; a < num_agents; ++a) {
      const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
      exec_mean += cell.executed.value;
      for (int k = 0; k < drafts; ++k)
        scalar_mean += cell.slots[static_cast<std::size_t>(k)].agg.scalar_mean;
    }
  }
  exec_mean /= static_cast<double>(batch.size()) * num_agents;
  scalar_mean /= static_cast<double>(batch.size()) * num_agents * drafts;
  const auto draft_reward = [&](const AgentQueryCell& cell, const DraftSlot& slot,
                                bool selected) {
    if (selected) return cell.executed.value;
    if (!burn_in) return slot.predicted;
    return std::clamp(slot.agg.scalar_mean - scalar_mean + exec_mean, 0.0, 1.0);
  };

  const auto update_start = Clock::now();
  std::vector<LossReport> reports;
  if (updates_enabled) {
    reports.reserve(static_cast<std::size_t>(num_agents));
    for (int a = 0; a < num_agents; ++a) {
      std::vector<DraftSample> dbatch;
      dbatch.reserve(batch.size() * static_cast<std::size_t>(drafts));
      for (std::size_t qi = 0; qi < batch.size(); ++qi) {
        AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        for (int k = 0; k < drafts; ++k) {
          const bool selected = k == cell.selected;
          if (cfg_.selected_only && !selected) continue;
          DraftSlot& slot = cell.slots[static_cast<std::size_t>(k)];
          DraftSample ds;
          ds.traj = slot.sample.traj;
          ds.temperature = slot.sample.draft.meta.temperature;
          ds.policy_version = slot.policy_version;
          ds.selected = selected;
          for (auto& st : ds.traj.steps) st.reward = 0.0;
          ds.traj.steps.back().reward = draft_reward(cell, slot, selected);
          attach_advantages(ds, cfg_.ppo.discount, cfg_.ppo.gae_lambda);
          dbatch.push_back(std::move(ds));
        }
      }
      auto& agent = agents_[static_cast<std::size_t>(a)];
      reports.push_back(agent.updater->update(agent.policy, agent.critic, dbatch));
    }
  }
  const auto update_end = Clock::now();

  // Reward model learns only from executed drafts (realized rewards).
  double rm_mse = 0.0;
  if (updates_enabled) {
    std::vector<RewardExample> examples;
    examples.reserve(batch.size() * static_cast<std::size_t>(num_agents));
    for (std::size_t qi = 0; qi < batch.size(); ++qi) {
      for (int a = 0; a < num_agents; ++a) {
        AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        const DraftSlot& slot = cell.slots[static_cast<std::size_t>(cell.selected)];
        examples.push_back({slot.features.x, cell.executed.value});
      }
    }
    for (int e = 0; e < cfg_.rm_epochs; ++e) {
      const double loss = update_reward_model(phi_, examples, cfg_.rm_learning_rate);
      if (e == 0) rm_mse = loss;
    }
  }
  const auto rm_end = Clock::now();

  IterationMetrics m;
  m.iteration = iteration;
  double task_sum = 0.0;
  double peer_sum = 0.0;
  double coherence_sum = 0.0;
  double diversity_sum = 0.0;
  double combined_sum = 0.0;
  for (std::size_t qi = 0; qi < batch.size(); ++qi) {
    for (int a = 0; a < num_agents; ++a) {
      const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
      task_sum += cell.executed.value;
      diversity_sum += diversity(cell.drafts);
      for (int k = 0; k < drafts; ++k) {
        const DraftSlot& slot = cell.slots[static_cast<std::size_t>(k)];
        peer_sum += slot.agg.scalar_mean;
        coherence_sum += slot.agg.criteria_mean[0];
        combined_sum += draft_reward(cell, slot, k == cell.selected);
      }
    }
  }
  const double cells = static_cast<double>(batch.size()) * num_agents;
  const double draft_count = cells * drafts;
  m.mean_task_reward = task_sum / cells;
  m.reward_peer = peer_sum / draft_count;
  m.reward_coherence = coherence_sum / draft_count;
  m.reward_diversity = diversity_sum / cells;
  m.reward_combined = combined_sum / draft_count;
  m.agreement = agreement(selected_answers(p));
  m.specialization = specialization(strategy_histograms(p, num_agents, drafts));

  for (int ph = 0; ph < 4; ++ph) {
    m.phase_start_ms[static_cast<std::size_t>(ph)] = p.phase_start_ms[static_cast<std::size_t>(ph)];
    m.phase_ms[static_cast<std::size_t>(ph)] = p.phase_ms[static_cast<std::size_t>(ph)];
  }
  m.phase_start_ms[4] = ms_since(run_start, update_start);
  m.phase_ms[4] = ms_since(update_start, update_end);
  m.phase_start_ms[5] = ms_since(run_start, update_end);
  m.phase_ms[5] = ms_since(update_end, rm_end);

  if (io) {
    for (std::size_t qi = 0; qi < batch.size(); ++qi) {
      const Query& query = batch[qi];
      for (int a = 0; a < num_agents; ++a) {
        const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        for (int k = 0; k < drafts; ++k) {
          const Draft& d = cell.drafts[static_cast<std::size_t>(k)];
          nlohmann::json steps = nlohmann::json::array();
          for (const auto& s : d.steps) steps.push_back(s.text);
          io->event({{"type", "draft"},
                     {"iter", iteration},
                     {"query", query.id},
                     {"agent", a},
                     {"draft", k},
                     {"temperature", d.meta.temperature},
                     {"steps", steps},
                     {"answer", d.answer},
                     {"valid", validate_draft(d).valid}});
        }
      }
    }
    for (std::size_t qi = 0; qi < batch.size(); ++qi) {
      const Query& query = batch[qi];
      for (int a = 0; a < num_agents; ++a) {
        const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        for (int k = 0; k < drafts; ++k) {
          for (const auto& ev : cell.slots[static_cast<std::size_t>(k)].evals) {
            io->event({{"type", "evaluation"},
                       {"iter", iteration},
                       {"query", query.id},
                       {"agent", a},
                       {"draft", k},
                       {"evaluator", ev.evaluator_id},
                       {"criteria", ev.criteria},
                       {"scalar", ev.scalar},
                       {"feedback", ev.feedback}});
          }
        }
      }
    }
    for (std::size_t qi = 0; qi < batch.size(); ++qi) {
      const Query& query = batch[qi];
      for (int a = 0; a < num_agents; ++a) {
        const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        const DraftSlot& slot = cell.slots[static_cast<std::size_t>(cell.selected)];
        io->event({{"type", "selection"},
                   {"iter", iteration},
                   {"query", query.id},
                   {"agent", a},
                   {"draft", cell.selected},
                   {"predicted", slot.predicted}});
      }
      const RewardPrediction& winner = p.global_winner[qi];
      io->event({{"type", "global_winner"},
                 {"iter", iteration},
                 {"query", query.id},
                 {"agent", winner.ref.agent_id},
                 {"draft", winner.ref.draft_index},
                 {"predicted", winner.value}});
    }
    for (std::size_t qi = 0; qi < batch.size(); ++qi) {
      const Query& query = batch[qi];
      for (int a = 0; a < num_agents; ++a) {
        const AgentQueryCell& cell = p.grid[qi][static_cast<std::size_t>(a)];
        io->event({{"type", "execution"},
                   {"iter", iteration},
                   {"query", query.id},
                   {"agent", a},
                   {"draft", cell.selected},
                   {"reward", cell.executed.value},
                   {"answer_correct", cell.executed.answer_correct},
                   {"intermediate_fraction", cell.executed.intermediate_fraction}});
      }
    }
    if (updates_enabled) {
      for (int a = 0; a < num_agents; ++a) {
        const LossReport& r = reports[static_cast<std::size_t>(a)];
        io->event({{"type", "policy_update"},
                   {"iter", iteration},
                   {"agent", a},
                   {"loss", r.total},
                   {"ppo", r.ppo},
                   {"imitation", r.imitation},
                   {"value", r.value},
                   {"clip_fraction", r.clip_fraction},
                   {"version", agents_[static_cast<std::size_t>(a)].policy.version}});
      }
      io->event({{"type", "reward_update"},
                 {"iter", iteration},
                 {"mse", rm_mse},
                 {"version", phi_.version}});
    }
  }
  return m;
}

EvalSummary Trainer::evaluate_suite(std::span<const Query> suite, int iteration_tag) const {
  if (suite.empty()) throw EmptyInput("empty evaluation suite");
  Pipeline p = run_pipeline(cfg_, agents_, phi_, suite, iteration_tag, StreamTag::validation,
                            StreamTag::validation_eval, Clock::now());
  EvalSummary s;
  s.queries = static_cast<int>(suite.size());
  double task_sum = 0.0;
  double diversity_sum = 0.0;
  for (const auto& row : p.grid) {
    for (const auto& cell : row) {
      task_sum += cell.executed.value;
      diversity_sum += diversity(cell.drafts);
    }
  }
  const double cells = static_cast<double>(suite.size()) * cfg_.num_agents;
  s.mean_task_reward = task_sum / cells;
  s.diversity = diversity_sum / cells;
  s.agreement = agreement(selected_answers(p));
  s.specialization = specialization(strategy_histograms(p, cfg_.num_agents,
                                                        cfg_.drafts_per_query));
  return s;
}

TrainResult Trainer::train(RunWriter* io) {
  TrainResult result;
  double best = -1.0;
  int stall = 0;
  int last_iter = 0;
  const bool validate = !validation_.empty();
  for (int it = 1; it <= cfg_.iterations; ++it) {
    const std::vector<Query> batch = next_batch();
    IterationMetrics m = run_iteration(it, batch, io);
    result.history.push_back(m);
    if (io) {
      io->metrics_row(m);
      io->timing_rows(m);
    }
    last_iter = it;
    if (validate && it % cfg_.validation_every == 0) {
      const EvalSummary s = evaluate_suite(validation_, it);
      const ValidationPoint point{it, s.mean_task_reward};
      result.validation.push_back(point);
      if (io) {
        io->validation_row(point);
        io->checkpoint(it, agents_, phi_);
      }
      MDRAFT_INFO("iteration ", it, ": validation reward ", s.mean_task_reward);
      if (s.mean_task_reward > best + 1e-12) {
        best = s.mean_task_reward;
        stall = 0;
      } else if (++stall >= cfg_.validation_patience) {
        MDRAFT_INFO("stopping early at iteration ", it, " (plateau for ", stall, " validations)");
        result.stopped_early = true;
        break;
      }
    }
  }
  if (validate && last_iter > 0 &&
      (result.validation.empty() || result.validation.back().iteration != last_iter)) {
    const EvalSummary s = evaluate_suite(validation_, last_iter);
    const ValidationPoint point{last_iter, s.mean_task_reward};
    result.validation.push_back(point);
    if (io) {
      io->validation_row(point);
      io->checkpoint(last_iter, agents_, phi_);
    }
  }
  result.report = convergence_steps(result.validation, cfg_.validation_threshold);
  return result;
}

}  // namespace mdraft
