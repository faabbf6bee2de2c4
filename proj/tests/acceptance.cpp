// Acceptance gate. Each numbered check prints one [PASS]/[FAIL] line with its
// measured values; the binary exits nonzero when any check fails. Slow
// sections report progress on stderr. Checks that share expensive work (the
// full training run, the seed-by-variant matrix) compute it once on demand.
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mdraft/config.hpp"
#include "mdraft/draft.hpp"
#include "mdraft/peer.hpp"
#include "mdraft/policy.hpp"
#include "mdraft/reward.hpp"
#include "mdraft/rl.hpp"
#include "mdraft/rng.hpp"
#include "mdraft/task.hpp"
#include "mdraft/trainer.hpp"

using namespace mdraft;
namespace fs = std::filesystem;

namespace {

using TimePoint = std::chrono::steady_clock::time_point;

TimePoint now() { return std::chrono::steady_clock::now(); }

double seconds_between(TimePoint a, TimePoint b) {
  return std::chrono::duration<double>(b - a).count();
}

std::string fmt(const char* f, ...) {
  char buf[768];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::path("/tmp") /
           ("mdraft_accept_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Relative error with the denominator floored at 1e-5: central differences on
// exactly-zero coordinates return pure roundoff (about |f| * eps / 2h), which
// must not register against a tolerance of 1e-4.
double grad_rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-5});
}

// Average 1-based ranks with ties sharing their mean rank.
std::vector<double> tie_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = tie_ranks(a);
  const std::vector<double> rb = tie_ranks(b);
  const double ma = mean_of(ra);
  const double mb = mean_of(rb);
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  const double denom = std::sqrt(va * vb);
  return denom == 0.0 ? std::nan("") : cov / denom;
}

PolicyParams random_params(const FeatureLayout& layout, std::uint64_t seed, double scale) {
  PolicyParams p = PolicyParams::zeros(0, layout);
  Rng rng(seed);
  for (int c = 0; c < kActionCount; ++c) {
    for (int r = 0; r < layout.dim(); ++r) p.weights(r, c) = rng.uniform(-scale, scale);
    p.bias[c] = rng.uniform(-scale, scale);
  }
  return p;
}

// Samples one update batch of three drafts (the middle one selected) with
// critic estimates from psi and attached advantages.
std::vector<DraftSample> update_batch(const PolicyParams& params, const ValueParams& psi,
                                      const PPOConfig& cfg, const Query& q, std::uint64_t seed) {
  std::vector<DraftSample> batch;
  Rng rng(seed);
  const int drafts = 3;
  for (int k = 0; k < drafts; ++k) {
    SampleResult s = sample_draft(params, q, {}, make_hint(k, drafts),
                                  temperature_schedule(k, drafts), rng.next_u64());
    DraftSample ds;
    ds.traj = std::move(s.traj);
    ds.temperature = temperature_schedule(k, drafts);
    ds.policy_version = params.version;
    ds.selected = k == 1;
    for (TrajStep& st : ds.traj.steps) st.value_estimate = value_estimate(psi, st.features);
    ds.traj.steps.back().reward = rng.uniform(0.0, 1.0);
    attach_advantages(ds, cfg.discount, cfg.gae_lambda);
    batch.push_back(std::move(ds));
  }
  return batch;
}

// Direct double sum: A_t = sum_l (discount*lambda)^l * delta_{t+l}.
std::vector<double> gae_brute(std::span<const double> rewards, std::span<const double> values,
                              double bootstrap, double discount, double lambda) {
  const std::size_t n = rewards.size();
  std::vector<double> deltas(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double next = (i + 1 == n) ? bootstrap : values[i + 1];
    deltas[i] = rewards[i] + discount * next - values[i];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = t; j < n; ++j) {
      adv[t] += std::pow(discount * lambda, static_cast<double>(j - t)) * deltas[j];
    }
  }
  return adv;
}

struct MatrixCell {
  double final_reward = 0.0;
  int crossing = 0;  // first validated iteration at or past the threshold
  double diversity_mean = 0.0;
  bool diversity_all_zero = true;
};

struct Shared {
  std::string data_dir;
  TrainingConfig trained_cfg;
  std::optional<Trainer> trained;  // end state of check 1's full run
  std::map<std::string, std::vector<MatrixCell>> matrix;
  double matrix_secs = 0.0;
};

constexpr int kMatrixIterations = 60;
constexpr std::array<std::uint64_t, 5> kMatrixSeeds{1, 2, 3, 4, 5};

// Trains every ablation variant over the shared seeds at a fixed iteration
// budget (the plateau stop is disabled so budgets stay matched). Validation
// runs every other iteration so threshold crossings are well resolved.
void ensure_matrix(Shared& s) {
  if (!s.matrix.empty()) return;
  const auto t0 = now();
  TrainingConfig base;
  base.suite_path = s.data_dir + "/dev500.jsonl";
  base.iterations = kMatrixIterations;
  base.validation_every = 2;
  base.validation_patience = 1 << 20;
  struct Variant {
    const char* name;
    void (*tweak)(TrainingConfig&);
  };
  const Variant variants[] = {
      {"full", [](TrainingConfig&) {}},
      {"constant_scores", [](TrainingConfig& c) { c.eval_mode = PeerEvalMode::constant; }},
      {"single_draft", [](TrainingConfig& c) { c.drafts_per_query = 1; }},
      {"three_drafts", [](TrainingConfig& c) { c.drafts_per_query = 3; }},
  };
  for (const Variant& v : variants) {
    for (std::uint64_t seed : kMatrixSeeds) {
      TrainingConfig cfg = base;
      cfg.seed = seed;
      v.tweak(cfg);
      std::fprintf(stderr, "  [matrix] %s seed %llu\n", v.name,
                   static_cast<unsigned long long>(seed));
      Trainer trainer(cfg);
      const TrainResult r = trainer.train();
      MatrixCell cell;
      cell.final_reward = r.report.final_mean_reward;
      cell.crossing =
          r.report.steps_to_threshold ? *r.report.steps_to_threshold : kMatrixIterations + 1;
      double sum = 0.0;
      for (const IterationMetrics& m : r.history) {
        sum += m.reward_diversity;
        if (m.reward_diversity != 0.0) cell.diversity_all_zero = false;
      }
      cell.diversity_mean = sum / static_cast<double>(r.history.size());
      s.matrix[v.name].push_back(cell);
    }
  }
  for (const auto& [name, cells] : s.matrix) {
    std::fprintf(stderr, "  [matrix] %s finals:", name.c_str());
    for (const MatrixCell& c : cells) std::fprintf(stderr, " %.3f", c.final_reward);
    std::fprintf(stderr, "\n");
  }
  s.matrix_secs = seconds_between(t0, now());
}

// Check 1: a full default-config training run on the committed dev suite logs
// only drafts that re-validate from their logged text, within the time budget.
Outcome check_draft_validity(Shared& s) {
  TrainingConfig cfg;
  cfg.suite_path = s.data_dir + "/dev500.jsonl";
  std::fprintf(stderr, "  [run] full training run on %s\n", cfg.suite_path.c_str());
  TempDir dir;
  const auto t0 = now();
  s.trained_cfg = cfg;
  s.trained.emplace(cfg);
  RunWriter writer(dir.str(), cfg);
  const TrainResult result = s.trained->train(&writer);
  writer.finish(result.stopped_early ? "stopped_early" : "completed", result.report);
  const double secs = seconds_between(t0, now());

  long long total = 0;
  long long valid = 0;
  std::ifstream in(dir.path / "events.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    const nlohmann::json rec = nlohmann::json::parse(line);
    if (rec.at("type") != "draft") continue;
    ++total;
    std::vector<ReasoningStep> steps;
    for (const auto& t : rec.at("steps")) steps.push_back(make_step(t.get<std::string>()));
    if (validate_draft(steps, rec.at("answer").get<std::string>()).valid) ++valid;
  }
  const bool ok = total > 0 && valid == total && secs < 300.0;
  return {ok, fmt("%lld/%lld logged drafts re-validate across %d iterations; run took %.1f s "
                  "(budget 300 s)",
                  valid, total, static_cast<int>(result.history.size()), secs)};
}

// Check 2: analytic gradients of the policy log-likelihood, the reward model,
// the critic, and the combined update match central differences (h = 1e-5)
// coordinate by coordinate on 100 random instances each.
Outcome check_gradients(Shared&) {
  const auto t0 = now();
  const double h = 1e-5;

  double worst_policy = 0.0;
  {
    Rng rng(101);
    for (int i = 0; i < 100; ++i) {
      const int drafts = (i % 2 == 0) ? 5 : 3;
      const FeatureLayout layout{drafts};
      PolicyParams params = random_params(layout, 1000 + static_cast<std::uint64_t>(i), 0.3);
      const Query q = generate_task(5000 + static_cast<std::uint64_t>(i),
                                    1 + static_cast<int>(rng.uniform_int(0, 2)));
      const int hist_len = static_cast<int>(rng.uniform_int(0, 2));
      std::vector<Draft> history;
      for (int j = 0; j < hist_len; ++j) {
        history.push_back(sample_draft(params, q, history, make_hint(j, drafts),
                                       temperature_schedule(j, drafts), rng.next_u64())
                              .draft);
      }
      const StrategyHint hint = make_hint(hist_len, drafts);
      const double temp = rng.uniform(0.3, 0.8);
      const Draft d = sample_draft(params, q, history, hint, temp, rng.next_u64()).draft;
      const PolicyGrad g = log_prob_grad(params, q, history, hint, temp, d);
      auto fd = [&](double* p, double analytic) {
        const double saved = *p;
        *p = saved + h;
        const double fp = log_prob(params, q, history, hint, temp, d);
        *p = saved - h;
        const double fm = log_prob(params, q, history, hint, temp, d);
        *p = saved;
        worst_policy = std::max(worst_policy, grad_rel_err(analytic, (fp - fm) / (2 * h)));
      };
      for (int r = 0; r < layout.dim(); ++r) {
        for (int c = 0; c < kActionCount; ++c) fd(&params.weights(r, c), g.weights(r, c));
      }
      for (int c = 0; c < kActionCount; ++c) fd(&params.bias[c], g.bias[c]);
    }
  }

  double worst_rm = 0.0;
  {
    Rng rng(202);
    for (int i = 0; i < 100; ++i) {
      const int dim = reward_feature_dim(5);
      const int hidden = 1 + static_cast<int>(rng.uniform_int(0, 7));
      RewardModelParams phi =
          RewardModelParams::initial(dim, hidden, 2000 + static_cast<std::uint64_t>(i), 0.5);
      std::vector<RewardExample> batch(1 + static_cast<std::size_t>(rng.uniform_int(0, 5)));
      for (RewardExample& ex : batch) {
        ex.x = Eigen::VectorXd(dim);
        for (int j = 0; j < dim; ++j) ex.x[j] = rng.uniform(-1.0, 1.0);
        ex.target = rng.uniform(0.0, 1.0);
      }
      RewardModelGrad g;
      reward_loss_and_grad(phi, batch, &g);
      auto fd = [&](double* p, double analytic) {
        const double saved = *p;
        *p = saved + h;
        const double fp = reward_loss_and_grad(phi, batch);
        *p = saved - h;
        const double fm = reward_loss_and_grad(phi, batch);
        *p = saved;
        worst_rm = std::max(worst_rm, grad_rel_err(analytic, (fp - fm) / (2 * h)));
      };
      for (int r = 0; r < phi.hidden_dim(); ++r) {
        for (int c = 0; c < phi.input_dim(); ++c) fd(&phi.w1(r, c), g.w1(r, c));
      }
      for (int r = 0; r < phi.hidden_dim(); ++r) fd(&phi.b1[r], g.b1[r]);
      for (int r = 0; r < phi.hidden_dim(); ++r) fd(&phi.w2[r], g.w2[r]);
      fd(&phi.b2, g.b2);
    }
  }

  double worst_value = 0.0;
  {
    Rng rng(303);
    for (int i = 0; i < 100; ++i) {
      const int dim = 2 + static_cast<int>(rng.uniform_int(0, 8));
      ValueParams psi = ValueParams::zeros(0, dim);
      for (int j = 0; j < dim; ++j) psi.weights[j] = rng.uniform(-1.0, 1.0);
      psi.bias = rng.uniform(-1.0, 1.0);
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 7));
      std::vector<Eigen::VectorXd> xs(n, Eigen::VectorXd(dim));
      std::vector<const Eigen::VectorXd*> feats;
      std::vector<double> returns;
      for (Eigen::VectorXd& x : xs) {
        for (int j = 0; j < dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
        feats.push_back(&x);
        returns.push_back(rng.uniform(-1.0, 1.0));
      }
      ValueGrad g;
      value_loss_and_grad(psi, feats, returns, &g);
      auto fd = [&](double* p, double analytic) {
        const double saved = *p;
        *p = saved + h;
        const double fp = value_loss_and_grad(psi, feats, returns);
        *p = saved - h;
        const double fm = value_loss_and_grad(psi, feats, returns);
        *p = saved;
        worst_value = std::max(worst_value, grad_rel_err(analytic, (fp - fm) / (2 * h)));
      };
      for (int j = 0; j < dim; ++j) fd(&psi.weights[j], g.weights[j]);
      fd(&psi.bias, g.bias);
    }
  }

  double worst_combined = 0.0;
  {
    const PPOConfig ppo;
    for (int i = 0; i < 100; ++i) {
      const FeatureLayout layout{3};
      PolicyParams params = random_params(layout, 4000 + static_cast<std::uint64_t>(i), 0.3);
      ValueParams psi = ValueParams::zeros(0, layout.dim());
      Rng rng(4500 + static_cast<std::uint64_t>(i));
      for (int j = 0; j < layout.dim(); ++j) psi.weights[j] = rng.uniform(-0.1, 0.1);
      psi.bias = rng.uniform(-0.2, 0.2);
      const Query q = generate_task(6000 + static_cast<std::uint64_t>(i),
                                    1 + static_cast<int>(rng.uniform_int(0, 2)));
      const std::vector<DraftSample> batch =
          update_batch(params, psi, ppo, q, 9000 + static_cast<std::uint64_t>(i));
      PolicyGrad dtheta;
      ValueGrad dpsi;
      combined_loss_and_grad(params, psi, batch, ppo, &dtheta, &dpsi);
      auto fd = [&](double* p, double analytic) {
        const double saved = *p;
        *p = saved + h;
        const double fp = combined_loss_and_grad(params, psi, batch, ppo).total;
        *p = saved - h;
        const double fm = combined_loss_and_grad(params, psi, batch, ppo).total;
        *p = saved;
        worst_combined = std::max(worst_combined, grad_rel_err(analytic, (fp - fm) / (2 * h)));
      };
      for (int r = 0; r < layout.dim(); ++r) {
        for (int c = 0; c < kActionCount; ++c) fd(&params.weights(r, c), dtheta.weights(r, c));
      }
      for (int c = 0; c < kActionCount; ++c) fd(&params.bias[c], dtheta.bias[c]);
      for (int j = 0; j < layout.dim(); ++j) fd(&psi.weights[j], dpsi.weights[j]);
      fd(&psi.bias, dpsi.bias);
    }
  }

  const double secs = seconds_between(t0, now());
  const bool ok = worst_policy < 1e-4 && worst_rm < 1e-4 && worst_value < 1e-4 &&
                  worst_combined < 1e-4 && secs < 60.0;
  return {ok, fmt("max rel err vs central differences over 100 instances each: policy %.1e, "
                  "reward model %.1e, critic %.1e, combined %.1e (tol 1e-4); %.1f s (budget 60 s)",
                  worst_policy, worst_rm, worst_value, worst_combined, secs)};
}

// Check 3: the recursive advantage estimator equals the direct double sum on
// random episodes, at the production discount/lambda pair and random ones.
Outcome check_advantages(Shared&) {
  const auto t0 = now();
  Rng rng(314159);
  double worst = 0.0;
  for (int ep = 0; ep < 1000; ++ep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 9));
    std::vector<double> rewards(n);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      rewards[i] = rng.uniform(-1.0, 1.0);
      values[i] = rng.uniform(-1.0, 1.0);
    }
    const double bootstrap = rng.uniform(-1.0, 1.0);
    const double rd = rng.uniform(0.8, 1.0);
    const double rl = rng.uniform(0.7, 1.0);
    const std::array<std::pair<double, double>, 2> configs{{{0.99, 0.95}, {rd, rl}}};
    for (const auto& [discount, lambda] : configs) {
      const GaeResult g = gae(rewards, values, bootstrap, discount, lambda);
      const std::vector<double> brute = gae_brute(rewards, values, bootstrap, discount, lambda);
      for (std::size_t t = 0; t < n; ++t) {
        worst = std::max(worst, std::abs(g.advantages[t] - brute[t]));
        worst = std::max(worst, std::abs(g.returns[t] - (g.advantages[t] + values[t])));
      }
    }
  }
  const double secs = seconds_between(t0, now());
  const bool ok = worst <= 1e-10 && secs < 10.0;
  return {ok, fmt("1000 episodes of length <= 10, including discount 0.99 / lambda 0.95: "
                  "max |recursive - double sum| = %.1e (tol 1e-10); %.2f s (budget 10 s)",
                  worst, secs)};
}

// Check 4: on depth-1 tasks the nine candidate drafts exhaust the sample
// space, so their policy probabilities must sum to one.
Outcome check_normalization(Shared&) {
  Rng rng(2718);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int drafts = (i % 2 == 0) ? 5 : 1;
    const FeatureLayout layout{drafts};
    const PolicyParams params = random_params(layout, 7000 + static_cast<std::uint64_t>(i), 0.5);
    const Query q = generate_task(7500 + static_cast<std::uint64_t>(i), 1);
    const int k = static_cast<int>(rng.uniform_int(0, drafts - 1));
    std::vector<Draft> history;
    for (int j = 0; j < k; ++j) {
      history.push_back(sample_draft(params, q, history, make_hint(j, drafts),
                                     temperature_schedule(j, drafts), rng.next_u64())
                            .draft);
    }
    const StrategyHint hint = make_hint(k, drafts);
    const double temp = rng.uniform(0.25, 0.8);
    const std::int64_t truth = chain_values(q.payload)[0];
    double sum = 0.0;
    for (int a = 0; a < kActionCount; ++a) {
      const std::int64_t value = truth - kCandidateHalfSpan + a;
      Draft d;
      d.agent_id = 0;
      d.draft_index = k;
      d.steps.push_back(make_step(
          render_step_text(hint.strategy_id, q.payload.ops[0].op, q.payload.ops[0].operand,
                           value)));
      d.answer = std::to_string(value);
      sum += std::exp(log_prob(params, q, history, hint, temp, d));
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  const bool ok = worst <= 1e-10;
  return {ok, fmt("100 exhaustive depth-1 enumerations: max |sum of probabilities - 1| = %.1e "
                  "(tol 1e-10)",
                  worst)};
}

// Check 5: selection is an exact argmax, ties fall to the lowest
// (agent_id, draft_index), and strictly increasing value transforms never
// change the winner.
Outcome check_selection(Shared&) {
  Rng rng(5555);
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 14));
    std::vector<RewardPrediction> preds;
    for (int j = 0; j < n; ++j) {
      preds.push_back({DraftRef{i, static_cast<int>(rng.uniform_int(0, 4)),
                                static_cast<int>(rng.uniform_int(0, 4))},
                       rng.uniform(0.0, 1.0)});
    }
    const RewardPrediction& sel = select(preds);
    for (const RewardPrediction& p : preds) {
      if (p.value > sel.value) return {false, fmt("argmax violated on case %d", i)};
      if (p.value == sel.value &&
          std::pair{p.ref.agent_id, p.ref.draft_index} <
              std::pair{sel.ref.agent_id, sel.ref.draft_index}) {
        return {false, fmt("tie broken away from the lowest ids on case %d", i)};
      }
    }
  }
  for (int i = 0; i < 200; ++i) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 10));
    std::vector<RewardPrediction> preds;
    for (int j = 0; j < n; ++j) {
      preds.push_back({DraftRef{7, static_cast<int>(rng.uniform_int(0, 3)),
                                static_cast<int>(rng.uniform_int(0, 4))},
                       0.25 * static_cast<double>(rng.uniform_int(1, 3))});
    }
    const RewardPrediction& sel = select(preds);
    for (const RewardPrediction& p : preds) {
      if (p.value > sel.value) return {false, fmt("argmax violated on tie case %d", i)};
      if (p.value == sel.value &&
          std::pair{p.ref.agent_id, p.ref.draft_index} <
              std::pair{sel.ref.agent_id, sel.ref.draft_index}) {
        return {false, fmt("tie broken away from the lowest ids on tie case %d", i)};
      }
    }
  }
  {
    const std::vector<RewardPrediction> preds = {
        {{1, 2, 1}, 0.5}, {{1, 1, 3}, 0.5}, {{1, 1, 0}, 0.5}, {{1, 2, 0}, 0.5}};
    if (!(select(preds).ref == DraftRef{1, 1, 0})) {
      return {false, "all-equal tie did not fall to the lowest (agent_id, draft_index)"};
    }
  }
  // Values on a 0.1 grid keep transformed gaps above rounding noise, so the
  // winner must be bit-identical under any strictly increasing map.
  int invariant = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<RewardPrediction> base;
    for (int j = 0; j < 12; ++j) {
      base.push_back({DraftRef{3, static_cast<int>(rng.uniform_int(0, 3)),
                               static_cast<int>(rng.uniform_int(0, 4))},
                      0.1 * static_cast<double>(rng.uniform_int(0, 10))});
    }
    const DraftRef picked = select(base).ref;
    const double a = rng.uniform(0.1, 5.0);
    const double b = rng.uniform(-3.0, 3.0);
    const double c = rng.uniform(0.0, 2.0);
    const double d = rng.uniform(0.1, 4.0);
    std::vector<RewardPrediction> mapped = base;
    for (RewardPrediction& p : mapped) p.value = a * p.value + b + c * std::atan(d * p.value);
    if (select(mapped).ref == picked) ++invariant;
  }
  const bool ok = invariant == 100;
  return {ok, fmt("200 argmax cases, 200 forced-tie cases, all-equal hand case, and %d/100 "
                  "strictly increasing transforms left the winner unchanged",
                  invariant)};
}

// Check 6: ablation direction over the shared matrix. Removing peer scores
// (constant evaluations) must hurt, and removing multi-draft generation must
// hurt the most, in final held-out reward averaged over seeds.
Outcome check_ablation(Shared& s) {
  ensure_matrix(s);
  auto mean_final = [&](const char* name) {
    std::vector<double> finals;
    for (const MatrixCell& c : s.matrix.at(name)) finals.push_back(c.final_reward);
    return mean_of(finals);
  };
  const double full = mean_final("full");
  const double constant = mean_final("constant_scores");
  const double single = mean_final("single_draft");
  const bool ordering = full > constant && constant > single;
  const bool largest_drop = (full - single) > (full - constant);
  return {ordering && largest_drop,
          fmt("final held-out reward means over seeds 1-5: full %.3f, constant peer scores %.3f, "
              "single draft %.3f; need full > constant > single with the single-draft drop "
              "largest; matrix took %.0f s (budget 1800 s)",
              full, constant, single, s.matrix_secs)};
}

// Check 7: five drafts per query reach the 0.8 validation threshold in fewer
// iterations than one draft at the same query budget (median over seeds).
Outcome check_convergence_speed(Shared& s) {
  ensure_matrix(s);
  std::vector<double> five;
  std::vector<double> one;
  for (const MatrixCell& c : s.matrix.at("full")) five.push_back(c.crossing);
  for (const MatrixCell& c : s.matrix.at("single_draft")) one.push_back(c.crossing);
  const double m5 = median_of(five);
  const double m1 = median_of(one);
  const bool ok = m5 < m1 && s.matrix_secs < 1800.0;
  return {ok, fmt("median iterations to 0.8 held-out reward over seeds 1-5: five drafts %.0f vs "
                  "one draft %.0f (%d = never; 16 queries per iteration in both)",
                  m5, m1, kMatrixIterations + 1)};
}

// Check 8: mean in-run draft diversity rises strictly with the draft count
// and a single draft scores exactly zero.
Outcome check_diversity(Shared& s) {
  ensure_matrix(s);
  auto mean_div = [&](const char* name) {
    std::vector<double> means;
    for (const MatrixCell& c : s.matrix.at(name)) means.push_back(c.diversity_mean);
    return mean_of(means);
  };
  bool single_exact = true;
  for (const MatrixCell& c : s.matrix.at("single_draft")) {
    single_exact = single_exact && c.diversity_all_zero && c.diversity_mean == 0.0;
  }
  const double d1 = mean_div("single_draft");
  const double d3 = mean_div("three_drafts");
  const double d5 = mean_div("full");
  const bool ok = single_exact && d1 == 0.0 && d1 < d3 && d3 < d5;
  return {ok, fmt("mean diversity over seeds 1-5: one draft %.4f (exactly zero: %s), three "
                  "drafts %.4f, five drafts %.4f; need strictly increasing",
                  d1, single_exact ? "yes" : "no", d3, d5)};
}

// Check 9: the trained reward model ranks unseen drafts like the realized
// task reward. Drafts come from held-out queries via both the trained and a
// freshly initialized policy, so quality spans the full range.
Outcome check_reward_ranking(Shared& s) {
  if (!s.trained) return {false, "check 1's training run is unavailable"};
  Trainer& tr = *s.trained;
  const TrainingConfig& cfg = s.trained_cfg;
  const FeatureLayout layout{cfg.drafts_per_query};
  const int drafts_per_query = cfg.drafts_per_query;
  const std::vector<Query> held = make_suite(987654321, 150, cfg.task_depth);
  Rng rng(24601);
  std::vector<PolicyParams> fresh;
  for (int a = 0; a < cfg.num_agents; ++a) {
    fresh.push_back(PolicyParams::initial(a, layout, rng.next_u64(), cfg.policy_init_scale,
                                          cfg.history_repulsion));
  }
  std::vector<double> predicted;
  std::vector<double> realized;
  for (const Query& q : held) {
    for (int a = 0; a < cfg.num_agents; ++a) {
      const std::array<const PolicyParams*, 2> sources{&tr.agents()[static_cast<std::size_t>(a)]
                                                            .policy,
                                                       &fresh[static_cast<std::size_t>(a)]};
      for (const PolicyParams* policy : sources) {
        std::vector<Draft> drafts;
        for (int k = 0; k < drafts_per_query; ++k) {
          drafts.push_back(sample_draft(*policy, q, drafts, make_hint(k, drafts_per_query),
                                        temperature_schedule(k, drafts_per_query),
                                        rng.next_u64())
                               .draft);
        }
        for (const Draft& d : drafts) {
          std::vector<PeerEvaluation> evals;
          for (int b = 0; b < cfg.num_agents; ++b) {
            if (b == a) continue;
            evals.push_back(evaluate({b, cfg.noise_sigma, rng.next_u64()}, d, q));
          }
          const RewardFeatures f = featurize(d, aggregate(evals), drafts, drafts_per_query);
          predicted.push_back(predict(tr.reward_model(), f.x));
          realized.push_back(task_reward(d, q, cfg.reward_weights).value);
        }
      }
    }
  }
  const double rho = spearman(predicted, realized);
  const bool ok = rho >= 0.6;
  return {ok, fmt("rank correlation between predicted and realized reward on %zu held-out "
                  "drafts: %.3f (need >= 0.6)",
                  predicted.size(), rho)};
}

// Check 10: identical config and seed produce byte-identical metrics,
// events, and validation files, for a rerun and across worker-thread counts.
Outcome check_determinism(Shared& s) {
  TrainingConfig cfg;
  cfg.suite_path = s.data_dir + "/dev500.jsonl";
  cfg.seed = 7;
  cfg.iterations = 8;
  cfg.batch_size = 8;
  cfg.validation_every = 4;
  cfg.validation_patience = 1 << 20;
  auto run = [&](int threads) {
    TrainingConfig c = cfg;
    c.threads = threads;
    TempDir dir;
    Trainer trainer(c);
    RunWriter writer(dir.str(), c);
    const TrainResult r = trainer.train(&writer);
    writer.finish(r.stopped_early ? "stopped_early" : "completed", r.report);
    return std::array<std::string, 3>{slurp(dir.path / "metrics.csv"),
                                      slurp(dir.path / "events.jsonl"),
                                      slurp(dir.path / "validation.csv")};
  };
  const std::array<std::string, 3> first = run(1);
  const std::array<std::string, 3> rerun = run(1);
  const std::array<std::string, 3> threaded = run(4);
  const bool nonempty = !first[0].empty() && !first[1].empty() && !first[2].empty();
  const bool ok = nonempty && first == rerun && first == threaded;
  return {ok, fmt("rerun identical: %s; four workers identical to one: %s (metrics %zu B, "
                  "events %zu B, validation %zu B)",
                  first == rerun ? "yes" : "no", first == threaded ? "yes" : "no",
                  first[0].size(), first[1].size(), first[2].size())};
}

// Check 11: with a single agent the cross-agent metrics take their defined
// degenerate values exactly: agreement 1.0, specialization 0.0.
Outcome check_single_agent(Shared& s) {
  const std::vector<std::vector<std::string>> answers = {{"5"}, {"12"}, {"-3"}};
  const std::vector<std::vector<double>> hists = {{2.0, 1.0, 4.0}};
  const double agree_anchor = agreement(answers);
  const double spec_anchor = specialization(hists);

  TrainingConfig cfg;
  cfg.suite_path = s.data_dir + "/dev500.jsonl";
  cfg.num_agents = 1;
  cfg.iterations = 3;
  cfg.batch_size = 4;
  cfg.validation_every = 10;
  Trainer trainer(cfg);
  const TrainResult r = trainer.train();
  bool exact = !r.history.empty();
  double last_agree = -1.0;
  double last_spec = -1.0;
  for (const IterationMetrics& m : r.history) {
    exact = exact && m.agreement == 1.0 && m.specialization == 0.0;
    last_agree = m.agreement;
    last_spec = m.specialization;
  }
  const bool ok = exact && agree_anchor == 1.0 && spec_anchor == 0.0;
  return {ok, fmt("single-agent run of %zu iterations: agreement %.2f (want exactly 1.00), "
                  "specialization %.2f (want exactly 0.00); direct anchors %.2f / %.2f",
                  r.history.size(), last_agree, last_spec, agree_anchor, spec_anchor)};
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    Outcome (*fn)(Shared&);
  };
  const std::array<Check, 11> checks = {{
      {"draft validity", check_draft_validity},
      {"gradient correctness", check_gradients},
      {"advantage estimation", check_advantages},
      {"policy normalization", check_normalization},
      {"draft selection", check_selection},
      {"ablation ordering", check_ablation},
      {"convergence speed", check_convergence_speed},
      {"draft diversity", check_diversity},
      {"reward model ranking", check_reward_ranking},
      {"determinism", check_determinism},
      {"single-agent metrics", check_single_agent},
  }};

  Shared shared;
  shared.data_dir = MDRAFT_TEST_DATA_DIR;
  int failures = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].fn(shared);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].name,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu checks passed\n", checks.size());
  } else {
    std::printf("%d of %zu checks failed\n", failures, checks.size());
  }
  return failures == 0 ? 0 : 1;
}
