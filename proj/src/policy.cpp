#include "mdraft/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mdraft/rng.hpp"
#include "mdraft/text.hpp"

namespace mdraft {

namespace {

// Frame-word chains: strategy k opens with kOpeners[k/2] and links with
// kLinkers[(k+1)/2], so neighbouring strategies overlap in exactly one frame
// word and strategies further apart overlap in none.
constexpr const char* kOpeners[] = {"apply", "take",  "use",  "push",
                                    "run",   "fold",  "trace", "chain"};
constexpr const char* kLinkers[] = {"get",    "giving", "making", "yields",
                                    "equals", "leaves", "nets",   "shows"};
constexpr int kFrameWords = 8;

int bucket_of(std::int64_t v) {
  if (v < -50) return 0;
  if (v < 0) return 1;
  if (v == 0) return 2;
  if (v <= 50) return 3;
  return 4;
}

// Candidate index of a declared value at chain position t, or -1.
int candidate_index(std::int64_t declared, std::int64_t true_value) {
  const std::int64_t offset = declared - true_value;
  if (offset < -kCandidateHalfSpan || offset > kCandidateHalfSpan) return -1;
  return static_cast<int>(offset) + kCandidateHalfSpan;
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& scaled_logits) {
  const double mx = scaled_logits.maxCoeff();
  const Eigen::ArrayXd shifted = scaled_logits.array() - mx;
  const double lse = std::log(shifted.exp().sum());
  return (shifted - lse).matrix();
}

struct StepDistribution {
  Eigen::VectorXd features;
  Eigen::VectorXd log_probs;  // kActionCount
};

StepDistribution step_distribution(const PolicyParams& params, const FeatureLayout& layout,
                                   const Query& query, std::span<const Draft> history,
                                   const StrategyHint& hint, double temperature, int t,
                                   std::int64_t prev_value) {
  StepDistribution d;
  d.features = state_features(layout, query, history, hint, t, prev_value);
  const Eigen::VectorXd logits = params.weights.transpose() * d.features + params.bias;
  d.log_probs = log_softmax(logits / temperature);
  return d;
}

FeatureLayout layout_of(const PolicyParams& params) {
  FeatureLayout layout;
  layout.drafts_per_query =
      static_cast<int>(params.weights.rows()) - (1 + 3 + 9 + kValueBuckets + kActionCount);
  return layout;
}

}  // namespace

StrategyHint make_hint(int k, int drafts_per_query) {
  if (k < 0 || k >= drafts_per_query) {
    std::ostringstream os;
    os << "strategy slot " << k << " outside [0, " << drafts_per_query << ")";
    throw BadIndex(os.str());
  }
  StrategyHint hint;
  hint.strategy_id = k;
  std::ostringstream os;
  os << "frame steps as '" << kOpeners[(k / 2) % kFrameWords] << " .. "
     << kLinkers[((k + 1) / 2) % kFrameWords] << "'";
  hint.description = os.str();
  return hint;
}

double temperature_schedule(int k, int drafts_per_query) {
  if (drafts_per_query < 1) throw BadIndex("drafts_per_query must be >= 1");
  if (k < 0 || k >= drafts_per_query) {
    std::ostringstream os;
    os << "draft slot " << k << " outside [0, " << drafts_per_query << ")";
    throw BadIndex(os.str());
  }
  if (drafts_per_query == 1) return 0.5;
  return 0.2 + 0.6 * static_cast<double>(k) / (drafts_per_query - 1);
}

std::string render_step_text(int strategy_id, Op op, std::int64_t operand, std::int64_t value) {
  std::ostringstream os;
  os << kOpeners[(strategy_id / 2) % kFrameWords] << ' ' << op_name(op) << ' ' << operand << ' '
     << kLinkers[((strategy_id + 1) / 2) % kFrameWords] << ' ' << value;
  return os.str();
}

PolicyParams PolicyParams::zeros(int agent_id, const FeatureLayout& layout) {
  PolicyParams p;
  p.agent_id = agent_id;
  p.weights = Eigen::MatrixXd::Zero(layout.dim(), kActionCount);
  p.bias = Eigen::VectorXd::Zero(kActionCount);
  return p;
}

PolicyParams PolicyParams::initial(int agent_id, const FeatureLayout& layout, std::uint64_t seed,
                                   double init_scale, double history_repulsion) {
  PolicyParams p = zeros(agent_id, layout);
  Rng rng(seed);
  for (int c = 0; c < kActionCount; ++c) {
    for (int r = 0; r < layout.dim(); ++r) {
      p.weights(r, c) = rng.uniform(-init_scale, init_scale);
    }
  }
  for (int c = 0; c < kActionCount; ++c) {
    p.weights(layout.history_at() + c, c) = -history_repulsion;
  }
  return p;
}

PolicyGrad PolicyGrad::zeros(const FeatureLayout& layout) {
  PolicyGrad g;
  g.weights = Eigen::MatrixXd::Zero(layout.dim(), kActionCount);
  g.bias = Eigen::VectorXd::Zero(kActionCount);
  return g;
}

PolicyGrad& PolicyGrad::operator+=(const PolicyGrad& other) {
  weights += other.weights;
  bias += other.bias;
  return *this;
}

Eigen::VectorXd state_features(const FeatureLayout& layout, const Query& query,
                               std::span<const Draft> history, const StrategyHint& hint, int t,
                               std::int64_t prev_value) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.dim());
  x[layout.pos_at()] = static_cast<double>(t + 1) / kMaxDepth;
  const ChainOp& op = query.payload.ops.at(t);
  x[layout.op_at() + static_cast<int>(op.op)] = 1.0;
  const auto operand = std::clamp(op.operand, kOperandLo, kOperandHi);
  x[layout.operand_at() + static_cast<int>(operand - 1)] = 1.0;
  x[layout.bucket_at() + bucket_of(prev_value)] = 1.0;
  const int slot = std::clamp(hint.strategy_id, 0, layout.drafts_per_query - 1);
  x[layout.strategy_at() + slot] = 1.0;
  const std::int64_t true_value = chain_values(query.payload).at(t);
  for (const Draft& prior : history) {
    if (static_cast<std::size_t>(t) >= prior.steps.size()) continue;
    const auto declared = declared_value(prior.steps[t]);
    if (!declared) continue;
    const int c = candidate_index(*declared, true_value);
    if (c >= 0) x[layout.history_at() + c] += 1.0;
  }
  return x;
}

SampleResult sample_draft(const PolicyParams& params, const Query& query,
                          std::span<const Draft> history, const StrategyHint& hint,
                          double temperature, std::uint64_t seed) {
  const FeatureLayout layout = layout_of(params);
  const std::vector<std::int64_t> chain = chain_values(query.payload);
  const int depth = query.payload.depth();

  // The fixed template is structurally CoD-valid, so the resample loop is a
  // guard rail rather than a working path.
  for (int attempt = 0; attempt < 16; ++attempt) {
    Rng rng(combine_seed(seed, static_cast<std::uint64_t>(attempt)));
    SampleResult out;
    out.draft.agent_id = params.agent_id;
    out.draft.draft_index = hint.strategy_id;
    out.draft.meta.temperature = temperature;
    out.draft.meta.strategy_id = hint.strategy_id;
    out.draft.meta.history_len = static_cast<int>(history.size());
    out.draft.meta.seed = seed;
    out.traj.ref = DraftRef{query.id, params.agent_id, hint.strategy_id};

    std::int64_t prev = query.payload.start;
    for (int t = 0; t < depth; ++t) {
      StepDistribution d =
          step_distribution(params, layout, query, history, hint, temperature, t, prev);
      const Eigen::VectorXd probs = d.log_probs.array().exp().matrix();
      const int action =
          rng.categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
      const std::int64_t value = chain[t] + (action - kCandidateHalfSpan);
      const ChainOp& cop = query.payload.ops[t];
      out.draft.steps.push_back(
          make_step(render_step_text(hint.strategy_id, cop.op, cop.operand, value)));
      TrajStep step;
      step.features = std::move(d.features);
      step.action = action;
      step.log_prob = d.log_probs[action];
      out.traj.steps.push_back(std::move(step));
      prev = value;
    }
    out.draft.answer = std::to_string(prev);
    if (validate_draft(out.draft).valid) return out;
  }
  throw Error("sample_draft: rejection loop exhausted");
}

std::vector<double> step_log_probs(const PolicyParams& params, const Query& query,
                                   std::span<const Draft> history, const StrategyHint& hint,
                                   double temperature, const Draft& draft) {
  const FeatureLayout layout = layout_of(params);
  const std::vector<std::int64_t> chain = chain_values(query.payload);
  if (draft.steps.size() != chain.size()) {
    throw OutOfSupport("draft length differs from query depth");
  }
  std::vector<double> out;
  out.reserve(draft.steps.size());
  std::int64_t prev = query.payload.start;
  for (std::size_t t = 0; t < draft.steps.size(); ++t) {
    const auto declared = declared_value(draft.steps[t]);
    if (!declared) throw OutOfSupport("step has no declared value");
    const int action = candidate_index(*declared, chain[t]);
    if (action < 0) throw OutOfSupport("declared value outside the candidate window");
    const StepDistribution d = step_distribution(params, layout, query, history, hint, temperature,
                                                 static_cast<int>(t), prev);
    out.push_back(d.log_probs[action]);
    prev = *declared;
  }
  return out;
}

double log_prob(const PolicyParams& params, const Query& query, std::span<const Draft> history,
                const StrategyHint& hint, double temperature, const Draft& draft) {
  double total = 0.0;
  for (double lp : step_log_probs(params, query, history, hint, temperature, draft)) total += lp;
  return total;
}

PolicyGrad weighted_log_prob_grad(const PolicyParams& params, const Query& query,
                                  std::span<const Draft> history, const StrategyHint& hint,
                                  double temperature, const Draft& draft,
                                  std::span<const double> step_weights) {
  const FeatureLayout layout = layout_of(params);
  const std::vector<std::int64_t> chain = chain_values(query.payload);
  if (draft.steps.size() != chain.size()) {
    throw OutOfSupport("draft length differs from query depth");
  }
  if (!step_weights.empty() && step_weights.size() != draft.steps.size()) {
    throw Error("step_weights length mismatch");
  }
  PolicyGrad grad = PolicyGrad::zeros(layout);
  std::int64_t prev = query.payload.start;
  for (std::size_t t = 0; t < draft.steps.size(); ++t) {
    const auto declared = declared_value(draft.steps[t]);
    if (!declared) throw OutOfSupport("step has no declared value");
    const int action = candidate_index(*declared, chain[t]);
    if (action < 0) throw OutOfSupport("declared value outside the candidate window");
    const StepDistribution d = step_distribution(params, layout, query, history, hint, temperature,
                                                 static_cast<int>(t), prev);
    const double w = step_weights.empty() ? 1.0 : step_weights[t];
    // d log pi(a) / d z_c = (1[c=a] - p_c) / temperature.
    Eigen::VectorXd dz = -d.log_probs.array().exp().matrix();
    dz[action] += 1.0;
    dz *= w / temperature;
    grad.bias += dz;
    grad.weights += d.features * dz.transpose();
    prev = *declared;
  }
  return grad;
}

Eigen::VectorXd action_probs(const PolicyParams& params, const Eigen::VectorXd& features,
                             double temperature) {
  const Eigen::VectorXd logits = params.weights.transpose() * features + params.bias;
  return log_softmax(logits / temperature).array().exp().matrix();
}

}  // namespace mdraft
