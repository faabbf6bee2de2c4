#ifndef MDRAFT_POLICY_HPP
#define MDRAFT_POLICY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mdraft/draft.hpp"
#include "mdraft/error.hpp"
#include "mdraft/task.hpp"

namespace mdraft {

// Candidate intermediate values at chain position t are the nine integers
// within +/-4 of the true value; candidate index 4 is always exact.
inline constexpr int kActionCount = 9;
inline constexpr int kCandidateHalfSpan = 4;

// Buckets for the previous declared value feature.
inline constexpr int kValueBuckets = 5;

struct OutOfSupport : Error {
  explicit OutOfSupport(const std::string& what) : Error(what) {}
};

// State feature blocks, in order: normalized position (1), operator one-hot
// (3), operand one-hot (9), previous-value bucket one-hot (kValueBuckets),
// strategy one-hot (K), per-candidate history counts (kActionCount).
struct FeatureLayout {
  int drafts_per_query = 5;

  int dim() const { return 1 + 3 + 9 + kValueBuckets + drafts_per_query + kActionCount; }
  int pos_at() const { return 0; }
  int op_at() const { return 1; }
  int operand_at() const { return 4; }
  int bucket_at() const { return 13; }
  int strategy_at() const { return 13 + kValueBuckets; }
  int history_at() const { return strategy_at() + drafts_per_query; }
};

struct StrategyHint {
  int strategy_id = 0;
  std::string description;
};

// One hint per draft slot; BadIndex outside [0, K).
StrategyHint make_hint(int k, int drafts_per_query);

// Inclusive linear grid over [0.2, 0.8]; midpoint 0.5 for K=1.
double temperature_schedule(int k, int drafts_per_query);

// Step wording varies with the strategy slot: adjacent strategies share one
// frame word, strategies two or more apart share none. Always exactly five
// words, with "<op> <operand>" adjacent and the value as the last token.
std::string render_step_text(int strategy_id, Op op, std::int64_t operand, std::int64_t value);

struct PolicyParams {
  int agent_id = 0;
  int version = 0;
  Eigen::MatrixXd weights;  // feature_dim x kActionCount
  Eigen::VectorXd bias;     // kActionCount

  static PolicyParams zeros(int agent_id, const FeatureLayout& layout);
  // Small uniform weights plus a repulsive coupling from each candidate's
  // history count to its own logit, so later drafts are pushed away from
  // choices their predecessors already made.
  static PolicyParams initial(int agent_id, const FeatureLayout& layout, std::uint64_t seed,
                              double init_scale, double history_repulsion);
};

struct PolicyGrad {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  static PolicyGrad zeros(const FeatureLayout& layout);
  PolicyGrad& operator+=(const PolicyGrad& other);
};

struct TrajStep {
  Eigen::VectorXd features;
  int action = 0;
  double log_prob = 0.0;
  double value_estimate = 0.0;  // critic estimate at collection time
  double reward = 0.0;          // draft-level reward lands on the final step
};

struct TrajectoryRecord {
  DraftRef ref;
  std::vector<TrajStep> steps;  // length = draft step count
};

struct SampleResult {
  Draft draft;
  TrajectoryRecord traj;
};

// State features for chain position t given the previous declared value and
// the declared values of this agent's earlier drafts at the same position.
Eigen::VectorXd state_features(const FeatureLayout& layout, const Query& query,
                               std::span<const Draft> history, const StrategyHint& hint, int t,
                               std::int64_t prev_value);

// Samples one draft: a categorical choice per chain position with logits
// (W^T x + b) / temperature. Deterministic in (params, inputs, seed).
SampleResult sample_draft(const PolicyParams& params, const Query& query,
                          std::span<const Draft> history, const StrategyHint& hint,
                          double temperature, std::uint64_t seed);

// Per-step log-probabilities of an existing draft under the given params.
// Throws OutOfSupport when a step's declared value is outside the candidate
// window or the draft's length differs from the query depth.
std::vector<double> step_log_probs(const PolicyParams& params, const Query& query,
                                   std::span<const Draft> history, const StrategyHint& hint,
                                   double temperature, const Draft& draft);

double log_prob(const PolicyParams& params, const Query& query, std::span<const Draft> history,
                const StrategyHint& hint, double temperature, const Draft& draft);

// Gradient of sum_t weight_t * log pi(a_t | x_t) with respect to weights and
// bias. step_weights empty means all ones (plain log_prob gradient).
PolicyGrad weighted_log_prob_grad(const PolicyParams& params, const Query& query,
                                  std::span<const Draft> history, const StrategyHint& hint,
                                  double temperature, const Draft& draft,
                                  std::span<const double> step_weights = {});

inline PolicyGrad log_prob_grad(const PolicyParams& params, const Query& query,
                                std::span<const Draft> history, const StrategyHint& hint,
                                double temperature, const Draft& draft) {
  return weighted_log_prob_grad(params, query, history, hint, temperature, draft);
}

// Softmax of (W^T x + b) / temperature for one state.
Eigen::VectorXd action_probs(const PolicyParams& params, const Eigen::VectorXd& features,
                             double temperature);

}  // namespace mdraft

#endif  // MDRAFT_POLICY_HPP
