#ifndef MDRAFT_RL_HPP
#define MDRAFT_RL_HPP

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mdraft/error.hpp"
#include "mdraft/policy.hpp"

namespace mdraft {

struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& what) : Error(what) {}
};
struct StaleBatch : Error {
  explicit StaleBatch(const std::string& what) : Error(what) {}
};

struct PPOConfig {
  double clip_epsilon = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double imitation_weight = 0.5;
  double learning_rate = 0.03;
  double weight_decay = 1e-4;
  int epochs_per_batch = 4;
};

// Value loss carries a fixed 0.5 weight in the combined objective.
inline constexpr double kValueLossWeight = 0.5;
// Log-ratio deltas beyond this are clamped (with a warning), never silently.
inline constexpr double kLogRatioClamp = 20.0;

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values
};

// delta_t = r_t + discount * v_{t+1} - v_t with v_T = bootstrap;
// A_t = sum_l (discount * lambda)^l delta_{t+l}.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double discount, double lambda);

// Mean 0, standard deviation 1 when the batch has more than one element;
// batches of size one pass through unchanged.
std::vector<double> normalize_advantages(std::span<const double> advantages);

struct PpoResult {
  double loss = 0.0;
  std::vector<double> per_sample;  // per-sample loss terms, -objective_t
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;  // fraction of samples where the clipped branch is active
  int ratio_clamps = 0;        // log-ratio deltas clamped to +/- kLogRatioClamp
};

// Clipped-surrogate loss over advantages as given (the combined update
// normalizes its batch before calling this). When dloss_dnewlp is non-null it
// receives d loss / d new_log_probs per sample.
PpoResult ppo_loss(std::span<const double> old_log_probs, std::span<const double> new_log_probs,
                   std::span<const double> advantages, double clip_epsilon,
                   std::vector<double>* dloss_dnewlp = nullptr);

// Negative log-likelihood of the selected draft; >= 0.
double imitation_loss(const PolicyParams& params, const Query& query,
                      std::span<const Draft> history, const StrategyHint& hint, double temperature,
                      const Draft& selected);

struct ValueParams {
  int agent_id = 0;
  int version = 0;
  Eigen::VectorXd weights;
  double bias = 0.0;

  static ValueParams zeros(int agent_id, int feature_dim);
};

struct ValueGrad {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

double value_estimate(const ValueParams& psi, const Eigen::VectorXd& features);

// MSE between linear critic outputs and returns; analytic gradient through
// grad when non-null.
double value_loss_and_grad(const ValueParams& psi,
                           std::span<const Eigen::VectorXd* const> features,
                           std::span<const double> returns, ValueGrad* grad = nullptr);

// Adam with decoupled weight decay over a flat parameter vector.
class AdamW {
 public:
  AdamW(int dim, double learning_rate, double weight_decay);
  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad);
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_;
  double weight_decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  int t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

// One draft's contribution to an update batch. Old log-probs, features and
// per-step rewards live in the trajectory; advantages/returns are attached by
// attach_advantages once the draft-level reward is known.
struct DraftSample {
  TrajectoryRecord traj;
  double temperature = 0.5;
  std::vector<double> advantages;
  std::vector<double> returns;
  int policy_version = 0;
  bool selected = false;  // imitation target; carries the realized task reward
};

// Runs gae over the trajectory's rewards and value estimates (bootstrap 0).
void attach_advantages(DraftSample& sample, double discount, double lambda);

struct LossReport {
  double total = 0.0;
  double ppo = 0.0;
  double imitation = 0.0;
  double value = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  int ratio_clamps = 0;
};

// Combined objective: ppo + imitation_weight * imitation + 0.5 * value MSE.
// Advantages are batch-normalized internally. New log-probs come from the
// stored state features, so the batch must carry trajectories produced by the
// same feature layout as params.
LossReport combined_loss_and_grad(const PolicyParams& params, const ValueParams& psi,
                                  std::span<const DraftSample> batch, const PPOConfig& config,
                                  PolicyGrad* dtheta = nullptr, ValueGrad* dpsi = nullptr);

// Owns the AdamW state for one agent's policy and critic. update() makes
// epochs_per_batch passes; each pass recomputes the loss at the current
// parameters and applies one optimizer step, incrementing both versions.
// The returned report is from the first pass (loss before any step).
class CombinedUpdater {
 public:
  CombinedUpdater(const FeatureLayout& layout, const PPOConfig& config);

  LossReport update(PolicyParams& theta, ValueParams& psi, std::span<const DraftSample> batch);

  const PPOConfig& config() const { return config_; }

 private:
  PPOConfig config_;
  AdamW theta_weights_opt_;
  AdamW theta_bias_opt_;
  AdamW psi_weights_opt_;
  AdamW psi_bias_opt_;
};

}  // namespace mdraft

#endif  // MDRAFT_RL_HPP
