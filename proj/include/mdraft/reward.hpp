#ifndef MDRAFT_REWARD_HPP
#define MDRAFT_REWARD_HPP

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mdraft/draft.hpp"
#include "mdraft/error.hpp"
#include "mdraft/peer.hpp"

namespace mdraft {

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// Feature vector: [5 criterion means, mean peer scalar, draft length / 8,
// normalized diversity rank among the agent's K sibling drafts, temperature,
// strategy one-hot(K)]. Uses only information available before execution.
inline int reward_feature_dim(int drafts_per_query) { return 9 + drafts_per_query; }

struct RewardFeatures {
  DraftRef ref;
  Eigen::VectorXd x;
};

// siblings must be the owning agent's full draft set for this query,
// including the draft itself. The diversity rank orders siblings by their
// mean token distance to the others (ties by draft_index) and normalizes to
// [0, 1]; a single draft ranks 0.
RewardFeatures featurize(const Draft& draft, const AggregatedEval& agg,
                         std::span<const Draft> siblings, int drafts_per_query);

// Two-layer perceptron with tanh hidden units and a logistic output.
struct RewardModelParams {
  int version = 0;
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }

  static RewardModelParams zeros(int input_dim, int hidden_dim);
  static RewardModelParams initial(int input_dim, int hidden_dim, std::uint64_t seed,
                                   double scale = 0.1);
};

// Random init plus one hand-wired hidden unit that reads the mean-peer-scalar
// feature, so the untrained model already ranks drafts by peer consensus.
// Without that prior, argmax selection trained only on its own picks can lock
// onto an arbitrary initial ranking and never execute a good draft.
RewardModelParams initial_reward_model(int drafts_per_query, int hidden_dim, std::uint64_t seed,
                                       double scale);

struct RewardPrediction {
  DraftRef ref;
  double value = 0.0;  // in (0, 1)
};

double predict(const RewardModelParams& phi, const Eigen::VectorXd& features);

// Argmax by value; ties broken by lowest (agent_id, draft_index). Throws
// EmptyInput on an empty list.
const RewardPrediction& select(std::span<const RewardPrediction> predictions);

struct RewardExample {
  Eigen::VectorXd x;
  double target = 0.0;  // realized task reward, in [0, 1]
};

struct RewardModelGrad {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
};

// Mean squared error over the batch; analytic gradient through grad.
double reward_loss_and_grad(const RewardModelParams& phi, std::span<const RewardExample> batch,
                            RewardModelGrad* grad = nullptr);

// One plain gradient step on batch MSE; returns the pre-step loss and
// increments the version. Throws EmptyBatch, and NonFiniteLoss without
// touching phi when the loss is not finite.
double update_reward_model(RewardModelParams& phi, std::span<const RewardExample> batch,
                           double learning_rate);

}  // namespace mdraft

#endif  // MDRAFT_REWARD_HPP
