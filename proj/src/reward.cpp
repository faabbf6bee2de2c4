#include "mdraft/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mdraft/rng.hpp"
#include "mdraft/text.hpp"

namespace mdraft {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean (1 - Jaccard) of each sibling against the others; the rank of the
// draft within that ordering, ties by draft_index.
double diversity_rank(const Draft& draft, std::span<const Draft> siblings) {
  const std::size_t n = siblings.size();
  if (n <= 1) return 0.0;
  std::vector<std::set<std::string>> tokens(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::string& t : lower_tokens(draft_text(siblings[i]))) tokens[i].insert(std::move(t));
  }
  std::vector<double> score(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      std::size_t common = 0;
      for (const std::string& t : tokens[i]) common += tokens[j].count(t);
      const std::size_t unions = tokens[i].size() + tokens[j].size() - common;
      const double jaccard =
          unions == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(unions);
      score[i] += 1.0 - jaccard;
    }
    score[i] /= static_cast<double>(n - 1);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] < score[b];
    return siblings[a].draft_index < siblings[b].draft_index;
  });
  for (std::size_t rank = 0; rank < n; ++rank) {
    const Draft& s = siblings[order[rank]];
    if (s.agent_id == draft.agent_id && s.draft_index == draft.draft_index) {
      return static_cast<double>(rank) / static_cast<double>(n - 1);
    }
  }
  return 0.0;  // draft not among siblings; treat as least diverse
}

}  // namespace

RewardFeatures featurize(const Draft& draft, const AggregatedEval& agg,
                         std::span<const Draft> siblings, int drafts_per_query) {
  RewardFeatures f;
  f.ref = agg.draft_ref;
  f.x = Eigen::VectorXd::Zero(reward_feature_dim(drafts_per_query));
  for (int i = 0; i < kCriteria; ++i) f.x[i] = agg.criteria_mean[i];
  f.x[5] = agg.scalar_mean;
  f.x[6] = static_cast<double>(draft.steps.size()) / 8.0;
  f.x[7] = diversity_rank(draft, siblings);
  f.x[8] = draft.meta.temperature;
  const int slot = std::clamp(draft.meta.strategy_id, 0, drafts_per_query - 1);
  f.x[9 + slot] = 1.0;
  return f;
}

RewardModelParams RewardModelParams::zeros(int input_dim, int hidden_dim) {
  RewardModelParams p;
  p.w1 = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.w2 = Eigen::VectorXd::Zero(hidden_dim);
  return p;
}

RewardModelParams RewardModelParams::initial(int input_dim, int hidden_dim, std::uint64_t seed,
                                             double scale) {
  RewardModelParams p = zeros(input_dim, hidden_dim);
  Rng rng(seed);
  for (int h = 0; h < hidden_dim; ++h) {
    for (int i = 0; i < input_dim; ++i) p.w1(h, i) = rng.uniform(-scale, scale);
  }
  for (int h = 0; h < hidden_dim; ++h) p.w2[h] = rng.uniform(-scale, scale);
  return p;
}

RewardModelParams initial_reward_model(int drafts_per_query, int hidden_dim, std::uint64_t seed,
                                       double scale) {
  RewardModelParams p =
      RewardModelParams::initial(reward_feature_dim(drafts_per_query), hidden_dim, seed, scale);
  // Unit 0: tanh(2 * (scalar_mean - 0.5)) with unit output weight. Feature 5
  // is the aggregated peer scalar.
  p.w1.row(0).setZero();
  p.w1(0, 5) = 2.0;
  p.b1[0] = -1.0;
  p.w2[0] = 1.0;
  return p;
}

double predict(const RewardModelParams& phi, const Eigen::VectorXd& features) {
  if (features.size() != phi.w1.cols()) {
    throw DimensionMismatch("predict: feature dimension does not match the model");
  }
  const Eigen::VectorXd h = (phi.w1 * features + phi.b1).array().tanh().matrix();
  return sigmoid(phi.w2.dot(h) + phi.b2);
}

const RewardPrediction& select(std::span<const RewardPrediction> predictions) {
  if (predictions.empty()) throw EmptyInput("select: no predictions");
  const RewardPrediction* best = &predictions.front();
  for (const RewardPrediction& p : predictions.subspan(1)) {
    if (p.value > best->value) {
      best = &p;
    } else if (p.value == best->value) {
      if (std::make_pair(p.ref.agent_id, p.ref.draft_index) <
          std::make_pair(best->ref.agent_id, best->ref.draft_index)) {
        best = &p;
      }
    }
  }
  return *best;
}

double reward_loss_and_grad(const RewardModelParams& phi, std::span<const RewardExample> batch,
                            RewardModelGrad* grad) {
  if (batch.empty()) throw EmptyBatch("reward model: empty batch");
  if (grad) {
    grad->w1 = Eigen::MatrixXd::Zero(phi.w1.rows(), phi.w1.cols());
    grad->b1 = Eigen::VectorXd::Zero(phi.b1.size());
    grad->w2 = Eigen::VectorXd::Zero(phi.w2.size());
    grad->b2 = 0.0;
  }
  double loss = 0.0;
  const double n = static_cast<double>(batch.size());
  for (const RewardExample& ex : batch) {
    if (ex.x.size() != phi.w1.cols()) {
      throw DimensionMismatch("reward model: feature dimension mismatch");
    }
    const Eigen::VectorXd pre = phi.w1 * ex.x + phi.b1;
    const Eigen::VectorXd h = pre.array().tanh().matrix();
    const double y = sigmoid(phi.w2.dot(h) + phi.b2);
    const double err = y - ex.target;
    loss += err * err;
    if (grad) {
      const double dz = 2.0 * err * y * (1.0 - y) / n;
      grad->w2 += dz * h;
      grad->b2 += dz;
      const Eigen::VectorXd dh = dz * phi.w2;
      const Eigen::VectorXd dpre =
          (dh.array() * (1.0 - h.array().square())).matrix();
      grad->b1 += dpre;
      grad->w1 += dpre * ex.x.transpose();
    }
  }
  return loss / n;
}

double update_reward_model(RewardModelParams& phi, std::span<const RewardExample> batch,
                           double learning_rate) {
  RewardModelGrad grad;
  const double loss = reward_loss_and_grad(phi, batch, &grad);
  if (!std::isfinite(loss)) throw NonFiniteLoss("reward model loss is not finite");
  phi.w1 -= learning_rate * grad.w1;
  phi.b1 -= learning_rate * grad.b1;
  phi.w2 -= learning_rate * grad.w2;
  phi.b2 -= learning_rate * grad.b2;
  ++phi.version;
  return loss;
}

}  // namespace mdraft
