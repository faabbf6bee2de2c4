#include "mdraft/rl.hpp"

#include <algorithm>
#include <cmath>

#include "mdraft/log.hpp"

namespace mdraft {

namespace {

Eigen::VectorXd log_softmax_from_features(const PolicyParams& params,
                                          const Eigen::VectorXd& features, double temperature) {
  Eigen::VectorXd z = (params.weights.transpose() * features + params.bias) / temperature;
  const double mx = z.maxCoeff();
  const Eigen::ArrayXd shifted = z.array() - mx;
  const double lse = std::log(shifted.exp().sum());
  return (shifted - lse).matrix();
}

}  // namespace

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
              double discount, double lambda) {
  if (rewards.size() != values.size()) throw LengthMismatch("gae: rewards/values length mismatch");
  if (rewards.empty()) throw EmptyBatch("gae: empty episode");
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = (i + 1 == n) ? bootstrap : values[i + 1];
    const double delta = rewards[i] + discount * next_value - values[i];
    acc = delta + discount * lambda * acc;
    out.advantages[i] = acc;
    out.returns[i] = acc + values[i];
  }
  return out;
}

std::vector<double> normalize_advantages(std::span<const double> advantages) {
  std::vector<double> out(advantages.begin(), advantages.end());
  const std::size_t n = out.size();
  if (n < 2) return out;
  double mean = 0.0;
  for (double a : out) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : out) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n));
  for (double& a : out) a = (a - mean) / (stddev + 1e-8);
  return out;
}

PpoResult ppo_loss(std::span<const double> old_log_probs, std::span<const double> new_log_probs,
                   std::span<const double> advantages, double clip_epsilon,
                   std::vector<double>* dloss_dnewlp) {
  const std::size_t n = old_log_probs.size();
  if (new_log_probs.size() != n || advantages.size() != n) {
    throw LengthMismatch("ppo_loss: input length mismatch");
  }
  if (n == 0) throw EmptyBatch("ppo_loss: empty batch");

  PpoResult res;
  res.per_sample.resize(n);
  if (dloss_dnewlp) dloss_dnewlp->assign(n, 0.0);
  double ratio_sum = 0.0;
  int clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double delta = new_log_probs[i] - old_log_probs[i];
    bool clamped = false;
    if (delta > kLogRatioClamp || delta < -kLogRatioClamp) {
      delta = std::clamp(delta, -kLogRatioClamp, kLogRatioClamp);
      clamped = true;
      ++res.ratio_clamps;
    }
    const double ratio = std::exp(delta);
    const double a = advantages[i];
    const double unclipped = ratio * a;
    const double clipped_obj = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * a;
    const bool clip_active = clipped_obj < unclipped;
    const double objective = clip_active ? clipped_obj : unclipped;
    res.per_sample[i] = -objective;
    res.loss += -objective;
    ratio_sum += ratio;
    if (clip_active) ++clipped;
    if (dloss_dnewlp && !clip_active && !clamped) {
      // d(-objective)/d new_lp = -ratio * A on the unclipped branch; the
      // clipped branch is flat in new_lp, as is a clamped delta.
      (*dloss_dnewlp)[i] = -(ratio * a) / static_cast<double>(n);
    }
  }
  res.loss /= static_cast<double>(n);
  res.mean_ratio = ratio_sum / static_cast<double>(n);
  res.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  if (res.ratio_clamps > 0) {
    MDRAFT_WARN("ppo_loss: clamped ", res.ratio_clamps, " log-ratio deltas beyond +/-",
                kLogRatioClamp);
  }
  return res;
}

double imitation_loss(const PolicyParams& params, const Query& query,
                      std::span<const Draft> history, const StrategyHint& hint, double temperature,
                      const Draft& selected) {
  return -log_prob(params, query, history, hint, temperature, selected);
}

ValueParams ValueParams::zeros(int agent_id, int feature_dim) {
  ValueParams psi;
  psi.agent_id = agent_id;
  psi.weights = Eigen::VectorXd::Zero(feature_dim);
  return psi;
}

double value_estimate(const ValueParams& psi, const Eigen::VectorXd& features) {
  return psi.weights.dot(features) + psi.bias;
}

double value_loss_and_grad(const ValueParams& psi,
                           std::span<const Eigen::VectorXd* const> features,
                           std::span<const double> returns, ValueGrad* grad) {
  if (features.size() != returns.size()) {
    throw LengthMismatch("value_loss_and_grad: features/returns length mismatch");
  }
  if (features.empty()) throw EmptyBatch("value_loss_and_grad: empty batch");
  if (grad) {
    grad->weights = Eigen::VectorXd::Zero(psi.weights.size());
    grad->bias = 0.0;
  }
  double loss = 0.0;
  const double n = static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double err = value_estimate(psi, *features[i]) - returns[i];
    loss += err * err;
    if (grad) {
      grad->weights += (2.0 * err / n) * (*features[i]);
      grad->bias += 2.0 * err / n;
    }
  }
  return loss / n;
}

AdamW::AdamW(int dim, double learning_rate, double weight_decay)
    : lr_(learning_rate),
      weight_decay_(weight_decay),
      m_(Eigen::VectorXd::Zero(dim)),
      v_(Eigen::VectorXd::Zero(dim)) {}

void AdamW::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_.array().matrix() + (1.0 - beta2_) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  const Eigen::ArrayXd mhat = m_.array() / bc1;
  const Eigen::ArrayXd vhat = v_.array() / bc2;
  params.array() -= lr_ * (mhat / (vhat.sqrt() + eps_) + weight_decay_ * params.array());
}

void attach_advantages(DraftSample& sample, double discount, double lambda) {
  std::vector<double> rewards;
  std::vector<double> values;
  rewards.reserve(sample.traj.steps.size());
  values.reserve(sample.traj.steps.size());
  for (const TrajStep& s : sample.traj.steps) {
    rewards.push_back(s.reward);
    values.push_back(s.value_estimate);
  }
  GaeResult g = gae(rewards, values, 0.0, discount, lambda);
  sample.advantages = std::move(g.advantages);
  sample.returns = std::move(g.returns);
}

LossReport combined_loss_and_grad(const PolicyParams& params, const ValueParams& psi,
                                  std::span<const DraftSample> batch, const PPOConfig& config,
                                  PolicyGrad* dtheta, ValueGrad* dpsi) {
  if (batch.empty()) throw EmptyBatch("combined_loss_and_grad: empty batch");

  // Flatten the batch into per-step arrays in sample order.
  std::vector<double> old_lp;
  std::vector<double> new_lp;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<const Eigen::VectorXd*> features;
  struct StepIndex {
    std::size_t sample;
    std::size_t step;
  };
  std::vector<StepIndex> index;
  std::vector<Eigen::VectorXd> lsm_cache;
  int selected_count = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const DraftSample& sample = batch[s];
    if (sample.advantages.size() != sample.traj.steps.size() ||
        sample.returns.size() != sample.traj.steps.size()) {
      throw LengthMismatch("combined_loss_and_grad: advantages not attached");
    }
    if (sample.selected) ++selected_count;
    for (std::size_t t = 0; t < sample.traj.steps.size(); ++t) {
      const TrajStep& step = sample.traj.steps[t];
      old_lp.push_back(step.log_prob);
      advantages.push_back(sample.advantages[t]);
      returns.push_back(sample.returns[t]);
      features.push_back(&step.features);
      index.push_back({s, t});
      lsm_cache.push_back(log_softmax_from_features(params, step.features, sample.temperature));
      new_lp.push_back(lsm_cache.back()[step.action]);
    }
  }

  const std::vector<double> norm_adv = normalize_advantages(advantages);
  std::vector<double> dppo_dnewlp;
  const PpoResult ppo = ppo_loss(old_lp, new_lp, norm_adv, config.clip_epsilon,
                                 dtheta ? &dppo_dnewlp : nullptr);

  // Imitation: mean NLL over selected samples. Per-step log-prob coefficient
  // for sample s is -1/selected_count; the PPO coefficient comes per step.
  double imitation = 0.0;
  if (selected_count > 0) {
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (batch[index[i].sample].selected) imitation -= new_lp[i];
    }
    imitation /= selected_count;
  }

  ValueGrad vgrad;
  const double value =
      value_loss_and_grad(psi, features, returns, dpsi ? &vgrad : nullptr);

  LossReport report;
  report.ppo = ppo.loss;
  report.imitation = imitation;
  report.value = value;
  report.mean_ratio = ppo.mean_ratio;
  report.clip_fraction = ppo.clip_fraction;
  report.ratio_clamps = ppo.ratio_clamps;
  report.total = ppo.loss + config.imitation_weight * imitation + kValueLossWeight * value;
  if (!std::isfinite(report.total)) throw NonFiniteLoss("combined loss is not finite");

  if (dtheta) {
    FeatureLayout layout;
    layout.drafts_per_query =
        static_cast<int>(params.weights.rows()) - (1 + 3 + 9 + kValueBuckets + kActionCount);
    *dtheta = PolicyGrad::zeros(layout);
    for (std::size_t i = 0; i < index.size(); ++i) {
      const DraftSample& sample = batch[index[i].sample];
      double coef = dppo_dnewlp[i];
      if (sample.selected && selected_count > 0) {
        coef += -config.imitation_weight / selected_count;
      }
      if (coef == 0.0) continue;
      const TrajStep& step = sample.traj.steps[index[i].step];
      // d new_lp / d z_c = (1[c=a] - p_c) / temperature.
      Eigen::VectorXd dz = -lsm_cache[i].array().exp().matrix();
      dz[step.action] += 1.0;
      dz *= coef / sample.temperature;
      dtheta->bias += dz;
      dtheta->weights += step.features * dz.transpose();
    }
  }
  if (dpsi) {
    dpsi->weights = kValueLossWeight * vgrad.weights;
    dpsi->bias = kValueLossWeight * vgrad.bias;
  }
  return report;
}

CombinedUpdater::CombinedUpdater(const FeatureLayout& layout, const PPOConfig& config)
    : config_(config),
      theta_weights_opt_(layout.dim() * kActionCount, config.learning_rate, config.weight_decay),
      theta_bias_opt_(kActionCount, config.learning_rate, config.weight_decay),
      psi_weights_opt_(layout.dim(), config.learning_rate, config.weight_decay),
      psi_bias_opt_(1, config.learning_rate, config.weight_decay) {}

LossReport CombinedUpdater::update(PolicyParams& theta, ValueParams& psi,
                                   std::span<const DraftSample> batch) {
  if (batch.empty()) throw EmptyBatch("combined update: empty batch");
  for (const DraftSample& s : batch) {
    if (s.policy_version != theta.version) {
      throw StaleBatch("combined update: batch was collected under a different policy version");
    }
  }
  LossReport first;
  for (int pass = 0; pass < config_.epochs_per_batch; ++pass) {
    PolicyGrad dtheta;
    ValueGrad dpsi;
    const LossReport report = combined_loss_and_grad(theta, psi, batch, config_, &dtheta, &dpsi);
    if (pass == 0) first = report;
    Eigen::Map<Eigen::VectorXd> wflat(theta.weights.data(), theta.weights.size());
    const Eigen::Map<const Eigen::VectorXd> gwflat(dtheta.weights.data(), dtheta.weights.size());
    theta_weights_opt_.step(wflat, gwflat);
    theta_bias_opt_.step(theta.bias, dtheta.bias);
    psi_weights_opt_.step(psi.weights, dpsi.weights);
    Eigen::VectorXd bias_vec(1);
    bias_vec[0] = psi.bias;
    Eigen::VectorXd bias_grad(1);
    bias_grad[0] = dpsi.bias;
    psi_bias_opt_.step(bias_vec, bias_grad);
    psi.bias = bias_vec[0];
    ++theta.version;
    ++psi.version;
  }
  return first;
}

}  // namespace mdraft
