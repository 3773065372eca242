#include "judgekit/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "judgekit/error.hpp"

namespace judgekit::objectives {
namespace {

constexpr double kStdEpsilon = 1e-8;

void require_log_prob(double v, const char* name) {
  if (!(v <= 0.0)) {
    throw DomainError(std::string(name) + " must be a log-probability (<= 0)");
  }
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double log_sigmoid(double z) noexcept {
  // log sigma(z) = -softplus(-z)
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

ObjectiveReport dpo_sft_loss(const PairLogProbs& lp, double beta_dpo) {
  if (!(beta_dpo > 0.0)) {
    throw DomainError("beta_dpo must be > 0");
  }
  require_log_prob(lp.theta_w, "theta_w");
  require_log_prob(lp.theta_l, "theta_l");
  require_log_prob(lp.ref_w, "ref_w");
  require_log_prob(lp.ref_l, "ref_l");

  const double margin = beta_dpo * ((lp.theta_w - lp.ref_w) - (lp.theta_l - lp.ref_l));
  const double sft = -lp.theta_w;
  const double dpo = -log_sigmoid(margin);
  // d(-log sigma(m))/dm = -(1 - sigma(m)) = -sigma(-m)
  const double pull = sigmoid(-margin);

  ObjectiveReport r;
  r.value = sft + dpo;
  r.per_term["sft"] = sft;
  r.per_term["dpo"] = dpo;
  r.grads["theta_w"] = -1.0 - beta_dpo * pull;
  r.grads["theta_l"] = beta_dpo * pull;
  return r;
}

std::vector<double> group_advantages(std::span<const double> rewards, AdvantageNorm norm) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) {
    return out;
  }
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    return out;
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) {
    mean += r;
  }
  mean /= n;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = rewards[i] - mean;
  }
  if (norm == AdvantageNorm::GroupStandardize) {
    double var = 0.0;
    for (double c : out) {
      var += c * c;
    }
    const double denom = std::sqrt(var / n) + kStdEpsilon;
    for (double& a : out) {
      a /= denom;
    }
  }
  return out;
}

void assign_advantages(GroupRollout& rollout, AdvantageNorm norm) {
  std::vector<double> rewards;
  rewards.reserve(rollout.outputs.size());
  for (const auto& o : rollout.outputs) {
    rewards.push_back(o.reward);
  }
  const auto adv = group_advantages(rewards, norm);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    rollout.outputs[i].advantage = adv[i];
  }
}

double kl_low_var(double logp_theta, double logp_ref) noexcept {
  const double d = logp_ref - logp_theta;
  return std::expm1(d) - d;
}

ObjectiveReport grpo_objective(const GroupRollout& rollout, const ObjectiveConfig& cfg) {
  cfg.validate();
  rollout.validate(cfg.group_size);
  const double g = static_cast<double>(cfg.group_size);
  const double lo = 1.0 - cfg.eps_clip;
  const double hi = 1.0 + cfg.eps_clip;

  ObjectiveReport r;
  double policy = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < rollout.outputs.size(); ++i) {
    const auto& o = rollout.outputs[i];
    if (!o.advantage) {
      throw DomainError("rollout '" + rollout.prompt_id + "' output " + std::to_string(i) +
                        " has no advantage; run group_advantages first");
    }
    const double a = *o.advantage;
    const double ratio = std::exp(o.logp_theta - o.logp_old);
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, lo, hi) * a;
    // The clipped branch is constant in logp_theta, so its slope is zero.
    const bool unclipped_active = unclipped <= clipped;
    policy += unclipped_active ? unclipped : clipped;
    kl += kl_low_var(o.logp_theta, o.logp_ref);

    const double d_policy = unclipped_active ? unclipped / g : 0.0;
    const double d_kl = (1.0 - std::exp(o.logp_ref - o.logp_theta)) / g;
    r.grads["logp_theta[" + std::to_string(i) + "]"] = d_policy - cfg.beta_kl * d_kl;
  }
  policy /= g;
  kl /= g;
  r.per_term["policy"] = policy;
  r.per_term["kl"] = kl;
  r.value = policy - cfg.beta_kl * kl;
  return r;
}

Json encode(const ObjectiveReport& report) {
  Json j;
  j["value"] = report.value;
  Json terms = Json::object();
  for (const auto& [k, v] : report.per_term) {
    terms[k] = v;
  }
  Json grads = Json::object();
  for (const auto& [k, v] : report.grads) {
    grads[k] = v;
  }
  j["per_term"] = std::move(terms);
  j["grads"] = std::move(grads);
  return j;
}

std::size_t export_training_batch(std::span<const PreferencePair> pairs, const std::filesystem::path& path) {
  JsonlWriter writer(path);
  for (const auto& p : pairs) {
    writer.write(judgekit::encode(p));
  }
  return writer.count();
}

std::size_t export_training_batch(std::span<const GroupRollout> rollouts, const std::filesystem::path& path) {
  JsonlWriter writer(path);
  for (const auto& r : rollouts) {
    writer.write(judgekit::encode(r));
  }
  return writer.count();
}

}  // namespace judgekit::objectives
