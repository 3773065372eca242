#pragma once

// Objective values and closed-form gradients over supplied sequence-level
// log-probabilities. Nothing here updates parameters; an external trainer
// consumes the exported batches.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "judgekit/serialization.hpp"
#include "judgekit/types.hpp"

namespace judgekit::objectives {

/// log pi_theta(y_w|x), log pi_theta(y_l|x) and the reference counterparts.
struct PairLogProbs {
  double theta_w = 0.0;
  double theta_l = 0.0;
  double ref_w = 0.0;
  double ref_l = 0.0;
};

struct ObjectiveReport {
  double value = 0.0;
  std::map<std::string, double> per_term;
  std::map<std::string, double> grads;
};

/// log(sigmoid(z)), stable for large |z|.
double log_sigmoid(double z) noexcept;

/// SFT + DPO loss:
///   -theta_w - log sigmoid(beta * ((theta_w - ref_w) - (theta_l - ref_l)))
/// per_term: "sft", "dpo". grads: "theta_w", "theta_l".
/// Throws DomainError on positive log-probs or beta_dpo <= 0.
ObjectiveReport dpo_sft_loss(const PairLogProbs& lp, double beta_dpo);

/// Per-group advantages. Identical rewards give exact zeros.
std::vector<double> group_advantages(std::span<const double> rewards, AdvantageNorm norm);

/// Fills each output's advantage from the group rewards.
void assign_advantages(GroupRollout& rollout, AdvantageNorm norm);

/// exp(ref - theta) - (ref - theta) - 1; always >= 0.
double kl_low_var(double logp_theta, double logp_ref) noexcept;

/// Clipped group surrogate minus beta_kl times the mean low-variance KL.
/// per_term: "policy", "kl" (the mean KL, before scaling by beta_kl).
/// grads: "logp_theta[i]" for each output.
/// Throws SizeMismatch when outputs.size() != cfg.group_size and
/// DomainError when advantages are missing or log-probs are positive.
ObjectiveReport grpo_objective(const GroupRollout& rollout, const ObjectiveConfig& cfg);

Json encode(const ObjectiveReport& report);

/// Writes core-model JSONL records; returns the number written.
/// IoError names the path on failure.
std::size_t export_training_batch(std::span<const PreferencePair> pairs, const std::filesystem::path& path);
std::size_t export_training_batch(std::span<const GroupRollout> rollouts, const std::filesystem::path& path);

}  // namespace judgekit::objectives
