#pragma once

// Rule-based rewards for judge outputs.
//
//   r_accuracy = 1 if judgment == label else 0
//   r_format   = 0 if format is right else -0.5
//   r_strength = |s_pred - s_golden|        (literal)
//              = -|s_pred - s_golden|       (penalty, default)
//   r_final    = alpha*r_accuracy + beta_fmt*r_format + gamma*r_strength
//
// With margin_enabled the strength term is replaced by the margin reward
// on the two predicted quality scores.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "judgekit/serialization.hpp"
#include "judgekit/types.hpp"

namespace judgekit::reward {

struct RewardBreakdown {
  double r_accuracy = 0.0;
  double r_format = 0.0;
  double r_strength = 0.0;
  std::optional<double> r_margin;
  double r_final = 0.0;
  RewardWeights weights;

  bool operator==(const RewardBreakdown&) const = default;
};

double accuracy_reward(const JudgeVerdict& verdict, Label label) noexcept;
double format_reward(bool format_ok) noexcept;

/// 0 when either value is absent. Throws DomainError outside {1,2,3}.
double strength_reward(std::optional<int> s_pred, std::optional<int> s_golden, StrengthMode mode);

/// Throws DomainError when a score is outside [0,100]. An invalid choice
/// counts as disagreeing with the label.
double margin_reward(std::pair<int, int> scores, Choice verdict_choice, Label label, bool corrected_sign);

RewardBreakdown final_reward(const JudgeVerdict& verdict, const PreferenceSample& sample,
                             const RewardWeights& weights);

/// Reward-log record: {"id","r_accuracy","r_format","r_strength","r_margin","r_final","weights"}.
Json encode_reward_log(std::string_view id, const RewardBreakdown& r);

/// Watches predicted quality scores for collapse onto the domain extremes
/// (0 or 100). Keeps the trailing `window` score pairs in a ring buffer.
/// Not thread-safe: one detector per stream.
class ExtremeScoreDetector {
 public:
  /// Throws DomainError unless window >= 1 and threshold_fraction in (0,1].
  ExtremeScoreDetector(std::size_t window, double threshold_fraction);

  void push(std::pair<int, int> scores);

  /// Fraction of individual scores in the window equal to 0 or 100.
  double extreme_fraction() const noexcept;
  /// True once the window holds data and extreme_fraction() >= threshold.
  bool alarmed() const noexcept;
  std::size_t size() const noexcept { return filled_; }

 private:
  std::vector<std::pair<int, int>> ring_;
  std::size_t next_ = 0;
  std::size_t filled_ = 0;
  std::size_t extremes_ = 0;
  double threshold_;
};

bool detect_score_extremes(std::span<const std::pair<int, int>> score_stream, std::size_t window,
                           double threshold_fraction);

}  // namespace judgekit::reward
