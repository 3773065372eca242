#include "judgekit/reward.hpp"

#include <cstdlib>

#include "judgekit/error.hpp"

namespace judgekit::reward {
namespace {

void check_strength(std::optional<int> s, const char* what) {
  if (s && (*s < 1 || *s > 3)) {
    throw DomainError(std::string(what) + " strength must be in {1,2,3}, got " + std::to_string(*s));
  }
}

int extremes_in(std::pair<int, int> s) noexcept {
  auto is_extreme = [](int x) { return x == 0 || x == 100; };
  return static_cast<int>(is_extreme(s.first)) + static_cast<int>(is_extreme(s.second));
}

}  // namespace

double accuracy_reward(const JudgeVerdict& verdict, Label label) noexcept {
  return matches(verdict.choice, label) ? 1.0 : 0.0;
}

double format_reward(bool format_ok) noexcept { return format_ok ? 0.0 : -0.5; }

double strength_reward(std::optional<int> s_pred, std::optional<int> s_golden, StrengthMode mode) {
  check_strength(s_pred, "predicted");
  check_strength(s_golden, "golden");
  if (!s_pred || !s_golden) {
    return 0.0;
  }
  const double distance = std::abs(*s_pred - *s_golden);
  return mode == StrengthMode::Literal ? distance : -distance;
}

double margin_reward(std::pair<int, int> scores, Choice verdict_choice, Label label, bool corrected_sign) {
  for (int s : {scores.first, scores.second}) {
    if (s < 0 || s > 100) {
      throw DomainError("quality score must be in [0,100], got " + std::to_string(s));
    }
  }
  const double d = std::abs(scores.first - scores.second);
  const bool agrees = matches(verdict_choice, label);
  if (corrected_sign) {
    return agrees ? d : -d;
  }
  return agrees ? -d : d;
}

RewardBreakdown final_reward(const JudgeVerdict& verdict, const PreferenceSample& sample,
                             const RewardWeights& weights) {
  RewardBreakdown r;
  r.weights = weights;
  r.r_accuracy = accuracy_reward(verdict, sample.label);
  r.r_format = format_reward(verdict.format_ok);
  if (weights.margin_enabled) {
    r.r_strength = 0.0;
    r.r_margin = verdict.quality_scores
                     ? margin_reward(*verdict.quality_scores, verdict.choice, sample.label,
                                     weights.margin_sign == MarginSign::Corrected)
                     : 0.0;
    r.r_final = weights.alpha * r.r_accuracy + weights.beta_fmt * r.r_format + *r.r_margin;
  } else {
    r.r_strength = strength_reward(verdict.strength_pred, sample.strength_golden, weights.strength_mode);
    r.r_final = weights.alpha * r.r_accuracy + weights.beta_fmt * r.r_format + weights.gamma * r.r_strength;
  }
  return r;
}

Json encode_reward_log(std::string_view id, const RewardBreakdown& r) {
  Json j;
  j["id"] = id;
  j["r_accuracy"] = r.r_accuracy;
  j["r_format"] = r.r_format;
  j["r_strength"] = r.r_strength;
  j["r_margin"] = r.r_margin ? Json(*r.r_margin) : Json(nullptr);
  j["r_final"] = r.r_final;
  j["weights"] = encode(r.weights);
  return j;
}

ExtremeScoreDetector::ExtremeScoreDetector(std::size_t window, double threshold_fraction)
    : threshold_(threshold_fraction) {
  if (window < 1) {
    throw DomainError("extreme-score window must be >= 1");
  }
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw DomainError("extreme-score threshold must lie in (0, 1]");
  }
  ring_.resize(window);
}

void ExtremeScoreDetector::push(std::pair<int, int> scores) {
  if (filled_ == ring_.size()) {
    extremes_ -= static_cast<std::size_t>(extremes_in(ring_[next_]));
  } else {
    ++filled_;
  }
  ring_[next_] = scores;
  extremes_ += static_cast<std::size_t>(extremes_in(scores));
  next_ = (next_ + 1) % ring_.size();
}

double ExtremeScoreDetector::extreme_fraction() const noexcept {
  if (filled_ == 0) {
    return 0.0;
  }
  return static_cast<double>(extremes_) / static_cast<double>(2 * filled_);
}

bool ExtremeScoreDetector::alarmed() const noexcept {
  return filled_ > 0 && extreme_fraction() >= threshold_;
}

bool detect_score_extremes(std::span<const std::pair<int, int>> score_stream, std::size_t window,
                           double threshold_fraction) {
  ExtremeScoreDetector detector(window, threshold_fraction);
  for (const auto& s : score_stream) {
    detector.push(s);
  }
  return detector.alarmed();
}

}  // namespace judgekit::reward
