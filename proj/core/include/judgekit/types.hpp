#pragma once

// Shared domain types. Everything here is a plain value type.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace judgekit {

/// Which of the two responses is preferred. Never stored as an index.
enum class Label { A, B };

/// A parsed judgment. `Invalid` when the output names no single response.
enum class Choice { A, B, Invalid };

enum class TraceOrigin { Judge, Critic, External };

/// How the strength term is signed. `Literal` is |s_pred - s_golden|,
/// `Penalty` is its negation.
enum class StrengthMode { Penalty, Literal };

/// Sign convention of the margin reward. `Literal` gives -d to correct
/// judgments and +d to wrong ones; `Corrected` flips both.
enum class MarginSign { Literal, Corrected };

enum class AdvantageNorm { GroupStandardize, GroupCenter };

enum class Provenance { CriticGuided, Sampled };

constexpr Label other(Label l) noexcept { return l == Label::A ? Label::B : Label::A; }
constexpr Choice to_choice(Label l) noexcept { return l == Label::A ? Choice::A : Choice::B; }
constexpr bool matches(Choice c, Label l) noexcept { return c == to_choice(l); }

std::string_view to_string(Label l) noexcept;
std::string_view to_string(Choice c) noexcept;
std::string_view to_string(TraceOrigin o) noexcept;
std::string_view to_string(StrengthMode m) noexcept;
std::string_view to_string(MarginSign s) noexcept;
std::string_view to_string(AdvantageNorm n) noexcept;
std::string_view to_string(Provenance p) noexcept;

// Inverse of to_string. Throw DomainError on unknown names.
Label parse_label(std::string_view s);
Choice parse_choice(std::string_view s);
TraceOrigin parse_trace_origin(std::string_view s);
StrengthMode parse_strength_mode(std::string_view s);
MarginSign parse_margin_sign(std::string_view s);
AdvantageNorm parse_advantage_norm(std::string_view s);
Provenance parse_provenance(std::string_view s);

/// One instruction with two candidate responses and a golden preference.
struct PreferenceSample {
  std::string id;
  std::string instruction;
  std::string response_a;
  std::string response_b;
  Label label = Label::A;
  std::optional<int> strength_golden;
  std::optional<std::string> category;
  std::optional<double> score_a;
  std::optional<double> score_b;
  std::string source;

  bool operator==(const PreferenceSample&) const = default;
};

/// Same sample with the responses (and their scores) swapped and the label remapped.
PreferenceSample swapped(const PreferenceSample& s);

struct ThinkingTrace {
  std::string raw;
  std::optional<std::string> clipped;
  TraceOrigin origin = TraceOrigin::Judge;

  bool operator==(const ThinkingTrace&) const = default;
};

struct JudgeVerdict {
  Choice choice = Choice::Invalid;
  std::optional<int> strength_pred;
  std::optional<std::pair<int, int>> quality_scores;
  bool format_ok = false;
  std::vector<std::string> violations;
  ThinkingTrace trace;

  bool operator==(const JudgeVerdict&) const = default;
};

struct RewardWeights {
  double alpha = 1.0;
  double beta_fmt = 1.0;
  double gamma = 0.0;
  StrengthMode strength_mode = StrengthMode::Penalty;
  bool margin_enabled = false;
  MarginSign margin_sign = MarginSign::Literal;

  bool operator==(const RewardWeights&) const = default;
};

struct ObjectiveConfig {
  double beta_dpo = 0.1;
  double eps_clip = 0.2;
  double beta_kl = 0.001;
  int group_size = 8;
  AdvantageNorm advantage_norm = AdvantageNorm::GroupStandardize;

  /// Throws DomainError when an invariant does not hold.
  void validate() const;

  bool operator==(const ObjectiveConfig&) const = default;
};

/// (prompt, chosen, rejected) judgment-trace pair for offline training.
struct PreferencePair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  Provenance provenance = Provenance::CriticGuided;
  int iteration = 1;
  // Source sample; lets a resumed run skip samples it already paired.
  std::optional<std::string> sample_id;

  bool operator==(const PreferencePair&) const = default;
};

struct RolloutOutput {
  std::string text;
  double logp_theta = 0.0;
  double logp_old = 0.0;
  double logp_ref = 0.0;
  double reward = 0.0;
  std::optional<double> advantage;

  bool operator==(const RolloutOutput&) const = default;
};

/// One prompt with G sampled outputs and their sequence-level log-probs.
struct GroupRollout {
  std::string prompt_id;
  std::vector<RolloutOutput> outputs;

  /// Throws SizeMismatch when outputs.size() != group_size and DomainError
  /// on a positive log-prob.
  void validate(int group_size) const;

  bool operator==(const GroupRollout&) const = default;
};

// Stable violation codes returned by validate_sample / validate_dataset.
namespace violation {
inline constexpr std::string_view kBadStrength = "BAD_STRENGTH";
inline constexpr std::string_view kDuplicateResponses = "DUPLICATE_RESPONSES";
inline constexpr std::string_view kEmptyId = "EMPTY_ID";
inline constexpr std::string_view kDuplicateId = "DUPLICATE_ID";
}  // namespace violation

std::vector<std::string> validate_sample(const PreferenceSample& sample);

struct DatasetViolation {
  std::size_t index;
  std::string id;
  std::vector<std::string> codes;
};

/// validate_sample over every sample plus id uniqueness. Only samples with
/// at least one violation appear in the result.
std::vector<DatasetViolation> validate_dataset(std::span<const PreferenceSample> samples);

}  // namespace judgekit
