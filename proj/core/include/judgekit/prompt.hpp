#pragma once

// Prompt rendering and judge-output parsing.
//
// Output grammar (per variant) after optional leading whitespace:
//
//   <think> TRACE </think> CONCLUSION
//
// TRACE contains no think markers. CONCLUSION must contain, with no other
// think markers or [[...]] tokens:
//   judgment_plain     exactly one "Response (a|b) is better"
//   judgment_strength  exactly one "Response (a|b) is better" followed by
//                      exactly one [[k]], k in {1,2,3}
//   judgment_margin    exactly one "[[x]] and [[y]]", x,y in [0,100], x != y,
//                      and no "is better" clause; the higher score wins.
// Critic outputs follow the judgment grammar of the matching kind.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit::prompt {

enum class VariantKind { JudgmentPlain, JudgmentStrength, JudgmentMargin, CriticPlain, CriticStrength };

inline constexpr std::array<VariantKind, 5> kAllVariants{
    VariantKind::JudgmentPlain, VariantKind::JudgmentStrength, VariantKind::JudgmentMargin,
    VariantKind::CriticPlain, VariantKind::CriticStrength};

std::string_view to_string(VariantKind k) noexcept;
VariantKind parse_variant(std::string_view s);

constexpr bool is_judgment(VariantKind k) noexcept {
  return k == VariantKind::JudgmentPlain || k == VariantKind::JudgmentStrength ||
         k == VariantKind::JudgmentMargin;
}
constexpr bool is_critic(VariantKind k) noexcept { return !is_judgment(k); }
constexpr bool uses_strength(VariantKind k) noexcept {
  return k == VariantKind::JudgmentStrength || k == VariantKind::CriticStrength;
}

/// Judgment kind whose output grammar a critic kind must follow, and the
/// critic kind paired with a judgment kind (VariantMismatch for margin).
VariantKind judgment_of(VariantKind k);
VariantKind critic_of(VariantKind k);

struct TemplateVariant {
  VariantKind kind = VariantKind::JudgmentPlain;
  bool operator==(const TemplateVariant&) const = default;
};

/// Prompt texts with {instruction}, {response_a}, {response_b},
/// {target_choice} and {target_strength} placeholders.
class TemplateSet {
 public:
  /// Built-in wording. Replaceable: see load_dir.
  static TemplateSet defaults();

  /// Defaults overridden by any `<kind>.txt` found in `dir`
  /// (e.g. judgment_strength.txt). IoError if `dir` is not a directory.
  static TemplateSet load_dir(const std::filesystem::path& dir);

  const std::string& text(VariantKind k) const;
  void set(VariantKind k, std::string text);

 private:
  std::array<std::string, kAllVariants.size()> texts_;
};

/// Reads a template file verbatim.
std::string load_template(const std::filesystem::path& path);

/// Single-pass placeholder substitution. Substituted values are never
/// re-scanned; unknown {names} are left untouched.
std::string substitute(std::string_view tmpl,
                       std::span<const std::pair<std::string_view, std::string_view>> values);

std::string render_judgment_prompt(const PreferenceSample& sample, TemplateVariant variant,
                                   const TemplateSet& templates = TemplateSet::defaults());

std::string render_critic_prompt(const PreferenceSample& sample, Label target,
                                 std::optional<int> target_strength, TemplateVariant variant,
                                 const TemplateSet& templates = TemplateSet::defaults());

// Violation codes emitted by parse_verdict / check_format.
namespace code {
inline constexpr std::string_view kMissingThink = "MISSING_THINK";
inline constexpr std::string_view kDuplicateThink = "DUPLICATE_THINK";
inline constexpr std::string_view kUnclosedThink = "UNCLOSED_THINK";
inline constexpr std::string_view kMalformedThink = "MALFORMED_THINK";
inline constexpr std::string_view kThinkNotAtStart = "THINK_NOT_AT_START";
inline constexpr std::string_view kMissingChoice = "MISSING_CHOICE";
inline constexpr std::string_view kDuplicateChoice = "DUPLICATE_CHOICE";
inline constexpr std::string_view kMissingStrength = "MISSING_STRENGTH";
inline constexpr std::string_view kDuplicateStrength = "DUPLICATE_STRENGTH";
inline constexpr std::string_view kBadStrength = "BAD_STRENGTH";
inline constexpr std::string_view kMissingScores = "MISSING_SCORES";
inline constexpr std::string_view kDuplicateScores = "DUPLICATE_SCORES";
inline constexpr std::string_view kBadScore = "BAD_SCORE";
inline constexpr std::string_view kTieScores = "TIE_SCORES";
inline constexpr std::string_view kMalformedMarker = "MALFORMED_MARKER";
inline constexpr std::string_view kOutOfOrder = "OUT_OF_ORDER";
inline constexpr std::string_view kWrongVariantFormat = "WRONG_VARIANT_FORMAT";
}  // namespace code

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

/// Total: never throws on any input. Critic kinds parse with the grammar of
/// their judgment kind.
JudgeVerdict parse_verdict(std::string_view output, TemplateVariant variant);

struct FormatCheck {
  bool ok = false;
  std::vector<std::string> violations;
};

/// Same result as parse_verdict(...).format_ok / .violations.
FormatCheck check_format(std::string_view output, TemplateVariant variant);

/// Keeps the summarizing tail of a reasoning trace. With a </think> marker,
/// returns the trimmed text after the last one; otherwise returns the last
/// blank-line-separated block. Throws EmptyAfterClip on an empty result.
std::string clip_trace(std::string_view raw);

/// Compliant judge output for the variant; used for fixtures and mocks.
std::string compliant_output(std::string_view trace, Choice choice, TemplateVariant variant,
                             std::optional<int> strength = std::nullopt,
                             std::optional<std::pair<int, int>> scores = std::nullopt);

}  // namespace judgekit::prompt
