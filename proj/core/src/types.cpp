#include "judgekit/types.hpp"

#include <array>
#include <cmath>
#include <unordered_set>

#include "judgekit/error.hpp"

namespace judgekit {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) {
      return value;
    }
  }
  throw DomainError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Label>, 2> kLabels{{{"A", Label::A}, {"B", Label::B}}};
constexpr std::array<std::pair<std::string_view, Choice>, 3> kChoices{
    {{"A", Choice::A}, {"B", Choice::B}, {"invalid", Choice::Invalid}}};
constexpr std::array<std::pair<std::string_view, TraceOrigin>, 3> kOrigins{
    {{"judge", TraceOrigin::Judge}, {"critic", TraceOrigin::Critic}, {"external", TraceOrigin::External}}};
constexpr std::array<std::pair<std::string_view, StrengthMode>, 2> kStrengthModes{
    {{"penalty", StrengthMode::Penalty}, {"literal", StrengthMode::Literal}}};
constexpr std::array<std::pair<std::string_view, MarginSign>, 2> kMarginSigns{
    {{"literal", MarginSign::Literal}, {"corrected", MarginSign::Corrected}}};
constexpr std::array<std::pair<std::string_view, AdvantageNorm>, 2> kNorms{
    {{"group_standardize", AdvantageNorm::GroupStandardize}, {"group_center", AdvantageNorm::GroupCenter}}};
constexpr std::array<std::pair<std::string_view, Provenance>, 2> kProvenances{
    {{"critic_guided", Provenance::CriticGuided}, {"sampled", Provenance::Sampled}}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum value, const std::array<std::pair<std::string_view, Enum>, N>& table) noexcept {
  for (const auto& [name, v] : table) {
    if (v == value) {
      return name;
    }
  }
  return "?";
}

}  // namespace

std::string_view to_string(Label l) noexcept { return name_of(l, kLabels); }
std::string_view to_string(Choice c) noexcept { return name_of(c, kChoices); }
std::string_view to_string(TraceOrigin o) noexcept { return name_of(o, kOrigins); }
std::string_view to_string(StrengthMode m) noexcept { return name_of(m, kStrengthModes); }
std::string_view to_string(MarginSign s) noexcept { return name_of(s, kMarginSigns); }
std::string_view to_string(AdvantageNorm n) noexcept { return name_of(n, kNorms); }
std::string_view to_string(Provenance p) noexcept { return name_of(p, kProvenances); }

Label parse_label(std::string_view s) { return parse_enum(s, kLabels, "label"); }
Choice parse_choice(std::string_view s) { return parse_enum(s, kChoices, "choice"); }
TraceOrigin parse_trace_origin(std::string_view s) { return parse_enum(s, kOrigins, "trace origin"); }
StrengthMode parse_strength_mode(std::string_view s) { return parse_enum(s, kStrengthModes, "strength mode"); }
MarginSign parse_margin_sign(std::string_view s) { return parse_enum(s, kMarginSigns, "margin sign"); }
AdvantageNorm parse_advantage_norm(std::string_view s) { return parse_enum(s, kNorms, "advantage norm"); }
Provenance parse_provenance(std::string_view s) { return parse_enum(s, kProvenances, "provenance"); }

PreferenceSample swapped(const PreferenceSample& s) {
  PreferenceSample out = s;
  std::swap(out.response_a, out.response_b);
  std::swap(out.score_a, out.score_b);
  out.label = other(s.label);
  return out;
}

void ObjectiveConfig::validate() const {
  if (!(beta_dpo > 0.0)) {
    throw DomainError("beta_dpo must be > 0");
  }
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) {
    throw DomainError("eps_clip must lie in (0, 1)");
  }
  if (!(beta_kl >= 0.0)) {
    throw DomainError("beta_kl must be >= 0");
  }
  if (group_size < 1) {
    throw DomainError("group_size must be >= 1");
  }
}

void GroupRollout::validate(int group_size) const {
  if (outputs.size() != static_cast<std::size_t>(group_size)) {
    throw SizeMismatch("rollout '" + prompt_id + "' has " + std::to_string(outputs.size()) +
                       " outputs, expected group size " + std::to_string(group_size));
  }
  for (const auto& o : outputs) {
    if (!(o.logp_theta <= 0.0) || !(o.logp_old <= 0.0) || !(o.logp_ref <= 0.0)) {
      throw DomainError("rollout '" + prompt_id + "' has a log-prob > 0 or NaN");
    }
  }
}

std::vector<std::string> validate_sample(const PreferenceSample& sample) {
  std::vector<std::string> codes;
  if (sample.id.empty()) {
    codes.emplace_back(violation::kEmptyId);
  }
  if (sample.strength_golden && (*sample.strength_golden < 1 || *sample.strength_golden > 3)) {
    codes.emplace_back(violation::kBadStrength);
  }
  if (sample.response_a == sample.response_b) {
    codes.emplace_back(violation::kDuplicateResponses);
  }
  return codes;
}

std::vector<DatasetViolation> validate_dataset(std::span<const PreferenceSample> samples) {
  std::vector<DatasetViolation> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto codes = validate_sample(samples[i]);
    if (!seen.insert(samples[i].id).second) {
      codes.emplace_back(violation::kDuplicateId);
    }
    if (!codes.empty()) {
      out.push_back({i, samples[i].id, std::move(codes)});
    }
  }
  return out;
}

}  // namespace judgekit
