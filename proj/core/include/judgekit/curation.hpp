#pragma once

// Dataset curation: difficulty filtering, diversity sampling, accuracy
// filtering, and the rank-based binning used for strength tiers and
// quality groups.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "judgekit/embedding.hpp"
#include "judgekit/error.hpp"
#include "judgekit/inference.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/serialization.hpp"
#include "judgekit/types.hpp"

namespace judgekit::curation {

/// Keep iff at least one of the k verdicts fails to match the label
/// (invalid verdicts count as failures). ArityError unless verdicts.size() == k.
bool difficulty_filter(const PreferenceSample& sample, std::span<const JudgeVerdict> verdicts,
                       std::size_t k = 3);

/// Sequential least-similar sampling. The first id is a seeded uniform
/// draw; each next id is the unselected item with the lowest cosine
/// similarity to the most recently selected one, ties going to the
/// lexicographically smallest id. RangeError unless 1 <= n <= emb.size().
std::vector<std::string> diversity_sample(const EmbeddingSet& emb, std::size_t n, std::uint64_t seed);

/// Keep iff the annotator's verdict is well-formed and agrees with the label.
bool accuracy_filter(const PreferenceSample& sample, const JudgeVerdict& oracle_verdict) noexcept;

/// Rank bins: value v gets 1 + floor(k * #{u < v} / n). Equal values share
/// a bin, larger values never get a smaller bin. DomainError on empty input,
/// k < 1 or NaN.
std::vector<int> quantile_bins(std::span<const double> values, int k);

/// Tertiles of |diff|.
std::vector<int> strength_tiers(std::span<const double> score_diffs);

/// k-quantile group of score_chosen - score_rejected, 1 = smallest margin.
/// MissingScores when a sample lacks either score.
std::vector<int> quality_groups(std::span<const PreferenceSample> samples, int k = 4);

inline constexpr const char* kStageDifficulty = "difficulty";
inline constexpr const char* kStageDiversity = "diversity";
inline constexpr const char* kStageAccuracy = "accuracy";

struct FunnelReport {
  std::size_t initial = 0;
  std::size_t after_difficulty = 0;
  std::size_t after_diversity = 0;
  std::size_t after_accuracy = 0;
  std::map<std::string, std::vector<std::string>> dropped;
  /// False when a stage aborted; counts past that stage are then 0.
  bool complete = true;
  std::optional<std::string> failed_stage;

  bool operator==(const FunnelReport&) const = default;
};

Json encode(const FunnelReport& r);
FunnelReport decode_funnel_report(const Json& j);

struct FunnelConfig {
  std::size_t k = 3;
  double sample_temperature = 1.0;
  /// Diversity target; unset keeps every survivor.
  std::optional<std::size_t> target_n;
  std::uint64_t seed = 0;
  prompt::TemplateVariant variant{prompt::VariantKind::JudgmentPlain};
  /// Stage results are written here and reused by a rerun with the same
  /// inputs. Unset disables checkpointing.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// Embeddings come from `embeddings` when set, otherwise from `embedder`.
struct FunnelClients {
  inference::InferenceClient* judge = nullptr;
  inference::InferenceClient* annotator = nullptr;
  inference::InferenceClient* embedder = nullptr;
  const EmbeddingSet* embeddings = nullptr;
};

struct FunnelResult {
  std::vector<PreferenceSample> curated;  // input order
  FunnelReport report;
};

/// Raised when a stage cannot finish. Carries the report up to that stage.
class FunnelError : public Error {
 public:
  FunnelError(const std::string& what, FunnelReport partial) : Error(what), partial_(std::move(partial)) {}
  const FunnelReport& partial() const noexcept { return partial_; }

 private:
  FunnelReport partial_;
};

/// difficulty -> diversity -> accuracy.
FunnelResult run_funnel(std::span<const PreferenceSample> dataset, const FunnelClients& clients,
                        const FunnelConfig& cfg, const prompt::TemplateSet& templates = prompt::TemplateSet::defaults());

}  // namespace judgekit::curation
