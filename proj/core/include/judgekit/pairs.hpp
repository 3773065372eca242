#pragma once

// (chosen, rejected) judgment-trace pairs for offline preference training.
//
// Critic-guided: the judge answers once. A correct answer becomes `chosen`
// and the critic is asked to argue for the wrong response; an incorrect
// answer becomes `rejected` and the critic argues for the right one.
//
// Sampling: n judge answers; one correct and one incorrect answer are drawn
// at random. Samples where all answers agree yield no pair.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/inference.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/serialization.hpp"
#include "judgekit/types.hpp"

namespace judgekit::pairs {

enum class PairMode { Critic, Sampling };

std::string_view to_string(PairMode m) noexcept;
/// "critic" or "sampling"; DomainError otherwise.
PairMode parse_pair_mode(std::string_view s);

/// Strength handed to the critic when the golden strength is unknown, and
/// always for the rejected side.
inline constexpr int kDefaultCriticStrength = 2;

/// Critic prompt for a sample. The critic defends `target`; with a strength
/// variant it gets the golden strength when it writes the chosen side and
/// kDefaultCriticStrength otherwise.
std::string critic_prompt_for(const PreferenceSample& sample, Label target, prompt::TemplateVariant judgment_variant,
                              const prompt::TemplateSet& templates = prompt::TemplateSet::defaults());

/// Whether a critic output argues for `target` in the judgment grammar.
bool critic_complies(std::string_view output, Label target, prompt::TemplateVariant judgment_variant);

/// Combines an existing judge output with a critic output.
/// Throws CriticNoncompliant when the critic did not argue for the side it
/// was asked to.
PreferencePair assemble_critic_pair(const PreferenceSample& sample, const std::string& judge_output,
                                    const std::string& critic_output, prompt::TemplateVariant variant,
                                    const prompt::TemplateSet& templates = prompt::TemplateSet::defaults());

/// One judge call and one critic call (plus up to `critic_retries` more on
/// noncompliance). `variant` is the judgment variant; the critic uses the
/// matching critic template. Throws CriticNoncompliant or InferenceError.
PreferencePair build_pair_critic(const PreferenceSample& sample, inference::InferenceClient& judge,
                                 inference::InferenceClient& critic, prompt::TemplateVariant variant,
                                 const prompt::TemplateSet& templates = prompt::TemplateSet::defaults(),
                                 int critic_retries = 0);

/// Picks one correct and one incorrect output from `outputs` (all answers to
/// the same prompt), seeded per sample. nullopt when either set is empty.
std::optional<PreferencePair> select_sampled_pair(const PreferenceSample& sample, const std::string& prompt,
                                                  std::span<const std::string> outputs,
                                                  prompt::TemplateVariant variant, std::uint64_t seed);

/// n judge calls then select_sampled_pair. DomainError when n < 2.
std::optional<PreferencePair> build_pair_sampling(const PreferenceSample& sample, inference::InferenceClient& judge,
                                                  std::size_t n, std::uint64_t seed,
                                                  prompt::TemplateVariant variant,
                                                  const prompt::TemplateSet& templates = prompt::TemplateSet::defaults(),
                                                  const inference::RequestOptions& options = {});

struct IterationConfig {
  PairMode mode = PairMode::Critic;
  int iteration = 1;
  prompt::TemplateVariant variant{prompt::VariantKind::JudgmentPlain};
  int critic_retries = 0;
  std::size_t sampling_n = 16;
  double sampling_temperature = 1.0;
  std::uint64_t seed = 0;
  /// Written as the first line when the pair file is created.
  std::optional<Json> header;
};

struct IterationStats {
  int iteration = 1;
  PairMode mode = PairMode::Critic;
  std::size_t samples = 0;
  /// Samples skipped because the pair file already holds them.
  std::size_t resumed = 0;
  /// Pairs in the file for this iteration after the run.
  std::size_t pairs = 0;
  std::size_t noncompliant = 0;
  /// Sampling mode: samples whose answers all agreed.
  std::size_t dropped = 0;
  /// Correct judge answers over judged answers in this run.
  double judge_accuracy = 0.0;
  /// Samples whose requests failed; a rerun retries exactly these.
  std::vector<std::string> failed;
  /// Judge answers that pass/fail the label check, in this run.
  std::size_t judged = 0;
  std::size_t judged_correct = 0;

  bool partial() const noexcept { return !failed.empty(); }
};

Json encode(const IterationStats& s);

/// Builds pairs for every sample not already in `pairs_path` for this
/// iteration and appends them in dataset order. Also writes each judge
/// answer to `judge_outputs_path` when given ({"id","output","label",
/// "strength"} records, truncated each run). `critic` may be null in
/// sampling mode.
IterationStats run_iteration(std::span<const PreferenceSample> dataset, inference::InferenceClient& judge,
                             inference::InferenceClient* critic, const IterationConfig& cfg,
                             const std::filesystem::path& pairs_path,
                             const std::optional<std::filesystem::path>& judge_outputs_path = std::nullopt,
                             const prompt::TemplateSet& templates = prompt::TemplateSet::defaults());

}  // namespace judgekit::pairs
