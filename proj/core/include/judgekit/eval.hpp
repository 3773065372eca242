#pragma once

// Pairwise benchmark evaluation: per-category accuracy, overall score,
// position-swap consistency and report rendering.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "judgekit/inference.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/serialization.hpp"
#include "judgekit/types.hpp"

namespace judgekit::eval {

struct BenchmarkSuite {
  std::string name;
  std::vector<PreferenceSample> samples;
};

enum class SuiteFormat { SampleJsonl };

/// Every record must carry a category. ParseError names the line.
BenchmarkSuite load_suite(const std::filesystem::path& path, SuiteFormat format = SuiteFormat::SampleJsonl);

enum class OverallWeighting { Category, Prompt };

struct EvalOptions {
  prompt::TemplateVariant variant{prompt::VariantKind::JudgmentPlain};
  OverallWeighting weighting = OverallWeighting::Category;
  const prompt::TemplateSet* templates = nullptr;  // defaults when null
};

struct CategoryResult {
  std::string name;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;

  bool operator==(const CategoryResult&) const = default;
};

struct EvalReport {
  std::string suite;
  /// Chat, Chat Hard, Safety, Reasoning first, remaining categories by name.
  std::vector<CategoryResult> categories;
  double overall = 0.0;
  OverallWeighting weighting = OverallWeighting::Category;
  /// Judged trials (2 per sample when bidirectional), excluding errors.
  std::size_t trials = 0;
  /// Trials whose output failed the format check (counted as incorrect).
  std::size_t invalid = 0;
  /// Trials dropped because the request failed.
  std::size_t errored = 0;
  std::optional<double> consistency_rate;
  std::optional<double> accuracy_forward;
  std::optional<double> accuracy_swapped;
  /// Fraction of samples judged correctly in both orders.
  std::optional<double> both_correct_rate;

  const CategoryResult* category(std::string_view name) const;
};

/// Raw output for one sample, aligned with the suite by id.
struct JudgedOutput {
  std::string id;
  std::string output;
};

/// DomainError on an empty suite.
EvalReport evaluate(const BenchmarkSuite& suite, inference::InferenceClient& judge, const EvalOptions& options = {});

/// Same report from precomputed outputs. AlignmentError unless outputs[i].id
/// equals suite.samples[i].id for every i.
EvalReport evaluate(const BenchmarkSuite& suite, std::span<const JudgedOutput> outputs,
                    const EvalOptions& options = {});

/// Each sample is judged in the given order and with the responses swapped.
/// Accuracy counts both directions as separate trials.
EvalReport evaluate_bidirectional(const BenchmarkSuite& suite, inference::InferenceClient& judge,
                                  const EvalOptions& options = {});

/// Forward outputs then swapped outputs, both aligned with the suite.
EvalReport evaluate_bidirectional(const BenchmarkSuite& suite, std::span<const JudgedOutput> forward,
                                  std::span<const JudgedOutput> swapped, const EvalOptions& options = {});

/// Fraction of samples whose parsed choice equals the label. Invalid
/// outputs count as disagreement. AlignmentError on misaligned outputs.
double agreement(const BenchmarkSuite& suite, std::span<const JudgedOutput> outputs,
                 prompt::TemplateVariant variant = {prompt::VariantKind::JudgmentPlain});

enum class ReportFormat { Markdown, Csv };

/// Percentages with one decimal. Column order: Chat, Chat Hard, Safety,
/// Reasoning, other categories, Overall, Consistency. Missing columns are
/// left out.
std::string emit_report(const EvalReport& report, ReportFormat format);

Json encode(const EvalReport& report);

}  // namespace judgekit::eval
