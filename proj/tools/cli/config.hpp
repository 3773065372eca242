#pragma once

// judgekit.toml: one file naming endpoints, the template variant, reward and
// objective weights, funnel parameters and the seed. Relative paths resolve
// against the config file's directory. API keys are never read from the
// file; an endpoint names the environment variable that holds its key.
//
//   seed = 7
//
//   [endpoints.judge]
//   base_url = "http://127.0.0.1:8080/v1"
//   model = "judge-7b"
//   api_key_env = "JUDGE_API_KEY"
//
//   [templates]
//   variant = "judgment_strength"
//
//   [rewards]
//   gamma = 0.2

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "judgekit/error.hpp"
#include "judgekit/inference.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/types.hpp"

namespace judgekit::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CurateSection {
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> embeddings;
  std::filesystem::path output = "curated.jsonl";
  std::filesystem::path report = "funnel_report.json";
  std::optional<std::filesystem::path> checkpoint_dir;
  std::size_t k = 3;
  double sample_temperature = 1.0;
  std::optional<std::size_t> target_n;
};

struct PairsSection {
  std::optional<std::filesystem::path> dataset;
  std::filesystem::path output = "pairs.jsonl";
  std::filesystem::path stats = "pair_stats.json";
  std::filesystem::path judge_outputs = "judge_outputs.jsonl";
  std::string mode = "critic";
  int iteration = 1;
  int critic_retries = 0;
  std::size_t sampling_n = 16;
  double sampling_temperature = 1.0;
};

struct RewardsSection {
  RewardWeights weights;
  std::filesystem::path output = "rewards.jsonl";
  std::size_t extreme_window = 100;
  double extreme_threshold = 0.9;
};

struct LossesSection {
  ObjectiveConfig objectives;
  std::filesystem::path output = "losses.jsonl";
};

struct EvalSection {
  std::optional<std::filesystem::path> suite;
  std::filesystem::path output_dir = "eval";
  bool bidirectional = false;
  std::string weighting = "category";
};

struct AppConfig {
  std::filesystem::path base_dir = ".";
  std::uint64_t seed = 0;
  std::map<std::string, inference::EndpointConfig> endpoints;
  prompt::VariantKind variant = prompt::VariantKind::JudgmentPlain;
  std::optional<std::filesystem::path> template_dir;
  CurateSection curate;
  PairsSection pairs;
  RewardsSection rewards;
  LossesSection losses;
  EvalSection eval;

  /// ConfigError when the endpoint is not configured.
  const inference::EndpointConfig& endpoint(const std::string& name) const;
  /// Resolves a config path against base_dir.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Throws ConfigError on syntax errors, unknown keys, wrong types or values
/// that fail validation, and IoError when the file cannot be read.
AppConfig load_config(const std::filesystem::path& path);

/// Same rules, from TOML text; relative paths resolve against `base_dir`.
AppConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir);

}  // namespace judgekit::cli
