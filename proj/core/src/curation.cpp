#include "judgekit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <unordered_set>

#include "judgekit/random.hpp"

namespace judgekit::curation {

bool difficulty_filter(const PreferenceSample& sample, std::span<const JudgeVerdict> verdicts, std::size_t k) {
  if (verdicts.size() != k) {
    throw ArityError("difficulty_filter expects " + std::to_string(k) + " verdicts, got " +
                     std::to_string(verdicts.size()));
  }
  return std::any_of(verdicts.begin(), verdicts.end(),
                     [&](const JudgeVerdict& v) { return !matches(v.choice, sample.label); });
}

std::vector<std::string> diversity_sample(const EmbeddingSet& emb, std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > emb.size()) {
    throw RangeError("diversity_sample: n=" + std::to_string(n) + " outside [1, " + std::to_string(emb.size()) +
                     "]");
  }
  Rng rng(seed);
  std::vector<bool> taken(emb.size(), false);
  std::vector<std::string> out;
  out.reserve(n);

  std::size_t last = uniform_index(rng, emb.size());
  taken[last] = true;
  out.push_back(emb.id(last));

  while (out.size() < n) {
    std::size_t best = emb.size();
    double best_sim = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < emb.size(); ++i) {
      if (taken[i]) {
        continue;
      }
      const double sim = cosine_unit(emb.vector(last), emb.vector(i));
      if (best == emb.size() || sim < best_sim || (sim == best_sim && emb.id(i) < emb.id(best))) {
        best = i;
        best_sim = sim;
      }
    }
    taken[best] = true;
    out.push_back(emb.id(best));
    last = best;
  }
  return out;
}

bool accuracy_filter(const PreferenceSample& sample, const JudgeVerdict& oracle_verdict) noexcept {
  return oracle_verdict.format_ok && matches(oracle_verdict.choice, sample.label);
}

std::vector<int> quantile_bins(std::span<const double> values, int k) {
  if (values.empty()) {
    throw DomainError("quantile_bins: empty input");
  }
  if (k < 1) {
    throw DomainError("quantile_bins: k must be >= 1");
  }
  if (std::any_of(values.begin(), values.end(), [](double v) { return std::isnan(v); })) {
    throw DomainError("quantile_bins: NaN value");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<long long>(values.size());
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) {
    const auto less = static_cast<long long>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    out.push_back(1 + static_cast<int>((static_cast<long long>(k) * less) / n));
  }
  return out;
}

std::vector<int> strength_tiers(std::span<const double> score_diffs) {
  std::vector<double> mags;
  mags.reserve(score_diffs.size());
  for (double d : score_diffs) {
    mags.push_back(std::fabs(d));
  }
  return quantile_bins(mags, 3);
}

std::vector<int> quality_groups(std::span<const PreferenceSample> samples, int k) {
  std::vector<double> margins;
  margins.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.score_a || !s.score_b) {
      throw MissingScores("sample '" + s.id + "' has no score_a/score_b");
    }
    const double chosen = s.label == Label::A ? *s.score_a : *s.score_b;
    const double rejected = s.label == Label::A ? *s.score_b : *s.score_a;
    margins.push_back(chosen - rejected);
  }
  if (margins.empty()) {
    return {};
  }
  return quantile_bins(margins, k);
}

Json encode(const FunnelReport& r) {
  Json j;
  j["initial"] = r.initial;
  j["after_difficulty"] = r.after_difficulty;
  j["after_diversity"] = r.after_diversity;
  j["after_accuracy"] = r.after_accuracy;
  Json dropped = Json::object();
  for (const char* stage : {kStageDifficulty, kStageDiversity, kStageAccuracy}) {
    auto it = r.dropped.find(stage);
    dropped[stage] = it == r.dropped.end() ? Json::array() : Json(it->second);
  }
  j["dropped"] = std::move(dropped);
  j["complete"] = r.complete;
  if (r.failed_stage) {
    j["failed_stage"] = *r.failed_stage;
  }
  return j;
}

FunnelReport decode_funnel_report(const Json& j) {
  try {
    FunnelReport r;
    r.initial = j.at("initial").get<std::size_t>();
    r.after_difficulty = j.at("after_difficulty").get<std::size_t>();
    r.after_diversity = j.at("after_diversity").get<std::size_t>();
    r.after_accuracy = j.at("after_accuracy").get<std::size_t>();
    for (const auto& [stage, ids] : j.at("dropped").items()) {
      r.dropped[stage] = ids.get<std::vector<std::string>>();
    }
    r.complete = j.value("complete", true);
    if (j.contains("failed_stage")) {
      r.failed_stage = j["failed_stage"].get<std::string>();
    }
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(0, std::string("funnel report: ") + e.what());
  }
}

namespace {

struct StageResult {
  std::vector<std::size_t> kept;  // indices into the dataset, ascending
  std::vector<std::string> dropped;
};

std::string run_digest(std::span<const PreferenceSample> dataset, const FunnelConfig& cfg) {
  std::uint64_t h = fnv1a64("funnel-v1");
  auto mix = [&](std::string_view s) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  };
  mix(std::to_string(cfg.k));
  mix(std::to_string(cfg.sample_temperature));
  mix(cfg.target_n ? std::to_string(*cfg.target_n) : "all");
  mix(std::to_string(cfg.seed));
  mix(prompt::to_string(cfg.variant.kind));
  for (const auto& s : dataset) {
    mix(encode(s).dump());
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

class Checkpoints {
 public:
  Checkpoints(const std::optional<std::filesystem::path>& dir, std::string digest)
      : dir_(dir), digest_(std::move(digest)) {
    if (dir_) {
      std::error_code ec;
      std::filesystem::create_directories(*dir_, ec);
      if (ec) {
        throw IoError(dir_->string(), "cannot create checkpoint directory: " + ec.message());
      }
    }
  }

  std::optional<StageResult> load(const std::string& stage, std::span<const PreferenceSample> dataset) const {
    if (!dir_) {
      return std::nullopt;
    }
    const auto path = file(stage);
    if (!std::filesystem::exists(path)) {
      return std::nullopt;
    }
    const Json j = read_json_file(path);
    if (j.value("digest", std::string()) != digest_) {
      return std::nullopt;
    }
    const auto kept_ids = j.at("kept").get<std::vector<std::string>>();
    std::unordered_set<std::string> keep(kept_ids.begin(), kept_ids.end());
    StageResult r;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (keep.count(dataset[i].id) != 0) {
        r.kept.push_back(i);
      }
    }
    r.dropped = j.at("dropped").get<std::vector<std::string>>();
    return r;
  }

  void save(const std::string& stage, const StageResult& r, std::span<const PreferenceSample> dataset) const {
    if (!dir_) {
      return;
    }
    Json j;
    j["stage"] = stage;
    j["digest"] = digest_;
    Json kept = Json::array();
    for (std::size_t i : r.kept) {
      kept.push_back(dataset[i].id);
    }
    j["kept"] = std::move(kept);
    j["dropped"] = r.dropped;
    const auto path = file(stage);
    auto tmp = path;
    tmp += ".tmp";
    write_json_file(tmp, j);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      throw IoError(path.string(), "cannot commit checkpoint: " + ec.message());
    }
  }

 private:
  std::filesystem::path file(const std::string& stage) const { return *dir_ / (stage + ".json"); }

  std::optional<std::filesystem::path> dir_;
  std::string digest_;
};

std::string first_error(std::span<const inference::CompletionResult> results) {
  std::size_t failed = 0;
  std::string first;
  for (const auto& r : results) {
    if (!r.ok()) {
      if (failed++ == 0) {
        first = std::string(inference::to_string(r.error->kind)) + ": " + r.error->message;
      }
    }
  }
  if (failed == 0) {
    return {};
  }
  return std::to_string(failed) + " request(s) failed, first: " + first;
}

StageResult difficulty_stage(std::span<const PreferenceSample> dataset, std::span<const std::size_t> input,
                             inference::InferenceClient& judge, const FunnelConfig& cfg,
                             const prompt::TemplateSet& templates) {
  std::vector<std::string> prompts;
  prompts.reserve(input.size() * cfg.k);
  for (std::size_t idx : input) {
    const std::string p = prompt::render_judgment_prompt(dataset[idx], cfg.variant, templates);
    for (std::size_t r = 0; r < cfg.k; ++r) {
      prompts.push_back(p);
    }
  }
  inference::RequestOptions opts;
  opts.temperature = cfg.sample_temperature;
  const auto results = inference::complete_batch(judge, prompts, opts);
  if (auto err = first_error(results); !err.empty()) {
    throw Error(err);
  }
  StageResult out;
  for (std::size_t j = 0; j < input.size(); ++j) {
    std::vector<JudgeVerdict> verdicts;
    verdicts.reserve(cfg.k);
    for (std::size_t r = 0; r < cfg.k; ++r) {
      verdicts.push_back(prompt::parse_verdict(*results[j * cfg.k + r].text, cfg.variant));
    }
    const auto& sample = dataset[input[j]];
    if (difficulty_filter(sample, verdicts, cfg.k)) {
      out.kept.push_back(input[j]);
    } else {
      out.dropped.push_back(sample.id);
    }
  }
  return out;
}

StageResult diversity_stage(std::span<const PreferenceSample> dataset, std::span<const std::size_t> input,
                            const FunnelClients& clients, const FunnelConfig& cfg) {
  const std::size_t n = cfg.target_n ? std::min(*cfg.target_n, input.size()) : input.size();
  StageResult out;
  if (n == input.size()) {
    out.kept.assign(input.begin(), input.end());
    return out;
  }
  if (n == 0) {
    for (std::size_t idx : input) {
      out.dropped.push_back(dataset[idx].id);
    }
    return out;
  }

  EmbeddingSet emb;
  if (clients.embeddings != nullptr) {
    std::vector<std::size_t> rows;
    rows.reserve(input.size());
    for (std::size_t idx : input) {
      const std::size_t row = clients.embeddings->find(dataset[idx].id);
      if (row == clients.embeddings->size()) {
        throw Error("no embedding for sample '" + dataset[idx].id + "'");
      }
      rows.push_back(row);
    }
    emb = clients.embeddings->select(rows);
  } else if (clients.embedder != nullptr) {
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    for (std::size_t idx : input) {
      texts.push_back(dataset[idx].instruction);
      ids.push_back(dataset[idx].id);
    }
    emb = inference::embed(*clients.embedder, texts, ids);
  } else {
    throw Error("diversity stage needs precomputed embeddings or an embedding client");
  }

  const auto picked = diversity_sample(emb, n, cfg.seed);
  const std::set<std::string> keep(picked.begin(), picked.end());
  for (std::size_t idx : input) {
    if (keep.count(dataset[idx].id) != 0) {
      out.kept.push_back(idx);
    } else {
      out.dropped.push_back(dataset[idx].id);
    }
  }
  return out;
}

StageResult accuracy_stage(std::span<const PreferenceSample> dataset, std::span<const std::size_t> input,
                           inference::InferenceClient& annotator, const FunnelConfig& cfg,
                           const prompt::TemplateSet& templates) {
  std::vector<std::string> prompts;
  prompts.reserve(input.size());
  for (std::size_t idx : input) {
    prompts.push_back(prompt::render_judgment_prompt(dataset[idx], cfg.variant, templates));
  }
  const auto results = inference::complete_batch(annotator, prompts);
  if (auto err = first_error(results); !err.empty()) {
    throw Error(err);
  }
  StageResult out;
  for (std::size_t j = 0; j < input.size(); ++j) {
    const auto& sample = dataset[input[j]];
    if (accuracy_filter(sample, prompt::parse_verdict(*results[j].text, cfg.variant))) {
      out.kept.push_back(input[j]);
    } else {
      out.dropped.push_back(sample.id);
    }
  }
  return out;
}

}  // namespace

FunnelResult run_funnel(std::span<const PreferenceSample> dataset, const FunnelClients& clients,
                        const FunnelConfig& cfg, const prompt::TemplateSet& templates) {
  if (cfg.k < 1) {
    throw DomainError("funnel k must be >= 1");
  }
  if (!prompt::is_judgment(cfg.variant.kind)) {
    throw VariantMismatch("funnel needs a judgment template variant");
  }
  FunnelReport report;
  report.initial = dataset.size();
  for (const char* stage : {kStageDifficulty, kStageDiversity, kStageAccuracy}) {
    report.dropped[stage] = {};
  }
  if (dataset.empty()) {
    return {{}, report};
  }
  if (clients.judge == nullptr || clients.annotator == nullptr) {
    throw Error("funnel needs a judge and an annotator client");
  }

  const Checkpoints checkpoints(cfg.checkpoint_dir, run_digest(dataset, cfg));
  std::vector<std::size_t> current(dataset.size());
  for (std::size_t i = 0; i < current.size(); ++i) {
    current[i] = i;
  }

  auto stage = [&](const char* name, auto&& body) {
    std::optional<StageResult> r = checkpoints.load(name, dataset);
    if (!r) {
      try {
        r = body(std::span<const std::size_t>(current));
      } catch (const Error& e) {
        report.complete = false;
        report.failed_stage = name;
        throw FunnelError(std::string(name) + " stage failed: " + e.what(), report);
      }
      checkpoints.save(name, *r, dataset);
    }
    report.dropped[name] = r->dropped;
    current = std::move(r->kept);
    return current.size();
  };

  report.after_difficulty = stage(kStageDifficulty, [&](std::span<const std::size_t> in) {
    return difficulty_stage(dataset, in, *clients.judge, cfg, templates);
  });
  report.after_diversity = stage(kStageDiversity, [&](std::span<const std::size_t> in) {
    return diversity_stage(dataset, in, clients, cfg);
  });
  report.after_accuracy = stage(kStageAccuracy, [&](std::span<const std::size_t> in) {
    return accuracy_stage(dataset, in, *clients.annotator, cfg, templates);
  });

  FunnelResult result;
  result.report = std::move(report);
  for (std::size_t idx : current) {
    result.curated.push_back(dataset[idx]);
  }
  return result;
}

}  // namespace judgekit::curation
