#include "judgekit/pairs.hpp"

#include <unordered_set>

#include "judgekit/random.hpp"

namespace judgekit::pairs {

std::string_view to_string(PairMode m) noexcept { return m == PairMode::Critic ? "critic" : "sampling"; }

PairMode parse_pair_mode(std::string_view s) {
  if (s == "critic") {
    return PairMode::Critic;
  }
  if (s == "sampling") {
    return PairMode::Sampling;
  }
  throw DomainError("unknown pair mode '" + std::string(s) + "' (expected critic or sampling)");
}

namespace {

prompt::TemplateVariant critic_variant(prompt::TemplateVariant judgment_variant) {
  return {prompt::critic_of(judgment_variant.kind)};
}

bool judge_correct(const std::string& output, const PreferenceSample& sample, prompt::TemplateVariant variant) {
  return matches(prompt::parse_verdict(output, variant).choice, sample.label);
}

}  // namespace

std::string critic_prompt_for(const PreferenceSample& sample, Label target, prompt::TemplateVariant judgment_variant,
                              const prompt::TemplateSet& templates) {
  const auto variant = critic_variant(judgment_variant);
  std::optional<int> strength;
  if (prompt::uses_strength(variant.kind)) {
    strength = target == sample.label ? sample.strength_golden.value_or(kDefaultCriticStrength)
                                      : kDefaultCriticStrength;
  }
  return prompt::render_critic_prompt(sample, target, strength, variant, templates);
}

bool critic_complies(std::string_view output, Label target, prompt::TemplateVariant judgment_variant) {
  const auto v = prompt::parse_verdict(output, judgment_variant);
  return v.format_ok && matches(v.choice, target);
}

PreferencePair assemble_critic_pair(const PreferenceSample& sample, const std::string& judge_output,
                                    const std::string& critic_output, prompt::TemplateVariant variant,
                                    const prompt::TemplateSet& templates) {
  const bool correct = judge_correct(judge_output, sample, variant);
  const Label target = correct ? other(sample.label) : sample.label;
  if (!critic_complies(critic_output, target, variant)) {
    throw CriticNoncompliant("critic did not argue for Response (" +
                             std::string(target == Label::A ? "a" : "b") + ") on sample '" + sample.id + "'");
  }
  PreferencePair p;
  p.prompt = prompt::render_judgment_prompt(sample, variant, templates);
  p.chosen = correct ? judge_output : critic_output;
  p.rejected = correct ? critic_output : judge_output;
  p.provenance = Provenance::CriticGuided;
  p.sample_id = sample.id;
  return p;
}

PreferencePair build_pair_critic(const PreferenceSample& sample, inference::InferenceClient& judge,
                                 inference::InferenceClient& critic, prompt::TemplateVariant variant,
                                 const prompt::TemplateSet& templates, int critic_retries) {
  const std::string judge_output = judge.complete(prompt::render_judgment_prompt(sample, variant, templates));
  const Label target = judge_correct(judge_output, sample, variant) ? other(sample.label) : sample.label;
  const std::string critic_prompt = critic_prompt_for(sample, target, variant, templates);
  for (int attempt = 0;; ++attempt) {
    const std::string critic_output = critic.complete(critic_prompt);
    try {
      return assemble_critic_pair(sample, judge_output, critic_output, variant, templates);
    } catch (const CriticNoncompliant&) {
      if (attempt >= critic_retries) {
        throw;
      }
    }
  }
}

std::optional<PreferencePair> select_sampled_pair(const PreferenceSample& sample, const std::string& prompt,
                                                  std::span<const std::string> outputs,
                                                  prompt::TemplateVariant variant, std::uint64_t seed) {
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    (judge_correct(outputs[i], sample, variant) ? good : bad).push_back(i);
  }
  if (good.empty() || bad.empty()) {
    return std::nullopt;
  }
  Rng rng(derive_seed(seed, sample.id));
  const std::size_t w = good[uniform_index(rng, good.size())];
  const std::size_t l = bad[uniform_index(rng, bad.size())];
  PreferencePair p;
  p.prompt = prompt;
  p.chosen = outputs[w];
  p.rejected = outputs[l];
  p.provenance = Provenance::Sampled;
  p.sample_id = sample.id;
  return p;
}

std::optional<PreferencePair> build_pair_sampling(const PreferenceSample& sample, inference::InferenceClient& judge,
                                                  std::size_t n, std::uint64_t seed,
                                                  prompt::TemplateVariant variant,
                                                  const prompt::TemplateSet& templates,
                                                  const inference::RequestOptions& options) {
  if (n < 2) {
    throw DomainError("sampling needs n >= 2");
  }
  const std::string p = prompt::render_judgment_prompt(sample, variant, templates);
  const std::vector<std::string> prompts(n, p);
  const auto results = inference::complete_batch(judge, prompts, options);
  std::vector<std::string> outputs;
  outputs.reserve(n);
  for (const auto& r : results) {
    if (!r.ok()) {
      throw inference::InferenceError(r.error->kind, r.error->message);
    }
    outputs.push_back(*r.text);
  }
  return select_sampled_pair(sample, p, outputs, variant, seed);
}

Json encode(const IterationStats& s) {
  Json j;
  j["iteration"] = s.iteration;
  j["pairs"] = s.pairs;
  j["noncompliant"] = s.noncompliant;
  j["judge_accuracy"] = s.judge_accuracy;
  j["mode"] = to_string(s.mode);
  j["samples"] = s.samples;
  j["resumed"] = s.resumed;
  j["dropped"] = s.dropped;
  j["judged"] = s.judged;
  j["failed"] = s.failed;
  return j;
}

namespace {

std::unordered_set<std::string> paired_ids(const std::filesystem::path& path, int iteration) {
  std::unordered_set<std::string> ids;
  if (!std::filesystem::exists(path)) {
    return ids;
  }
  for_each_jsonl(path, [&](std::size_t, const Json& j) {
    const auto p = decode<PreferencePair>(j);
    if (p.iteration == iteration && p.sample_id) {
      ids.insert(*p.sample_id);
    }
  });
  return ids;
}

Json judge_output_record(const PreferenceSample& s, const std::string& output) {
  Json j;
  j["id"] = s.id;
  j["output"] = output;
  j["label"] = to_string(s.label);
  j["strength"] = s.strength_golden ? Json(*s.strength_golden) : Json(nullptr);
  return j;
}

}  // namespace

IterationStats run_iteration(std::span<const PreferenceSample> dataset, inference::InferenceClient& judge,
                             inference::InferenceClient* critic, const IterationConfig& cfg,
                             const std::filesystem::path& pairs_path,
                             const std::optional<std::filesystem::path>& judge_outputs_path,
                             const prompt::TemplateSet& templates) {
  if (cfg.iteration < 1) {
    throw DomainError("iteration must be >= 1");
  }
  if (!prompt::is_judgment(cfg.variant.kind)) {
    throw VariantMismatch("pair building needs a judgment template variant");
  }
  if (cfg.mode == PairMode::Critic) {
    if (critic == nullptr) {
      throw Error("critic mode needs a critic client");
    }
    (void)prompt::critic_of(cfg.variant.kind);  // VariantMismatch for variants without a critic
  } else if (cfg.sampling_n < 2) {
    throw DomainError("sampling needs n >= 2");
  }

  IterationStats stats;
  stats.iteration = cfg.iteration;
  stats.mode = cfg.mode;
  stats.samples = dataset.size();

  const auto done = paired_ids(pairs_path, cfg.iteration);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (done.count(dataset[i].id) != 0) {
      ++stats.resumed;
    } else {
      pending.push_back(i);
    }
  }

  const bool fresh = !std::filesystem::exists(pairs_path);
  JsonlWriter writer(pairs_path, fresh ? JsonlWriter::Mode::Truncate : JsonlWriter::Mode::Append);
  if (fresh && cfg.header) {
    writer.write(*cfg.header);
  }
  std::optional<JsonlWriter> judge_log;
  if (judge_outputs_path) {
    judge_log.emplace(*judge_outputs_path);
    if (cfg.header) {
      judge_log->write(*cfg.header);
    }
  }

  std::vector<std::string> judge_prompts;
  const std::size_t per_sample = cfg.mode == PairMode::Critic ? 1 : cfg.sampling_n;
  for (std::size_t idx : pending) {
    const std::string p = prompt::render_judgment_prompt(dataset[idx], cfg.variant, templates);
    for (std::size_t r = 0; r < per_sample; ++r) {
      judge_prompts.push_back(p);
    }
  }
  inference::RequestOptions judge_opts;
  if (cfg.mode == PairMode::Sampling) {
    judge_opts.temperature = cfg.sampling_temperature;
  }
  const auto judged = inference::complete_batch(judge, judge_prompts, judge_opts);

  // Which pending samples got every judge answer back.
  std::vector<bool> ok(pending.size(), true);
  for (std::size_t j = 0; j < pending.size(); ++j) {
    const auto& s = dataset[pending[j]];
    for (std::size_t r = 0; r < per_sample; ++r) {
      const auto& res = judged[j * per_sample + r];
      if (!res.ok()) {
        ok[j] = false;
        continue;
      }
      ++stats.judged;
      if (judge_correct(*res.text, s, cfg.variant)) {
        ++stats.judged_correct;
      }
      if (judge_log) {
        judge_log->write(judge_output_record(s, *res.text));
      }
    }
  }

  std::vector<std::optional<PreferencePair>> built(pending.size());
  if (cfg.mode == PairMode::Critic) {
    // Critic round(s): first attempt for everyone, then retries for the noncompliant.
    std::vector<std::size_t> ask;
    for (std::size_t j = 0; j < pending.size(); ++j) {
      if (ok[j]) {
        ask.push_back(j);
      }
    }
    for (int attempt = 0; attempt <= cfg.critic_retries && !ask.empty(); ++attempt) {
      std::vector<std::string> prompts;
      prompts.reserve(ask.size());
      for (std::size_t j : ask) {
        const auto& s = dataset[pending[j]];
        const Label target = judge_correct(*judged[j].text, s, cfg.variant) ? other(s.label) : s.label;
        prompts.push_back(critic_prompt_for(s, target, cfg.variant, templates));
      }
      const auto critiques = inference::complete_batch(*critic, prompts);
      std::vector<std::size_t> again;
      for (std::size_t a = 0; a < ask.size(); ++a) {
        const std::size_t j = ask[a];
        if (!critiques[a].ok()) {
          ok[j] = false;
          continue;
        }
        try {
          built[j] = assemble_critic_pair(dataset[pending[j]], *judged[j].text, *critiques[a].text, cfg.variant,
                                          templates);
        } catch (const CriticNoncompliant&) {
          again.push_back(j);
        }
      }
      if (attempt == cfg.critic_retries) {
        stats.noncompliant += again.size();
      }
      ask = std::move(again);
    }
  } else {
    for (std::size_t j = 0; j < pending.size(); ++j) {
      if (!ok[j]) {
        continue;
      }
      std::vector<std::string> outputs;
      outputs.reserve(per_sample);
      for (std::size_t r = 0; r < per_sample; ++r) {
        outputs.push_back(*judged[j * per_sample + r].text);
      }
      built[j] = select_sampled_pair(dataset[pending[j]], judge_prompts[j * per_sample], outputs, cfg.variant,
                                     cfg.seed);
      if (!built[j]) {
        ++stats.dropped;
      }
    }
  }

  std::size_t written = 0;
  for (std::size_t j = 0; j < pending.size(); ++j) {
    if (!ok[j]) {
      stats.failed.push_back(dataset[pending[j]].id);
      continue;
    }
    if (built[j]) {
      built[j]->iteration = cfg.iteration;
      writer.write(encode(*built[j]));
      ++written;
    }
  }
  stats.pairs = done.size() + written;
  stats.judge_accuracy =
      stats.judged == 0 ? 0.0 : static_cast<double>(stats.judged_correct) / static_cast<double>(stats.judged);
  return stats;
}

}  // namespace judgekit::pairs
