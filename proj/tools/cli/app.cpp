#include "cli/app.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <pthread.h>
#include <string>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "judgekit/curation.hpp"
#include "judgekit/eval.hpp"
#include "judgekit/mock_server.hpp"
#include "judgekit/objectives.hpp"
#include "judgekit/pairs.hpp"
#include "judgekit/reward.hpp"
#include "judgekit/serialization.hpp"

namespace judgekit::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

class Context {
 public:
  Context(const Globals& g, std::ostream& out, std::ostream& err) : out(out), err(err), verbose_(g.verbose) {
    if (g.config) {
      cfg = load_config(*g.config);
    } else {
      cfg.base_dir = fs::current_path();
    }
    seed = g.seed.value_or(cfg.seed);
    templates = cfg.template_dir ? prompt::TemplateSet::load_dir(cfg.resolve(*cfg.template_dir))
                                 : prompt::TemplateSet::defaults();
  }

  void log(const std::string& msg) const {
    if (verbose_) {
      err << "[judgekit] " << msg << "\n";
    }
  }

  prompt::TemplateVariant variant() const { return {cfg.variant}; }

  /// {"_meta": ..., <fields of body>} for single-object JSON outputs.
  Json with_meta(std::string_view command, const Json& body) const {
    Json j = meta_record(command, seed);
    for (const auto& [k, v] : body.items()) {
      j[k] = v;
    }
    return j;
  }

  AppConfig cfg;
  std::uint64_t seed = 0;
  prompt::TemplateSet templates;
  std::ostream& out;
  std::ostream& err;

 private:
  bool verbose_;
};

fs::path pick(const std::optional<std::string>& flag, const fs::path& configured, const Context& ctx) {
  return flag ? fs::path(*flag) : ctx.cfg.resolve(configured);
}

fs::path require_input(const std::optional<std::string>& flag, const std::optional<fs::path>& configured,
                       const Context& ctx, const std::string& key) {
  if (flag) {
    return *flag;
  }
  if (!configured) {
    throw ConfigError(key + " is not set (config or flag)");
  }
  return ctx.cfg.resolve(*configured);
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) {
    throw IoError(p.string(), what + " not found");
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) {
      throw IoError(p.parent_path().string(), "cannot create directory: " + ec.message());
    }
  }
}

std::vector<PreferenceSample> load_samples(const fs::path& path, const Context& ctx) {
  require_file(path, "dataset");
  auto samples = read_jsonl<PreferenceSample>(path);
  for (const auto& v : validate_dataset(samples)) {
    std::string codes;
    for (const auto& c : v.codes) {
      codes += (codes.empty() ? "" : ",") + c;
    }
    const bool fatal = std::find(v.codes.begin(), v.codes.end(), violation::kEmptyId) != v.codes.end() ||
                       std::find(v.codes.begin(), v.codes.end(), violation::kDuplicateId) != v.codes.end();
    if (fatal) {
      throw ParseError(v.index + 1, "sample '" + v.id + "': " + codes);
    }
    ctx.err << "warning: sample '" << v.id << "': " << codes << "\n";
  }
  ctx.log("loaded " + std::to_string(samples.size()) + " samples from " + path.string());
  return samples;
}

void write_samples(const fs::path& path, std::span<const PreferenceSample> samples, const Context& ctx,
                   std::string_view command) {
  ensure_parent(path);
  JsonlWriter w(path);
  w.write(meta_record(command, ctx.seed));
  for (const auto& s : samples) {
    w.write(encode(s));
  }
}

// Writes to `path` only if the whole body succeeds.
template <typename Fn>
void write_atomically(const fs::path& path, Fn&& fn) {
  ensure_parent(path);
  fs::path tmp = path;
  tmp += ".partial";
  try {
    fn(tmp);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------- curate

struct CurateFlags {
  std::optional<std::string> dataset, embeddings, output, report, checkpoint_dir;
  std::optional<std::size_t> target_n;
};

int cmd_curate(Context& ctx, const CurateFlags& f) {
  const auto& c = ctx.cfg.curate;
  const fs::path dataset_path = require_input(f.dataset, c.dataset, ctx, "curate.dataset");
  const auto samples = load_samples(dataset_path, ctx);

  curation::FunnelConfig fc;
  fc.k = c.k;
  fc.sample_temperature = c.sample_temperature;
  fc.target_n = f.target_n ? f.target_n : c.target_n;
  fc.seed = ctx.seed;
  fc.variant = ctx.variant();
  if (f.checkpoint_dir) {
    fc.checkpoint_dir = fs::path(*f.checkpoint_dir);
  } else if (c.checkpoint_dir) {
    fc.checkpoint_dir = ctx.cfg.resolve(*c.checkpoint_dir);
  }

  std::optional<EmbeddingSet> precomputed;
  std::optional<fs::path> emb_path;
  if (f.embeddings) {
    emb_path = fs::path(*f.embeddings);
  } else if (c.embeddings) {
    emb_path = ctx.cfg.resolve(*c.embeddings);
  }
  if (emb_path) {
    require_file(*emb_path, "embeddings");
    precomputed = EmbeddingSet::load_jsonl(*emb_path);
  }

  std::optional<inference::HttpClient> judge, annotator, embedder;
  curation::FunnelClients clients;
  if (!samples.empty()) {
    judge.emplace(ctx.cfg.endpoint("judge"));
    annotator.emplace(ctx.cfg.endpoint("annotator"));
    clients.judge = &*judge;
    clients.annotator = &*annotator;
    if (precomputed) {
      clients.embeddings = &*precomputed;
    } else if (ctx.cfg.endpoints.count("embedder") != 0) {
      embedder.emplace(ctx.cfg.endpoint("embedder"));
      clients.embedder = &*embedder;
    }
  }

  const fs::path out_path = pick(f.output, c.output, ctx);
  const fs::path report_path = pick(f.report, c.report, ctx);
  ensure_parent(report_path);
  try {
    const auto result = curation::run_funnel(samples, clients, fc, ctx.templates);
    write_samples(out_path, result.curated, ctx, "curate");
    write_json_file(report_path, ctx.with_meta("curate", curation::encode(result.report)));
    const auto& r = result.report;
    ctx.out << "funnel: " << r.initial << " -> " << r.after_difficulty << " (difficulty) -> " << r.after_diversity
            << " (diversity) -> " << r.after_accuracy << " (accuracy)\n"
            << "curated: " << out_path.string() << "\nreport: " << report_path.string() << "\n";
    return kExitOk;
  } catch (const curation::FunnelError& e) {
    write_json_file(report_path, ctx.with_meta("curate", curation::encode(e.partial())));
    ctx.err << "error: " << e.what() << "\n"
            << "partial report: " << report_path.string() << "; rerun to resume from the last complete stage\n";
    return kExitPartial;
  }
}

// ----------------------------------------------------------------- pairs

struct PairsFlags {
  std::optional<std::string> mode, dataset, output, stats, judge_outputs;
  std::optional<int> iteration;
};

int cmd_pairs(Context& ctx, const PairsFlags& f) {
  const auto& p = ctx.cfg.pairs;
  std::optional<fs::path> configured = p.dataset;
  if (!configured && ctx.cfg.curate.dataset) {
    configured = ctx.cfg.curate.output;  // chain from curate by default
  }
  const fs::path dataset_path = require_input(f.dataset, configured, ctx, "pairs.dataset");
  const auto samples = load_samples(dataset_path, ctx);

  pairs::IterationConfig ic;
  ic.mode = pairs::parse_pair_mode(f.mode.value_or(p.mode));
  ic.iteration = f.iteration.value_or(p.iteration);
  if (ic.iteration < 1) {
    throw ConfigError("--iteration must be >= 1");
  }
  ic.variant = ctx.variant();
  ic.critic_retries = p.critic_retries;
  ic.sampling_n = p.sampling_n;
  ic.sampling_temperature = p.sampling_temperature;
  ic.seed = ctx.seed;
  ic.header = meta_record("pairs", ctx.seed);

  inference::HttpClient judge(ctx.cfg.endpoint("judge"));
  std::optional<inference::HttpClient> critic;
  if (ic.mode == pairs::PairMode::Critic) {
    critic.emplace(ctx.cfg.endpoint("critic"));
  }

  const fs::path out_path = pick(f.output, p.output, ctx);
  const fs::path stats_path = pick(f.stats, p.stats, ctx);
  const fs::path judge_path = pick(f.judge_outputs, p.judge_outputs, ctx);
  ensure_parent(out_path);
  ensure_parent(stats_path);
  ensure_parent(judge_path);

  const auto stats = pairs::run_iteration(samples, judge, critic ? &*critic : nullptr, ic, out_path, judge_path,
                                          ctx.templates);
  write_json_file(stats_path, ctx.with_meta("pairs", pairs::encode(stats)));

  ctx.out << "iteration " << stats.iteration << " (" << pairs::to_string(stats.mode) << "): " << stats.pairs
          << " pairs, " << stats.noncompliant << " noncompliant, judge accuracy " << std::fixed
          << std::setprecision(3) << stats.judge_accuracy << std::defaultfloat << "\n";
  if (stats.dropped > 0) {
    ctx.out << "dropped " << stats.dropped << " sample(s) whose sampled judgments all agreed\n";
  }
  if (stats.resumed > 0) {
    ctx.out << "resumed: " << stats.resumed << " sample(s) already paired\n";
  }
  ctx.out << "pairs: " << out_path.string() << "\nstats: " << stats_path.string() << "\n";
  if (stats.partial()) {
    ctx.err << "error: " << stats.failed.size() << " sample(s) failed; rerun to retry them\n";
    return kExitPartial;
  }
  return kExitOk;
}

// --------------------------------------------------------------- rewards

struct RewardsFlags {
  std::string input;
  std::optional<std::string> output;
};

int cmd_rewards(Context& ctx, const RewardsFlags& f) {
  const auto& rc = ctx.cfg.rewards;
  const fs::path in_path = f.input;
  std::ifstream in(in_path, std::ios::binary);
  if (!in) {
    throw IoError(in_path.string(), "cannot open input");
  }
  const fs::path out_path = pick(f.output, rc.output, ctx);
  ensure_parent(out_path);
  JsonlWriter w(out_path);
  w.write(meta_record("rewards", ctx.seed));

  reward::ExtremeScoreDetector detector(rc.extreme_window, rc.extreme_threshold);
  std::size_t records = 0, errors = 0, format_bad = 0;
  double total = 0.0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const Json j = Json::parse(line);
      if (is_meta_record(j)) {
        continue;
      }
      PreferenceSample s;
      s.id = j.at("id").get<std::string>();
      s.label = parse_label(j.at("label").get<std::string>());
      if (j.contains("strength") && !j["strength"].is_null()) {
        s.strength_golden = j["strength"].get<int>();
      }
      const auto verdict = prompt::parse_verdict(j.at("output").get<std::string>(), ctx.variant());
      const auto r = reward::final_reward(verdict, s, rc.weights);
      if (verdict.quality_scores) {
        detector.push(*verdict.quality_scores);
      }
      w.write(reward::encode_reward_log(s.id, r));
      ++records;
      total += r.r_final;
      format_bad += verdict.format_ok ? 0 : 1;
    } catch (const std::exception& e) {
      ++errors;
      ctx.err << "line " << lineno << ": " << e.what() << "\n";
    }
  }

  ctx.out << "records: " << records << "\n"
          << "errors: " << errors << "\n"
          << std::fixed << std::setprecision(4)
          << "mean reward: " << (records ? total / static_cast<double>(records) : 0.0) << "\n"
          << "format violation rate: "
          << (records ? static_cast<double>(format_bad) / static_cast<double>(records) : 0.0) << "\n"
          << std::defaultfloat;
  if (detector.size() > 0) {
    ctx.out << "extreme scores: " << std::fixed << std::setprecision(3) << detector.extreme_fraction()
            << std::defaultfloat << " of the last " << detector.size() << " score pairs\n";
  }
  if (detector.alarmed()) {
    ctx.out << "ALARM: predicted quality scores are collapsing to 0/100 (possible reward hacking)\n";
  }
  ctx.out << "reward log: " << out_path.string() << "\n";
  return errors > 0 ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- losses

struct LossesFlags {
  std::string input;
  std::optional<std::string> output;
};

Json loss_record(std::size_t lineno, const Json& j, const ObjectiveConfig& oc) {
  Json rec;
  rec["line"] = lineno;
  objectives::ObjectiveReport report;
  try {
    if (j.contains("outputs")) {
      auto rollout = decode<GroupRollout>(j);
      const bool missing = std::any_of(rollout.outputs.begin(), rollout.outputs.end(),
                                       [](const RolloutOutput& o) { return !o.advantage; });
      if (missing) {
        objectives::assign_advantages(rollout, oc.advantage_norm);
      }
      report = objectives::grpo_objective(rollout, oc);
      rec["kind"] = "grpo";
      rec["id"] = rollout.prompt_id;
    } else if (j.contains("theta_w")) {
      objectives::PairLogProbs lp;
      lp.theta_w = j.at("theta_w").get<double>();
      lp.theta_l = j.at("theta_l").get<double>();
      lp.ref_w = j.at("ref_w").get<double>();
      lp.ref_l = j.at("ref_l").get<double>();
      report = objectives::dpo_sft_loss(lp, oc.beta_dpo);
      rec["kind"] = "dpo_sft";
      rec["id"] = j.contains("id") ? j["id"] : (j.contains("sample_id") ? j["sample_id"] : Json(nullptr));
    } else {
      throw ParseError(0, "record is neither a rollout (\"outputs\") nor a pair (\"theta_w\")");
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Json::exception& e) {
    throw ParseError(0, e.what());
  } catch (const Error& e) {
    throw ParseError(0, e.what());
  }
  const Json encoded = objectives::encode(report);
  for (const auto& [k, v] : encoded.items()) {
    rec[k] = v;
  }
  return rec;
}

int cmd_losses(Context& ctx, const LossesFlags& f) {
  const fs::path in_path = f.input;
  require_file(in_path, "input");
  const auto& oc = ctx.cfg.losses.objectives;
  const fs::path out_path = pick(f.output, ctx.cfg.losses.output, ctx);
  std::size_t n = 0;
  write_atomically(out_path, [&](const fs::path& tmp) {
    JsonlWriter w(tmp);
    w.write(meta_record("losses", ctx.seed));
    for_each_jsonl(in_path, [&](std::size_t lineno, const Json& j) {
      w.write(loss_record(lineno, j, oc));
      ++n;
    });
  });
  ctx.out << "objectives: " << n << " record(s) -> " << out_path.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ eval

struct EvalFlags {
  std::optional<std::string> suite, output_dir, weighting;
  bool bidirectional = false;
};

int cmd_eval(Context& ctx, const EvalFlags& f) {
  const auto& ec = ctx.cfg.eval;
  const fs::path suite_path = require_input(f.suite, ec.suite, ctx, "eval.suite");
  require_file(suite_path, "suite");
  const auto suite = eval::load_suite(suite_path);
  if (suite.samples.empty()) {
    throw ConfigError("suite " + suite_path.string() + " is empty");
  }

  eval::EvalOptions opts;
  opts.variant = ctx.variant();
  opts.templates = &ctx.templates;
  const std::string weighting = f.weighting.value_or(ec.weighting);
  opts.weighting = weighting == "prompt" ? eval::OverallWeighting::Prompt : eval::OverallWeighting::Category;

  inference::HttpClient judge(ctx.cfg.endpoint("judge"));
  const bool bidi = f.bidirectional || ec.bidirectional;
  ctx.log(std::string(bidi ? "bidirectional" : "unidirectional") + " evaluation of " +
          std::to_string(suite.samples.size()) + " samples");
  const auto report = bidi ? eval::evaluate_bidirectional(suite, judge, opts) : eval::evaluate(suite, judge, opts);

  const fs::path dir = pick(f.output_dir, ec.output_dir, ctx);
  std::error_code errc;
  fs::create_directories(dir, errc);
  if (errc) {
    throw IoError(dir.string(), "cannot create output directory: " + errc.message());
  }
  const std::string stem = suite.name + (bidi ? "_bidirectional" : "");
  {
    JsonlWriter w(dir / (stem + "_report.jsonl"));
    w.write(meta_record("eval", ctx.seed));
    w.write(eval::encode(report));
  }
  const std::string table = eval::emit_report(report, eval::ReportFormat::Markdown);
  for (const auto& [ext, text] : {std::pair<std::string, std::string>{".md", table},
                                  {".csv", eval::emit_report(report, eval::ReportFormat::Csv)}}) {
    std::ofstream o(dir / (stem + ext), std::ios::binary);
    if (!o) {
      throw IoError((dir / (stem + ext)).string(), "cannot write report");
    }
    o << text;
  }

  ctx.out << table;
  ctx.out << "trials: " << report.trials << ", invalid: " << report.invalid << ", errored: " << report.errored
          << "\n";
  if (report.consistency_rate) {
    ctx.out << "consistency: " << std::fixed << std::setprecision(3) << *report.consistency_rate
            << std::defaultfloat << "\n";
  }
  ctx.out << "reports: " << (dir / stem).string() << "{_report.jsonl,.md,.csv}\n";
  if (report.errored > 0) {
    ctx.err << "warning: " << report.errored << " trial(s) failed and were excluded\n";
    return kExitPartial;
  }
  return kExitOk;
}

// ------------------------------------------------------------ serve-mock

struct ServeFlags {
  std::string scenario;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string transcript = "mock_transcript.jsonl";
  std::optional<std::string> default_response;
};

int cmd_serve_mock(Context& ctx, const ServeFlags& f) {
  require_file(f.scenario, "scenario");
  auto scenario = inference::load_scenario(f.scenario);

  // Block the stop signals before the server spawns threads so only sigwait sees them.
  sigset_t stop_set;
  sigemptyset(&stop_set);
  sigaddset(&stop_set, SIGINT);
  sigaddset(&stop_set, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &stop_set, &previous);

  int exit_code = kExitOk;
  try {
    inference::MockServerOptions opts;
    opts.host = f.host;
    opts.port = f.port;
    opts.default_response = f.default_response;
    inference::MockServer server(std::move(scenario), opts);
    ctx.out << "listening on " << server.base_url() << "\n" << std::flush;
    int sig = 0;
    sigwait(&stop_set, &sig);
    server.stop();
    server.write_transcript(f.transcript);
    ctx.out << "stopped; transcript (" << server.request_count() << " requests): " << f.transcript << "\n"
            << std::flush;
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw;
  }
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return exit_code;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Judge-model data curation, reward computation and evaluation.", "judgekit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "TOML config file");
  app.add_option("--seed", g.seed, "Seed for every random choice (overrides the config)");
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");

  CurateFlags curate_f;
  auto* curate = app.add_subcommand("curate", "Difficulty, diversity and accuracy filtering");
  curate->add_option("--dataset", curate_f.dataset, "Sample JSONL");
  curate->add_option("--embeddings", curate_f.embeddings, "Precomputed {id, vector} JSONL");
  curate->add_option("--output", curate_f.output, "Curated sample JSONL");
  curate->add_option("--report", curate_f.report, "Funnel report JSON");
  curate->add_option("--checkpoint-dir", curate_f.checkpoint_dir, "Stage checkpoints for resuming");
  curate->add_option("--target-n", curate_f.target_n, "Samples kept by diversity sampling");

  PairsFlags pairs_f;
  auto* pairs_cmd = app.add_subcommand("pairs", "Build chosen/rejected judgment pairs");
  pairs_cmd->add_option("--mode", pairs_f.mode, "critic or sampling")
      ->check(CLI::IsMember({"critic", "sampling"}));
  pairs_cmd->add_option("--iteration", pairs_f.iteration, "Iteration stamped on the pairs");
  pairs_cmd->add_option("--dataset", pairs_f.dataset, "Sample JSONL");
  pairs_cmd->add_option("--output", pairs_f.output, "Pair JSONL (appended on resume)");
  pairs_cmd->add_option("--stats", pairs_f.stats, "Stats JSON");
  pairs_cmd->add_option("--judge-outputs", pairs_f.judge_outputs, "Raw judge answers JSONL");

  RewardsFlags rewards_f;
  auto* rewards = app.add_subcommand("rewards", "Score judge outputs with the rule-based reward");
  rewards->add_option("input", rewards_f.input, "JSONL of {id, output, label, strength}")->required();
  rewards->add_option("--output", rewards_f.output, "Reward log JSONL");

  LossesFlags losses_f;
  auto* losses = app.add_subcommand("losses", "Evaluate SFT+DPO or GRPO objectives on log-prob records");
  losses->add_option("input", losses_f.input, "Pair log-prob or rollout JSONL")->required();
  losses->add_option("--output", losses_f.output, "Objective report JSONL");

  EvalFlags eval_f;
  auto* eval_cmd = app.add_subcommand("eval", "Pairwise benchmark evaluation");
  eval_cmd->add_option("--suite", eval_f.suite, "Suite JSONL (samples with category)");
  eval_cmd->add_flag("--bidirectional", eval_f.bidirectional, "Judge both response orders");
  eval_cmd->add_option("--output-dir", eval_f.output_dir, "Report directory");
  eval_cmd->add_option("--weighting", eval_f.weighting, "Overall score: category or prompt")
      ->check(CLI::IsMember({"category", "prompt"}));

  ServeFlags serve_f;
  auto* serve = app.add_subcommand("serve-mock", "Serve a scripted chat/embedding endpoint until interrupted");
  serve->add_option("scenario", serve_f.scenario, "Scenario JSONL")->required();
  serve->add_option("--port", serve_f.port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", serve_f.host, "Bind address")->capture_default_str();
  serve->add_option("--transcript", serve_f.transcript, "Transcript written on shutdown")->capture_default_str();
  serve->add_option("--default-response", serve_f.default_response, "Reply for unscripted prompts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    Context ctx(g, out, err);
    if (*curate) {
      return cmd_curate(ctx, curate_f);
    }
    if (*pairs_cmd) {
      return cmd_pairs(ctx, pairs_f);
    }
    if (*rewards) {
      return cmd_rewards(ctx, rewards_f);
    }
    if (*losses) {
      return cmd_losses(ctx, losses_f);
    }
    if (*eval_cmd) {
      return cmd_eval(ctx, eval_f);
    }
    if (*serve) {
      return cmd_serve_mock(ctx, serve_f);
    }
  } catch (const inference::InferenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPartial;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace judgekit::cli
