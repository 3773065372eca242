#include "judgekit/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <unordered_set>

namespace judgekit::eval {
namespace {

constexpr std::array<std::string_view, 4> kCanonicalCategories{"Chat", "Chat Hard", "Safety", "Reasoning"};

struct Trial {
  bool answered = false;
  bool correct = false;
  bool invalid = false;
};

const prompt::TemplateSet& templates_of(const EvalOptions& o) {
  static const prompt::TemplateSet defaults = prompt::TemplateSet::defaults();
  return o.templates != nullptr ? *o.templates : defaults;
}

void require_non_empty(const BenchmarkSuite& suite) {
  if (suite.samples.empty()) {
    throw DomainError("cannot evaluate empty suite '" + suite.name + "'");
  }
}

void require_aligned(const BenchmarkSuite& suite, std::span<const JudgedOutput> outputs) {
  if (outputs.size() != suite.samples.size()) {
    throw AlignmentError("expected " + std::to_string(suite.samples.size()) + " outputs, got " +
                         std::to_string(outputs.size()));
  }
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].id != suite.samples[i].id) {
      throw AlignmentError("output " + std::to_string(i) + " has id '" + outputs[i].id + "', expected '" +
                           suite.samples[i].id + "'");
    }
  }
}

std::vector<std::optional<std::string>> ask(inference::InferenceClient& judge, std::span<const std::string> prompts) {
  const auto results = inference::complete_batch(judge, prompts);
  std::vector<std::optional<std::string>> out;
  out.reserve(results.size());
  for (const auto& r : results) {
    out.push_back(r.text);
  }
  return out;
}

// Index of category order: canonical ones first, then by name.
bool category_before(const std::string& a, const std::string& b) {
  auto rank = [](const std::string& c) {
    const auto it = std::find(kCanonicalCategories.begin(), kCanonicalCategories.end(), c);
    return static_cast<std::size_t>(it - kCanonicalCategories.begin());
  };
  const auto ra = rank(a);
  const auto rb = rank(b);
  if (ra != rb) {
    return ra < rb;
  }
  return a < b;
}

// Trials are grouped per sample: `per_sample` consecutive trials each.
EvalReport tally(const BenchmarkSuite& suite, const std::vector<Trial>& trials, std::size_t per_sample,
                 const EvalOptions& options) {
  EvalReport r;
  r.suite = suite.name;
  r.weighting = options.weighting;
  std::map<std::string, CategoryResult> by_cat;
  std::size_t total_n = 0;
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < suite.samples.size(); ++i) {
    const std::string cat = suite.samples[i].category.value_or("");
    auto& c = by_cat[cat];
    c.name = cat;
    for (std::size_t d = 0; d < per_sample; ++d) {
      const Trial& t = trials[i * per_sample + d];
      if (!t.answered) {
        ++r.errored;
        continue;
      }
      ++c.n;
      ++r.trials;
      if (t.invalid) {
        ++r.invalid;
      }
      if (t.correct) {
        ++c.correct;
      }
    }
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (auto& [name, c] : by_cat) {
    c.accuracy = c.n == 0 ? 0.0 : static_cast<double>(c.correct) / static_cast<double>(c.n);
    if (c.n > 0) {
      sum += c.accuracy;
      ++counted;
    }
    total_n += c.n;
    total_correct += c.correct;
    r.categories.push_back(c);
  }
  std::sort(r.categories.begin(), r.categories.end(),
            [](const CategoryResult& a, const CategoryResult& b) { return category_before(a.name, b.name); });
  if (options.weighting == OverallWeighting::Category) {
    r.overall = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
  } else {
    r.overall = total_n == 0 ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(total_n);
  }
  return r;
}

Trial judge_trial(const std::optional<std::string>& output, Label label, const EvalOptions& options) {
  Trial t;
  if (!output) {
    return t;
  }
  const auto v = prompt::parse_verdict(*output, options.variant);
  t.answered = true;
  t.invalid = !v.format_ok;
  t.correct = matches(v.choice, label);
  return t;
}

EvalReport unidirectional(const BenchmarkSuite& suite, const std::vector<std::optional<std::string>>& outputs,
                          const EvalOptions& options) {
  std::vector<Trial> trials;
  trials.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    trials.push_back(judge_trial(outputs[i], suite.samples[i].label, options));
  }
  return tally(suite, trials, 1, options);
}

EvalReport bidirectional(const BenchmarkSuite& suite, const std::vector<std::optional<std::string>>& forward,
                         const std::vector<std::optional<std::string>>& backward, const EvalOptions& options) {
  std::vector<Trial> trials;
  trials.reserve(2 * suite.samples.size());
  std::size_t fwd_n = 0, fwd_ok = 0, bwd_n = 0, bwd_ok = 0;
  std::size_t pairs = 0, consistent = 0, both = 0;
  for (std::size_t i = 0; i < suite.samples.size(); ++i) {
    const Label label = suite.samples[i].label;
    const Trial f = judge_trial(forward[i], label, options);
    const Trial b = judge_trial(backward[i], other(label), options);
    trials.push_back(f);
    trials.push_back(b);
    fwd_n += f.answered;
    fwd_ok += f.answered && f.correct;
    bwd_n += b.answered;
    bwd_ok += b.answered && b.correct;
    if (f.answered && b.answered) {
      ++pairs;
      const Choice cf = prompt::parse_verdict(*forward[i], options.variant).choice;
      const Choice cb = prompt::parse_verdict(*backward[i], options.variant).choice;
      // Swapping positions maps A to the original B, so the same underlying
      // response is named by opposite letters.
      if (cf != Choice::Invalid && cb != Choice::Invalid && cf != cb) {
        ++consistent;
      }
      if (f.correct && b.correct) {
        ++both;
      }
    }
  }
  EvalReport r = tally(suite, trials, 2, options);
  auto rate = [](std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; };
  r.accuracy_forward = rate(fwd_ok, fwd_n);
  r.accuracy_swapped = rate(bwd_ok, bwd_n);
  r.consistency_rate = rate(consistent, pairs);
  r.both_correct_rate = rate(both, pairs);
  return r;
}

std::vector<std::optional<std::string>> texts_of(std::span<const JudgedOutput> outputs) {
  std::vector<std::optional<std::string>> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) {
    out.emplace_back(o.output);
  }
  return out;
}

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", rate * 100.0);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

const CategoryResult* EvalReport::category(std::string_view name) const {
  for (const auto& c : categories) {
    if (c.name == name) {
      return &c;
    }
  }
  return nullptr;
}

BenchmarkSuite load_suite(const std::filesystem::path& path, SuiteFormat format) {
  if (format != SuiteFormat::SampleJsonl) {
    throw DomainError("unsupported suite format");
  }
  BenchmarkSuite suite;
  suite.name = path.stem().string();
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](std::size_t, const Json& j) {
    auto s = decode<PreferenceSample>(j);
    if (!s.category || s.category->empty()) {
      throw ParseError(0, "sample '" + s.id + "' has no category");
    }
    if (!seen.insert(s.id).second) {
      throw ParseError(0, "duplicate sample id '" + s.id + "'");
    }
    suite.samples.push_back(std::move(s));
  });
  return suite;
}

EvalReport evaluate(const BenchmarkSuite& suite, inference::InferenceClient& judge, const EvalOptions& options) {
  require_non_empty(suite);
  std::vector<std::string> prompts;
  prompts.reserve(suite.samples.size());
  for (const auto& s : suite.samples) {
    prompts.push_back(prompt::render_judgment_prompt(s, options.variant, templates_of(options)));
  }
  return unidirectional(suite, ask(judge, prompts), options);
}

EvalReport evaluate(const BenchmarkSuite& suite, std::span<const JudgedOutput> outputs, const EvalOptions& options) {
  require_non_empty(suite);
  require_aligned(suite, outputs);
  return unidirectional(suite, texts_of(outputs), options);
}

EvalReport evaluate_bidirectional(const BenchmarkSuite& suite, inference::InferenceClient& judge,
                                  const EvalOptions& options) {
  require_non_empty(suite);
  const std::size_t n = suite.samples.size();
  std::vector<std::string> prompts;
  prompts.reserve(2 * n);
  for (const auto& s : suite.samples) {
    prompts.push_back(prompt::render_judgment_prompt(s, options.variant, templates_of(options)));
  }
  for (const auto& s : suite.samples) {
    prompts.push_back(prompt::render_judgment_prompt(swapped(s), options.variant, templates_of(options)));
  }
  auto all = ask(judge, prompts);
  std::vector<std::optional<std::string>> forward(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<std::optional<std::string>> backward(all.begin() + static_cast<std::ptrdiff_t>(n), all.end());
  return bidirectional(suite, forward, backward, options);
}

EvalReport evaluate_bidirectional(const BenchmarkSuite& suite, std::span<const JudgedOutput> forward,
                                  std::span<const JudgedOutput> swapped_outputs, const EvalOptions& options) {
  require_non_empty(suite);
  require_aligned(suite, forward);
  require_aligned(suite, swapped_outputs);
  return bidirectional(suite, texts_of(forward), texts_of(swapped_outputs), options);
}

double agreement(const BenchmarkSuite& suite, std::span<const JudgedOutput> outputs, prompt::TemplateVariant variant) {
  require_aligned(suite, outputs);
  if (outputs.empty()) {
    return 0.0;
  }
  std::size_t agree = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (matches(prompt::parse_verdict(outputs[i].output, variant).choice, suite.samples[i].label)) {
      ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(outputs.size());
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
  std::vector<std::string> header;
  std::vector<std::string> row;
  for (const auto& c : report.categories) {
    header.push_back(c.name.empty() ? "Uncategorized" : c.name);
    row.push_back(percent(c.accuracy));
  }
  header.emplace_back("Overall");
  row.push_back(percent(report.overall));
  if (report.consistency_rate) {
    header.emplace_back("Consistency");
    row.push_back(percent(*report.consistency_rate));
  }

  std::string out;
  if (format == ReportFormat::Csv) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      out += (i ? "," : "") + csv_field(header[i]);
    }
    out += "\n";
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + row[i];
    }
    out += "\n";
    return out;
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (const auto& c : cells) {
      s += " " + c + " |";
    }
    return s + "\n";
  };
  out += line(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) {
    out += " ---: |";
  }
  out += "\n";
  out += line(row);
  return out;
}

Json encode(const EvalReport& report) {
  Json j;
  j["suite"] = report.suite;
  Json cats = Json::array();
  for (const auto& c : report.categories) {
    cats.push_back(Json{{"name", c.name}, {"n", c.n}, {"correct", c.correct}, {"accuracy", c.accuracy}});
  }
  j["categories"] = std::move(cats);
  j["overall"] = report.overall;
  j["weighting"] = report.weighting == OverallWeighting::Category ? "category" : "prompt";
  j["trials"] = report.trials;
  j["invalid"] = report.invalid;
  j["errored"] = report.errored;
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  j["consistency_rate"] = opt(report.consistency_rate);
  j["accuracy_forward"] = opt(report.accuracy_forward);
  j["accuracy_swapped"] = opt(report.accuracy_swapped);
  j["both_correct_rate"] = opt(report.both_correct_rate);
  return j;
}

}  // namespace judgekit::eval
