#include "support/fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "judgekit/pairs.hpp"
#include "judgekit/serialization.hpp"

namespace judgekit::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("judgekit-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + p.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

PreferenceSample make_sample(const std::string& id, Label label, const std::string& category,
                             std::optional<int> strength) {
  PreferenceSample s;
  s.id = id;
  s.instruction = "Instruction for " + id;
  s.response_a = "First answer to " + id;
  s.response_b = "Second answer to " + id;
  s.label = label;
  s.strength_golden = strength;
  if (!category.empty()) {
    s.category = category;
  }
  s.source = "fixture";
  return s;
}

std::string answer(Choice c, prompt::TemplateVariant v, std::optional<int> strength) {
  return prompt::compliant_output("Compared both responses on accuracy and helpfulness.", c, v, strength);
}

void PromptIndex::add_judgment(const std::vector<PreferenceSample>& samples, prompt::TemplateVariant v,
                               bool with_swapped) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    map_[prompt::render_judgment_prompt(samples[i], v)] = PromptRef{i, false, false, Label::A};
    if (with_swapped) {
      map_[prompt::render_judgment_prompt(swapped(samples[i]), v)] = PromptRef{i, true, false, Label::A};
    }
  }
}

void PromptIndex::add_critic(const std::vector<PreferenceSample>& samples, prompt::TemplateVariant judgment_variant) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (Label t : {Label::A, Label::B}) {
      map_[pairs::critic_prompt_for(samples[i], t, judgment_variant)] = PromptRef{i, false, true, t};
    }
  }
}

const PromptRef* PromptIndex::find(const std::string& prompt) const {
  auto it = map_.find(prompt);
  return it == map_.end() ? nullptr : &it->second;
}

EmbeddingSet FunnelFixture::embeddings() const {
  std::vector<std::string> ids;
  for (const auto& s : samples) {
    ids.push_back(s.id);
  }
  return EmbeddingSet::from_raw(ids, raw_vectors);
}

const PreferenceSample& FunnelFixture::by_id(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) {
      return s;
    }
  }
  throw std::out_of_range("no sample " + id);
}

std::string FunnelFixture::judge_reply(const PreferenceSample& s) const {
  return answer(easy.count(s.id) ? s.label : other(s.label));
}

std::string FunnelFixture::annotator_reply(const PreferenceSample& s) const {
  return answer(mislabeled.count(s.id) ? other(s.label) : s.label);
}

FunnelFixture make_funnel_fixture() {
  constexpr int kEasy = 40;
  constexpr int kDistinct = 30;
  constexpr int kDuplicates = 30;
  constexpr int kMislabeled = 10;
  constexpr std::size_t kDim = kDistinct;
  static const char* const kCategories[] = {"Chat", "Chat Hard", "Safety", "Reasoning"};

  FunnelFixture fx;
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto id_of = [](int i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "s%03d", i);
    return std::string(buf);
  };

  for (int i = 0; i < kEasy + kDistinct + kDuplicates; ++i) {
    const std::string id = id_of(i);
    auto s = make_sample(id, i % 3 == 0 ? Label::B : Label::A, kCategories[i % 4], 1 + i % 3);
    std::vector<double> v(kDim, 0.0);
    if (i < kEasy) {
      fx.easy.insert(id);
      for (double& x : v) {
        x = noise(rng);
      }
    } else if (i < kEasy + kDistinct) {
      fx.distinct.insert(id);
      v[static_cast<std::size_t>(i - kEasy)] = 1.0;
      if (i < kEasy + kMislabeled) {
        fx.mislabeled.insert(id);
      }
    } else {
      // Centroid direction of the distinct block plus a little noise.
      fx.duplicates.insert(id);
      for (double& x : v) {
        x = 1.0 + 0.01 * noise(rng);
      }
    }
    fx.samples.push_back(std::move(s));
    fx.raw_vectors.push_back(std::move(v));
  }
  return fx;
}

inference::ScenarioEntry scripted(const std::string& prompt, const std::string& respond,
                                  const std::optional<std::string>& model) {
  inference::ScenarioEntry e;
  e.match = inference::prompt_fingerprint(prompt);
  e.respond = respond;
  e.model = model;
  return e;
}

void write_scenario(const fs::path& path, const std::vector<inference::ScenarioEntry>& entries) {
  JsonlWriter w(path);
  for (const auto& e : entries) {
    Json j;
    j["match"] = e.match;
    if (e.model) {
      j["model"] = *e.model;
    }
    j["respond"] = e.respond;
    j["status"] = e.status;
    j["delay_ms"] = e.delay_ms;
    if (e.times) {
      j["times"] = *e.times;
    }
    if (e.echo) {
      j["echo"] = true;
    }
    if (e.embedding) {
      j["embedding"] = *e.embedding;
    }
    w.write(j);
  }
}

std::vector<inference::ScenarioEntry> pipeline_scenario(const FunnelFixture& fx) {
  const prompt::TemplateVariant plain{prompt::VariantKind::JudgmentPlain};
  std::vector<inference::ScenarioEntry> out;
  for (std::size_t i = 0; i < fx.samples.size(); ++i) {
    const auto& s = fx.samples[i];
    const std::string p = prompt::render_judgment_prompt(s, plain);
    if (fx.easy.count(s.id) == 0) {
      // One wrong answer while sampling, correct afterwards.
      auto first = scripted(p, answer(other(s.label)), "judge");
      first.times = 1;
      out.push_back(first);
    }
    out.push_back(scripted(p, answer(s.label), "judge"));
    out.push_back(scripted(p, fx.annotator_reply(s), "annotator"));
    for (Label t : {Label::A, Label::B}) {
      out.push_back(scripted(pairs::critic_prompt_for(s, t, plain), answer(t), "critic"));
    }
    auto emb = scripted(s.instruction, "", "embed");
    emb.embedding = fx.raw_vectors[i];
    out.push_back(emb);
  }
  return out;
}

}  // namespace judgekit::testing
