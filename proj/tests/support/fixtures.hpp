#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "judgekit/embedding.hpp"
#include "judgekit/mock_server.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/types.hpp"

namespace judgekit::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& text);

PreferenceSample make_sample(const std::string& id, Label label, const std::string& category = "",
                             std::optional<int> strength = std::nullopt);

/// Compliant judge output for `c`.
std::string answer(Choice c, prompt::TemplateVariant v = {prompt::VariantKind::JudgmentPlain},
                   std::optional<int> strength = std::nullopt);
inline std::string answer(Label l, prompt::TemplateVariant v = {prompt::VariantKind::JudgmentPlain},
                          std::optional<int> strength = std::nullopt) {
  return answer(to_choice(l), v, strength);
}

/// Which sample (and how) a rendered prompt was built from.
struct PromptRef {
  std::size_t index = 0;
  bool swapped = false;
  bool critic = false;
  Label target = Label::A;  // critic prompts only
};

class PromptIndex {
 public:
  void add_judgment(const std::vector<PreferenceSample>& samples, prompt::TemplateVariant v,
                    bool with_swapped = false);
  /// Critic prompts for both targets, as the pair builder renders them.
  void add_critic(const std::vector<PreferenceSample>& samples, prompt::TemplateVariant judgment_variant);
  const PromptRef* find(const std::string& prompt) const;

 private:
  std::unordered_map<std::string, PromptRef> map_;
};

/// 100 samples: 40 the judge always gets right, 30 with near-identical
/// instruction embeddings, 30 with orthogonal ones, 10 of which carry the
/// wrong label. Expected funnel counts with target_n = 30: 100, 60, 30, 20.
struct FunnelFixture {
  std::vector<PreferenceSample> samples;
  std::vector<std::vector<double>> raw_vectors;  // aligned with samples
  std::set<std::string> easy;
  std::set<std::string> duplicates;
  std::set<std::string> distinct;
  std::set<std::string> mislabeled;

  EmbeddingSet embeddings() const;
  const PreferenceSample& by_id(const std::string& id) const;
  /// Judge reply: right for easy samples, wrong otherwise.
  std::string judge_reply(const PreferenceSample& s) const;
  /// Annotator reply: disagrees with the label exactly on mislabeled samples.
  std::string annotator_reply(const PreferenceSample& s) const;
};

FunnelFixture make_funnel_fixture();

inference::ScenarioEntry scripted(const std::string& prompt, const std::string& respond,
                                  const std::optional<std::string>& model = std::nullopt);
void write_scenario(const std::filesystem::path& path, const std::vector<inference::ScenarioEntry>& entries);

/// Mock scenario serving the funnel fixture and a compliant critic:
/// models "judge", "annotator", "critic" and "embed".
std::vector<inference::ScenarioEntry> pipeline_scenario(const FunnelFixture& fx);

}  // namespace judgekit::testing
