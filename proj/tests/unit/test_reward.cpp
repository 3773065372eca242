#include <gtest/gtest.h>

#include "judgekit/error.hpp"
#include "judgekit/prompt.hpp"
#include "judgekit/reward.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

namespace jk = judgekit;
namespace rw = judgekit::reward;
namespace gen = judgekit::testing::gen;
using jk::testing::make_sample;

namespace {

jk::JudgeVerdict verdict(jk::Choice c, bool format_ok, std::optional<int> strength = std::nullopt) {
  jk::JudgeVerdict v;
  v.choice = c;
  v.format_ok = format_ok;
  v.strength_pred = strength;
  return v;
}

}  // namespace

TEST(Reward, ComponentValues) {
  EXPECT_EQ(rw::accuracy_reward(verdict(jk::Choice::A, true), jk::Label::A), 1.0);
  EXPECT_EQ(rw::accuracy_reward(verdict(jk::Choice::B, true), jk::Label::A), 0.0);
  EXPECT_EQ(rw::accuracy_reward(verdict(jk::Choice::Invalid, false), jk::Label::B), 0.0);
  EXPECT_EQ(rw::format_reward(true), 0.0);
  EXPECT_EQ(rw::format_reward(false), -0.5);
  EXPECT_EQ(rw::strength_reward(1, 3, jk::StrengthMode::Penalty), -2.0);
  EXPECT_EQ(rw::strength_reward(3, 1, jk::StrengthMode::Literal), 2.0);
  EXPECT_EQ(rw::strength_reward(std::nullopt, 3, jk::StrengthMode::Penalty), 0.0);
  EXPECT_EQ(rw::strength_reward(2, std::nullopt, jk::StrengthMode::Literal), 0.0);
  EXPECT_THROW(rw::strength_reward(0, 2, jk::StrengthMode::Penalty), jk::DomainError);
  EXPECT_THROW(rw::strength_reward(2, 4, jk::StrengthMode::Penalty), jk::DomainError);
}

TEST(Reward, DefaultWeightsIgnoreStrength) {
  auto s = make_sample("x", jk::Label::B, "", 3);
  const auto r = rw::final_reward(verdict(jk::Choice::B, true, 1), s, jk::RewardWeights{});
  EXPECT_EQ(r.r_final, 1.0);
  EXPECT_EQ(r.r_strength, -2.0);
  EXPECT_FALSE(r.r_margin);
}

TEST(Reward, MatchesScalarReference) {
  for (bool correct : {true, false}) {
    for (bool ok : {true, false}) {
      for (int delta : {0, 1, 2}) {
        for (auto mode : {jk::StrengthMode::Penalty, jk::StrengthMode::Literal}) {
          auto s = make_sample("x", jk::Label::A, "", 1);
          const auto v = verdict(correct ? jk::Choice::A : jk::Choice::B, ok, 1 + delta);
          jk::RewardWeights w{1.0, 1.0, 0.2, mode};
          const double expected = jk::testing::oracle::reward_reference(
              correct, ok, delta, mode == jk::StrengthMode::Penalty, 1.0, 1.0, 0.2);
          EXPECT_NEAR(rw::final_reward(v, s, w).r_final, expected, 1e-12);
        }
      }
    }
  }
}

TEST(Reward, ClosedFormCorners) {
  auto s = make_sample("x", jk::Label::A, "", 2);
  jk::RewardWeights w{1.0, 1.0, 0.2, jk::StrengthMode::Penalty};
  EXPECT_EQ(rw::final_reward(verdict(jk::Choice::A, true, 2), s, w).r_final, 1.0);
  w.gamma = 0.0;
  EXPECT_EQ(rw::final_reward(verdict(jk::Choice::B, false, 3), s, w).r_final, -0.5);
}

TEST(Reward, BoundsProperty) {
  // With unit weights and gamma in [0,1], r_final stays inside the range the
  // three components allow.
  gen::Engine e(3);
  for (int i = 0; i < 2000; ++i) {
    const double gamma = gen::uniform(e, 0, 1);
    auto s = make_sample("x", gen::label(e), "", 1 + static_cast<int>(gen::index(e, 3)));
    const auto c = std::array{jk::Choice::A, jk::Choice::B, jk::Choice::Invalid}[gen::index(e, 3)];
    const bool ok = c != jk::Choice::Invalid && gen::coin(e);
    const auto v = verdict(c, ok, 1 + static_cast<int>(gen::index(e, 3)));
    const auto mode = gen::coin(e) ? jk::StrengthMode::Penalty : jk::StrengthMode::Literal;
    const auto r = rw::final_reward(v, s, {1.0, 1.0, gamma, mode});
    ASSERT_GE(r.r_final, -0.5 - 2.0 * gamma - 1e-12);
    ASSERT_LE(r.r_final, 1.0 + 2.0 * gamma + 1e-12);
    ASSERT_TRUE(r.r_accuracy == 0.0 || r.r_accuracy == 1.0);
    ASSERT_TRUE(r.r_format == 0.0 || r.r_format == -0.5);
  }
}

TEST(Margin, SignConventions) {
  EXPECT_EQ(rw::margin_reward({80, 20}, jk::Choice::A, jk::Label::A, false), -60.0);
  EXPECT_EQ(rw::margin_reward({80, 20}, jk::Choice::A, jk::Label::B, false), 60.0);
  EXPECT_EQ(rw::margin_reward({80, 20}, jk::Choice::A, jk::Label::A, true), 60.0);
  EXPECT_EQ(rw::margin_reward({80, 20}, jk::Choice::A, jk::Label::B, true), -60.0);
  EXPECT_EQ(rw::margin_reward({40, 40}, jk::Choice::Invalid, jk::Label::A, true), -0.0);
  EXPECT_THROW(rw::margin_reward({101, 0}, jk::Choice::A, jk::Label::A, true), jk::DomainError);
  EXPECT_THROW(rw::margin_reward({5, -1}, jk::Choice::A, jk::Label::A, true), jk::DomainError);
}

TEST(Margin, ReplacesStrengthTerm) {
  const auto out = jk::prompt::compliant_output("t", jk::Choice::A, {jk::prompt::VariantKind::JudgmentMargin},
                                                std::nullopt, std::make_pair(90, 10));
  const auto v = jk::prompt::parse_verdict(out, {jk::prompt::VariantKind::JudgmentMargin});
  auto s = make_sample("m", jk::Label::A, "", 3);
  jk::RewardWeights w{1.0, 1.0, 0.5, jk::StrengthMode::Penalty, true, jk::MarginSign::Corrected};
  const auto r = rw::final_reward(v, s, w);
  EXPECT_EQ(r.r_strength, 0.0);
  ASSERT_TRUE(r.r_margin);
  EXPECT_EQ(*r.r_margin, 80.0);
  EXPECT_EQ(r.r_final, 81.0);
}

TEST(RewardLog, RecordShape) {
  auto s = make_sample("z", jk::Label::A);
  const auto j = rw::encode_reward_log("z", rw::final_reward(verdict(jk::Choice::A, true), s, {}));
  EXPECT_EQ(j["id"], "z");
  EXPECT_EQ(j["r_final"], 1.0);
  EXPECT_TRUE(j["r_margin"].is_null());
  EXPECT_EQ(j["weights"]["strength_mode"], "penalty");
}

TEST(ExtremeDetector, WindowedFraction) {
  rw::ExtremeScoreDetector d(2, 0.75);
  EXPECT_FALSE(d.alarmed());
  EXPECT_EQ(d.extreme_fraction(), 0.0);
  d.push({0, 100});
  EXPECT_EQ(d.extreme_fraction(), 1.0);
  EXPECT_TRUE(d.alarmed());
  d.push({50, 100});
  EXPECT_EQ(d.extreme_fraction(), 0.75);
  EXPECT_TRUE(d.alarmed());
  d.push({50, 60});  // evicts {0,100}
  EXPECT_EQ(d.extreme_fraction(), 0.25);
  EXPECT_FALSE(d.alarmed());
  EXPECT_EQ(d.size(), 2u);
}

TEST(ExtremeDetector, RejectsBadParameters) {
  EXPECT_THROW(rw::ExtremeScoreDetector(0, 0.5), jk::DomainError);
  EXPECT_THROW(rw::ExtremeScoreDetector(5, 0.0), jk::DomainError);
  EXPECT_THROW(rw::ExtremeScoreDetector(5, 1.5), jk::DomainError);
}

TEST(ExtremeDetector, MatchesRecountOverWindow) {
  gen::Engine e(8);
  const std::size_t window = 7;
  std::vector<std::pair<int, int>> stream;
  rw::ExtremeScoreDetector d(window, 0.5);
  for (int i = 0; i < 400; ++i) {
    auto pick = [&] { return gen::coin(e) ? (gen::coin(e) ? 0 : 100) : static_cast<int>(gen::index(e, 101)); };
    stream.emplace_back(pick(), pick());
    d.push(stream.back());
    const std::size_t from = stream.size() > window ? stream.size() - window : 0;
    int ext = 0;
    for (std::size_t k = from; k < stream.size(); ++k) {
      ext += (stream[k].first % 100 == 0) + (stream[k].second % 100 == 0);
    }
    const double expected = static_cast<double>(ext) / static_cast<double>(2 * (stream.size() - from));
    ASSERT_DOUBLE_EQ(d.extreme_fraction(), expected);
    ASSERT_EQ(rw::detect_score_extremes(stream, window, 0.5), expected >= 0.5);
  }
}
