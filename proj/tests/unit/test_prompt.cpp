#include <cctype>

#include <gtest/gtest.h>

#include "judgekit/error.hpp"
#include "judgekit/prompt.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

namespace jk = judgekit;
namespace pr = judgekit::prompt;
namespace gen = judgekit::testing::gen;
using jk::testing::make_sample;

namespace {

const pr::TemplateVariant kPlain{pr::VariantKind::JudgmentPlain};
const pr::TemplateVariant kStrength{pr::VariantKind::JudgmentStrength};
const pr::TemplateVariant kMargin{pr::VariantKind::JudgmentMargin};

std::vector<std::string> codes(std::string_view out, pr::TemplateVariant v) {
  return pr::parse_verdict(out, v).violations;
}

bool has_code(std::string_view out, pr::TemplateVariant v, std::string_view code) {
  const auto c = codes(out, v);
  return std::find(c.begin(), c.end(), code) != c.end();
}

}  // namespace

TEST(Variants, NamesAndPairing) {
  for (auto k : pr::kAllVariants) {
    EXPECT_EQ(pr::parse_variant(pr::to_string(k)), k);
  }
  EXPECT_THROW(pr::parse_variant("judgment"), jk::DomainError);
  EXPECT_EQ(pr::critic_of(pr::VariantKind::JudgmentStrength), pr::VariantKind::CriticStrength);
  EXPECT_EQ(pr::judgment_of(pr::VariantKind::CriticPlain), pr::VariantKind::JudgmentPlain);
  EXPECT_THROW(pr::critic_of(pr::VariantKind::JudgmentMargin), jk::VariantMismatch);
}

TEST(Substitute, SinglePassLeavesUnknownNames) {
  const std::array<std::pair<std::string_view, std::string_view>, 2> values{{{"a", "{b}"}, {"b", "X"}}};
  EXPECT_EQ(pr::substitute("{a}-{b}-{c}-{", values), "{b}-X-{c}-{");
}

TEST(Render, JudgmentPromptCarriesSampleText) {
  auto s = make_sample("r1", jk::Label::A);
  s.instruction = "Say {response_b} literally";
  const auto p = pr::render_judgment_prompt(s, kPlain);
  EXPECT_NE(p.find("Say {response_b} literally"), std::string::npos);
  EXPECT_NE(p.find(s.response_a), std::string::npos);
  EXPECT_LT(p.find(s.response_a), p.find(s.response_b));
  EXPECT_THROW(pr::render_judgment_prompt(s, {pr::VariantKind::CriticPlain}), jk::VariantMismatch);
}

TEST(Render, CriticPromptNamesTargetAndStrength) {
  const auto s = make_sample("r2", jk::Label::A);
  const auto p = pr::render_critic_prompt(s, jk::Label::B, 3, {pr::VariantKind::CriticStrength});
  EXPECT_NE(p.find("Response (b) is better, with preference strength 3"), std::string::npos);
  EXPECT_THROW(pr::render_critic_prompt(s, jk::Label::B, std::nullopt, {pr::VariantKind::CriticStrength}),
               jk::MissingStrength);
  EXPECT_THROW(pr::render_critic_prompt(s, jk::Label::B, 4, {pr::VariantKind::CriticStrength}), jk::DomainError);
  EXPECT_THROW(pr::render_critic_prompt(s, jk::Label::B, 2, kPlain), jk::VariantMismatch);
  EXPECT_NO_THROW(pr::render_critic_prompt(s, jk::Label::A, std::nullopt, {pr::VariantKind::CriticPlain}));
}

TEST(Templates, LoadDirOverridesOnlyPresentFiles) {
  jk::testing::TempDir dir;
  jk::testing::write_file(dir / "judgment_plain.txt", "Q: {instruction}\nA: {response_a}\nB: {response_b}\n");
  const auto t = pr::TemplateSet::load_dir(dir.path());
  const auto s = make_sample("t", jk::Label::A);
  EXPECT_EQ(pr::render_judgment_prompt(s, kPlain, t),
            "Q: Instruction for t\nA: First answer to t\nB: Second answer to t\n");
  EXPECT_EQ(t.text(pr::VariantKind::JudgmentMargin), pr::TemplateSet::defaults().text(pr::VariantKind::JudgmentMargin));
  EXPECT_THROW(pr::TemplateSet::load_dir(dir / "nope"), jk::IoError);
}

TEST(Parse, PlainExamples) {
  const auto v = pr::parse_verdict("<think>a is precise</think>\nTherefore, Response (a) is better.", kPlain);
  EXPECT_TRUE(v.format_ok);
  EXPECT_EQ(v.choice, jk::Choice::A);
  EXPECT_EQ(v.trace.raw, "a is precise");

  EXPECT_TRUE(pr::parse_verdict("  \n<think>x</think>Response (b) is better", kPlain).format_ok);
  EXPECT_TRUE(has_code("Therefore, Response (a) is better.", kPlain, pr::code::kMissingThink));
  EXPECT_TRUE(has_code("<think>x Response (a) is better.", kPlain, pr::code::kUnclosedThink));
  EXPECT_TRUE(has_code("<think>x</think><think>y</think>Response (a) is better", kPlain, pr::code::kDuplicateThink));
  EXPECT_TRUE(has_code("x</think>Response (a) is better", kPlain, pr::code::kMalformedThink));
  EXPECT_TRUE(has_code("intro <think>x</think>Response (a) is better", kPlain, pr::code::kThinkNotAtStart));
  EXPECT_TRUE(has_code("<think>x</think>no verdict", kPlain, pr::code::kMissingChoice));

  const auto both = pr::parse_verdict("<think>x</think>Response (a) is better. Response (b) is better.", kPlain);
  EXPECT_FALSE(both.format_ok);
  EXPECT_EQ(both.choice, jk::Choice::Invalid);
  EXPECT_TRUE(has_code("<think>x</think>Response (a) is better [[2]]", kPlain, pr::code::kWrongVariantFormat));
}

TEST(Parse, ChoiceInsideTraceIsIgnored) {
  const auto v = pr::parse_verdict("<think>Response (b) is better? no.</think>Response (a) is better.", kPlain);
  EXPECT_TRUE(v.format_ok);
  EXPECT_EQ(v.choice, jk::Choice::A);
}

TEST(Parse, StrengthExamples) {
  const auto v = pr::parse_verdict(
      "<think>t</think>Therefore, Response (b) is better, and the preference strength is [[3]].", kStrength);
  EXPECT_TRUE(v.format_ok);
  EXPECT_EQ(v.choice, jk::Choice::B);
  EXPECT_EQ(v.strength_pred, 3);

  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better.", kStrength, pr::code::kMissingStrength));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better [[4]]", kStrength, pr::code::kBadStrength));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better [[0]]", kStrength, pr::code::kBadStrength));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better [[1]] [[2]]", kStrength, pr::code::kDuplicateStrength));
  EXPECT_TRUE(has_code("<think>t</think>[[2]] Response (a) is better", kStrength, pr::code::kOutOfOrder));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better [[two]]", kStrength, pr::code::kMalformedMarker));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better [[2", kStrength, pr::code::kMalformedMarker));
  EXPECT_TRUE(has_code("<think>t</think>[[30]] and [[70]]", kStrength, pr::code::kWrongVariantFormat));

  // A bad strength still reports the choice it found.
  const auto bad = pr::parse_verdict("<think>t</think>Response (a) is better [[9]]", kStrength);
  EXPECT_EQ(bad.choice, jk::Choice::A);
  EXPECT_FALSE(bad.format_ok);
  EXPECT_FALSE(bad.strength_pred);
}

TEST(Parse, MarginExamples) {
  const auto v = pr::parse_verdict("<think>t</think>scores are [[30]] and [[85]], respectively.", kMargin);
  EXPECT_TRUE(v.format_ok);
  EXPECT_EQ(v.choice, jk::Choice::B);
  EXPECT_EQ(v.quality_scores, std::make_pair(30, 85));

  const auto tie = pr::parse_verdict("<think>t</think>[[50]] and [[50]]", kMargin);
  EXPECT_FALSE(tie.format_ok);
  EXPECT_EQ(tie.choice, jk::Choice::Invalid);
  EXPECT_EQ(tie.quality_scores, std::make_pair(50, 50));
  EXPECT_EQ(tie.violations, std::vector<std::string>{"TIE_SCORES"});

  EXPECT_TRUE(has_code("<think>t</think>[[101]] and [[5]]", kMargin, pr::code::kBadScore));
  EXPECT_TRUE(has_code("<think>t</think>[[10]] or [[5]]", kMargin, pr::code::kMissingScores));
  EXPECT_TRUE(has_code("<think>t</think>[[10]] and [[5]] and [[7]]", kMargin, pr::code::kDuplicateScores));
  EXPECT_TRUE(has_code("<think>t</think>Response (a) is better", kMargin, pr::code::kWrongVariantFormat));
}

TEST(Parse, CriticKindsUseJudgmentGrammar) {
  const auto out = pr::compliant_output("why", jk::Choice::B, kStrength, 1);
  const auto v = pr::parse_verdict(out, {pr::VariantKind::CriticStrength});
  EXPECT_TRUE(v.format_ok);
  EXPECT_EQ(v.strength_pred, 1);
  EXPECT_EQ(v.trace.origin, jk::TraceOrigin::Critic);
}

TEST(Parse, InvariantChoiceImpliesFormat) {
  gen::Engine e(99);
  for (int i = 0; i < 3000; ++i) {
    const std::string s = gen::token_soup(e, 12);
    for (auto k : pr::kAllVariants) {
      const auto v = pr::parse_verdict(s, {k});
      if (v.format_ok) {
        ASSERT_NE(v.choice, jk::Choice::Invalid) << s;
        ASSERT_TRUE(v.violations.empty());
      } else {
        ASSERT_FALSE(v.violations.empty()) << s;
      }
      const auto fc = pr::check_format(s, {k});
      ASSERT_EQ(fc.ok, v.format_ok);
      ASSERT_EQ(fc.violations, v.violations);
    }
  }
}

TEST(Parse, TotalOnArbitraryBytes) {
  gen::Engine e(1234);
  for (int i = 0; i < 5000; ++i) {
    const std::string s = gen::bytes(e, 200);
    for (auto k : pr::kAllVariants) {
      ASSERT_NO_THROW((void)pr::parse_verdict(s, {k}));
    }
  }
}

TEST(Parse, AgreesWithGrammarOracle) {
  gen::Engine e(4242);
  int accepted = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string s = gen::token_soup(e, 10);
    if (gen::index(e, 4) != 0) {
      s = "<think>" + gen::prose(e, 6) + "</think>" + s;
    }
    for (auto k : {pr::VariantKind::JudgmentPlain, pr::VariantKind::JudgmentStrength, pr::VariantKind::JudgmentMargin}) {
      std::optional<int> strength;
      const auto expected = jk::testing::oracle::grammar_accepts(s, k, &strength);
      const auto v = pr::parse_verdict(s, {k});
      ASSERT_EQ(v.format_ok, expected.has_value()) << pr::to_string(k) << ": " << s;
      if (expected) {
        ++accepted;
        ASSERT_EQ(v.choice, *expected) << s;
        if (k == pr::VariantKind::JudgmentStrength) {
          ASSERT_EQ(v.strength_pred, strength) << s;
        }
      }
    }
  }
  // The generator has to reach the accepting side often enough to matter.
  EXPECT_GT(accepted, 200);
}

TEST(Parse, RoundTripCompliantOutputs) {
  gen::Engine e(77);
  for (int i = 0; i < 1000; ++i) {
    const auto c = gen::coin(e) ? jk::Choice::A : jk::Choice::B;
    const int strength = 1 + static_cast<int>(gen::index(e, 3));
    const std::string trace = gen::prose(e, 30);
    const auto kind = pr::kAllVariants[gen::index(e, pr::kAllVariants.size())];
    std::optional<std::pair<int, int>> scores;
    if (pr::judgment_of(kind) == pr::VariantKind::JudgmentMargin) {
      int hi = 1 + static_cast<int>(gen::index(e, 100));
      int lo = static_cast<int>(gen::index(e, static_cast<std::size_t>(hi)));
      scores = c == jk::Choice::A ? std::make_pair(hi, lo) : std::make_pair(lo, hi);
    }
    const auto out = pr::compliant_output(trace, c, {kind}, strength, scores);
    const auto v = pr::parse_verdict(out, {kind});
    ASSERT_TRUE(v.format_ok) << out;
    ASSERT_EQ(v.choice, c);
    ASSERT_EQ(v.trace.raw, trace);
    if (pr::uses_strength(kind)) {
      ASSERT_EQ(v.strength_pred, strength);
    }
    if (scores) {
      ASSERT_EQ(v.quality_scores, scores);
    }
  }
}

TEST(ClipTrace, KeepsTextAfterLastClose) {
  EXPECT_EQ(pr::clip_trace("<think>long deliberation</think>\n  Summary here.  "), "Summary here.");
  EXPECT_EQ(pr::clip_trace("a</think>b</think> c "), "c");
}

TEST(ClipTrace, FallsBackToLastBlock) {
  EXPECT_EQ(pr::clip_trace("step one\nstep two\n\nso (a) wins\nbecause\n"), "so (a) wins\nbecause");
  EXPECT_EQ(pr::clip_trace("one block only"), "one block only");
  EXPECT_EQ(pr::clip_trace("x\n   \t\ny"), "y");
}

TEST(ClipTrace, EmptyResultThrows) {
  EXPECT_THROW(pr::clip_trace(""), jk::EmptyAfterClip);
  EXPECT_THROW(pr::clip_trace("<think>all inside</think>   "), jk::EmptyAfterClip);
}

TEST(ClipTrace, ResultIsTrimmedAndMarkerFree) {
  gen::Engine e(5);
  for (int i = 0; i < 500; ++i) {
    const std::string raw = gen::token_soup(e, 8) + gen::prose(e, 10);
    try {
      const auto out = pr::clip_trace(raw);
      ASSERT_FALSE(out.empty());
      ASSERT_FALSE(std::isspace(static_cast<unsigned char>(out.front())));
      ASSERT_FALSE(std::isspace(static_cast<unsigned char>(out.back())));
      ASSERT_EQ(out.find("<think>"), std::string::npos) << raw;
    } catch (const jk::EmptyAfterClip&) {
    }
  }
}
