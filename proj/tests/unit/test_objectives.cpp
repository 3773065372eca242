#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "judgekit/error.hpp"
#include "judgekit/objectives.hpp"
#include "judgekit/serialization.hpp"
#include "support/checks.hpp"
#include "support/fixtures.hpp"
#include "support/gen.hpp"

namespace jk = judgekit;
namespace ob = judgekit::objectives;
namespace gen = judgekit::testing::gen;

TEST(LogSigmoid, StableAtExtremes) {
  EXPECT_NEAR(ob::log_sigmoid(0.0), -std::log(2.0), 1e-15);
  EXPECT_NEAR(ob::log_sigmoid(-800.0), -800.0, 1e-12);
  EXPECT_EQ(ob::log_sigmoid(800.0), -0.0);
  EXPECT_TRUE(std::isfinite(ob::log_sigmoid(-1e6)));
}

TEST(Dpo, IdentityCase) {
  const auto r = ob::dpo_sft_loss({-1.0, -1.0, -1.0, -1.0}, 0.1);
  EXPECT_NEAR(r.value, 1.0 + std::log(2.0), 1e-12);
  EXPECT_NEAR(r.per_term.at("sft"), 1.0, 1e-15);
  EXPECT_NEAR(r.per_term.at("dpo"), std::log(2.0), 1e-15);
  EXPECT_NEAR(r.grads.at("theta_w"), -1.05, 1e-15);
  EXPECT_NEAR(r.grads.at("theta_l"), 0.05, 1e-15);
}

TEST(Dpo, RejectsBadInput) {
  EXPECT_THROW(ob::dpo_sft_loss({0.1, -1.0, -1.0, -1.0}, 0.1), jk::DomainError);
  EXPECT_THROW(ob::dpo_sft_loss({-1.0, -1.0, -1.0, std::nan("")}, 0.1), jk::DomainError);
  EXPECT_THROW(ob::dpo_sft_loss({-1.0, -1.0, -1.0, -1.0}, 0.0), jk::DomainError);
}

TEST(Dpo, GradientsMatchFiniteDifferences) {
  const auto r = jk::testing::check_dpo_gradients(300, 11, 1e-6);
  EXPECT_EQ(r.failures, 0u) << r.first_failure << " worst " << r.worst;
}

TEST(Dpo, DecreasesAsMarginGrows) {
  gen::Engine e(2);
  for (int i = 0; i < 500; ++i) {
    auto lp = jk::testing::random_pair(e);
    const double before = ob::dpo_sft_loss(lp, 0.5).per_term.at("dpo");
    lp.theta_l = std::max(lp.theta_l - 1.0, -40.0);
    const double after = ob::dpo_sft_loss(lp, 0.5).per_term.at("dpo");
    ASSERT_LE(after, before);
  }
}

TEST(Advantages, ZeroVarianceGivesExactZeros) {
  const std::vector<double> same(8, 0.7);
  for (auto norm : {jk::AdvantageNorm::GroupStandardize, jk::AdvantageNorm::GroupCenter}) {
    for (double a : ob::group_advantages(same, norm)) {
      EXPECT_EQ(a, 0.0);
    }
  }
  EXPECT_TRUE(ob::group_advantages(std::vector<double>{}, jk::AdvantageNorm::GroupCenter).empty());
}

TEST(Advantages, KnownValues) {
  const std::vector<double> r{1.0, 0.0, 0.0, 1.0};
  const auto c = ob::group_advantages(r, jk::AdvantageNorm::GroupCenter);
  EXPECT_EQ(c, (std::vector<double>{0.5, -0.5, -0.5, 0.5}));
  const auto s = ob::group_advantages(r, jk::AdvantageNorm::GroupStandardize);
  EXPECT_NEAR(s[0], 1.0, 1e-7);
  EXPECT_NEAR(s[1], -1.0, 1e-7);
}

TEST(Advantages, SumToZeroProperty) {
  gen::Engine e(6);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> r(1 + gen::index(e, 16));
    for (double& x : r) {
      x = gen::coin(e) ? static_cast<double>(gen::index(e, 3)) : gen::uniform(e, -5, 5);
    }
    for (auto norm : {jk::AdvantageNorm::GroupStandardize, jk::AdvantageNorm::GroupCenter}) {
      const auto a = ob::group_advantages(r, norm);
      ASSERT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 0.0, 1e-9);
    }
  }
}

TEST(Kl, NonNegativeAndZeroOnlyAtEquality) {
  EXPECT_EQ(ob::kl_low_var(-3.0, -3.0), 0.0);
  gen::Engine e(4);
  for (int i = 0; i < 2000; ++i) {
    const double a = gen::log_prob(e);
    const double b = gen::log_prob(e);
    ASSERT_GE(ob::kl_low_var(a, b), 0.0);
  }
}

TEST(Grpo, ZeroVarianceGroupGivesZero) {
  jk::ObjectiveConfig cfg;
  cfg.beta_kl = 0.0;
  jk::GroupRollout r{"p", {}};
  gen::Engine e(1);
  for (int i = 0; i < cfg.group_size; ++i) {
    r.outputs.push_back({"o", gen::log_prob(e, -5, -0.1), gen::log_prob(e, -5, -0.1), -1.0, 1.0, std::nullopt});
  }
  ob::assign_advantages(r, cfg.advantage_norm);
  const auto rep = ob::grpo_objective(r, cfg);
  EXPECT_EQ(rep.value, 0.0);
  EXPECT_EQ(rep.per_term.at("policy"), 0.0);
}

TEST(Grpo, ClipInertWhenRatiosInsideBand) {
  gen::Engine e(12);
  jk::ObjectiveConfig cfg;
  cfg.beta_kl = 0.0;
  for (int i = 0; i < 500; ++i) {
    jk::GroupRollout r{"p", {}};
    double unclipped = 0.0;
    for (int k = 0; k < cfg.group_size; ++k) {
      jk::RolloutOutput o;
      o.logp_old = gen::log_prob(e, -10, -1);
      o.logp_theta = o.logp_old + gen::uniform(e, std::log(1 - cfg.eps_clip), std::log(1 + cfg.eps_clip));
      o.reward = gen::uniform(e, 0, 1);
      r.outputs.push_back(o);
    }
    ob::assign_advantages(r, cfg.advantage_norm);
    for (const auto& o : r.outputs) {
      unclipped += std::exp(o.logp_theta - o.logp_old) * *o.advantage;
    }
    const auto rep = ob::grpo_objective(r, cfg);
    ASSERT_NEAR(rep.value, unclipped / cfg.group_size, 1e-12);
  }
}

TEST(Grpo, GradientsMatchFiniteDifferences) {
  const auto r = jk::testing::check_grpo_gradients(200, 21, 1e-6);
  EXPECT_EQ(r.failures, 0u) << r.first_failure << " worst " << r.worst;
}

TEST(Grpo, RejectsBadRollouts) {
  jk::ObjectiveConfig cfg;
  cfg.group_size = 2;
  jk::GroupRollout r{"p", {{"a", -1, -1, -1, 1, 0.5}}};
  EXPECT_THROW(ob::grpo_objective(r, cfg), jk::SizeMismatch);
  r.outputs.push_back({"b", -1, -1, -1, 0, std::nullopt});
  EXPECT_THROW(ob::grpo_objective(r, cfg), jk::DomainError);
  r.outputs[1].advantage = -0.5;
  r.outputs[1].logp_theta = 0.2;
  EXPECT_THROW(ob::grpo_objective(r, cfg), jk::DomainError);
  cfg.eps_clip = 0.0;
  r.outputs[1].logp_theta = -1;
  EXPECT_THROW(ob::grpo_objective(r, cfg), jk::DomainError);
}

TEST(Export, WritesOneRecordPerLine) {
  jk::testing::TempDir dir;
  std::vector<jk::PreferencePair> pairs{{"p", "c", "r", jk::Provenance::CriticGuided, 1, "s"},
                                        {"p2", "c2", "r2", jk::Provenance::Sampled, 2, std::nullopt}};
  EXPECT_EQ(ob::export_training_batch(pairs, dir / "pairs.jsonl"), 2u);
  EXPECT_EQ(jk::read_jsonl<jk::PreferencePair>(dir / "pairs.jsonl"), pairs);

  gen::Engine e(3);
  std::vector<jk::GroupRollout> rollouts{jk::testing::random_rollout(e, 4, 0.2)};
  EXPECT_EQ(ob::export_training_batch(rollouts, dir / "rollouts.jsonl"), 1u);
  EXPECT_EQ(jk::read_jsonl<jk::GroupRollout>(dir / "rollouts.jsonl"), rollouts);

  EXPECT_THROW(ob::export_training_batch(pairs, dir / "missing" / "x.jsonl"), jk::IoError);
}

TEST(Export, ReportEncoding) {
  const auto j = ob::encode(ob::dpo_sft_loss({-1, -2, -1, -2}, 0.1));
  EXPECT_TRUE(j.contains("value"));
  EXPECT_TRUE(j["per_term"].contains("dpo"));
  EXPECT_TRUE(j["grads"].contains("theta_l"));
}
