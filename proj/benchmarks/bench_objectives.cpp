#include <benchmark/benchmark.h>

#include <random>

#include "judgekit/objectives.hpp"

namespace ob = judgekit::objectives;

static void BM_DpoSftLoss(benchmark::State& state) {
  const ob::PairLogProbs lp{-12.5, -14.0, -12.9, -13.1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ob::dpo_sft_loss(lp, 0.1));
  }
}
BENCHMARK(BM_DpoSftLoss);

static void BM_GrpoObjective(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lp(-20.0, -1.0), shift(-0.3, 0.3), rew(0.0, 1.0);
  judgekit::GroupRollout r{"bench", {}};
  for (int i = 0; i < g; ++i) {
    const double old = lp(rng);
    r.outputs.push_back({"", old + shift(rng), old, old + shift(rng), rew(rng), std::nullopt});
  }
  ob::assign_advantages(r, judgekit::AdvantageNorm::GroupStandardize);
  judgekit::ObjectiveConfig cfg;
  cfg.group_size = g;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ob::grpo_objective(r, cfg));
  }
}
BENCHMARK(BM_GrpoObjective)->Arg(8)->Arg(64);
