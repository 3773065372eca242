#include <benchmark/benchmark.h>

#include "judgekit/prompt.hpp"

namespace pr = judgekit::prompt;

static void BM_ParseCompliant(benchmark::State& state) {
  const pr::TemplateVariant v{pr::VariantKind::JudgmentStrength};
  const std::string out = pr::compliant_output(std::string(2000, 'x'), judgekit::Choice::B, v, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pr::parse_verdict(out, v));
  }
}
BENCHMARK(BM_ParseCompliant);

static void BM_ParseGarbage(benchmark::State& state) {
  const pr::TemplateVariant v{pr::VariantKind::JudgmentPlain};
  std::string junk;
  for (int i = 0; i < 200; ++i) {
    junk += "[[ Response (a <think ]] ";
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(pr::parse_verdict(junk, v));
  }
}
BENCHMARK(BM_ParseGarbage);

static void BM_ClipTrace(benchmark::State& state) {
  std::string raw;
  for (int i = 0; i < 50; ++i) {
    raw += "deliberation step " + std::to_string(i) + "\n\n";
  }
  raw += "</think>\nThe first response is correct and complete.";
  for (auto _ : state) {
    benchmark::DoNotOptimize(pr::clip_trace(raw));
  }
}
BENCHMARK(BM_ClipTrace);
