#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "judgekit/curation.hpp"

static void BM_DiversitySample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vecs;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("s" + std::to_string(i));
    std::vector<double> v(256);
    for (double& x : v) {
      x = noise(rng);
    }
    vecs.push_back(std::move(v));
  }
  const auto emb = judgekit::EmbeddingSet::from_raw(ids, vecs);
  for (auto _ : state) {
    benchmark::DoNotOptimize(judgekit::curation::diversity_sample(emb, n / 2, 7));
  }
}
BENCHMARK(BM_DiversitySample)->Arg(256)->Arg(1024);
