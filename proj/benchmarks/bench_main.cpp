#include <vector>

#include "benchmark/benchmark.h"
#include "tailcp/calibrate.hpp"
#include "tailcp/data.hpp"
#include "tailcp/kmeans.hpp"
#include "tailcp/rng.hpp"
#include "tailcp/scores.hpp"

namespace {

using namespace tailcp;

std::vector<double> random_scores(int n) {
  Rng rng(1);
  std::vector<double> s(n);
  for (double& v : s) v = rng.uniform01();
  return s;
}

void BM_ConformalQuantile(benchmark::State& state) {
  const auto scores = random_scores(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(conformal_quantile(scores, 0.1));
}
BENCHMARK(BM_ConformalQuantile)->Range(1 << 8, 1 << 18);

void BM_CandidateScores(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto profile = exponential_profile(K, 200, 50.0);
  const auto data = synth_generate(profile, {}, 3);
  ScoreSpec spec;
  spec.base = BaseScore::aps;
  for (auto _ : state)
    benchmark::DoNotOptimize(candidate_scores(spec, data.probs));
  state.SetItemsProcessed(state.iterations() * data.probs.rows() * K);
}
BENCHMARK(BM_CandidateScores)->Arg(10)->Arg(100)->Arg(1000);

void BM_ClusterCalibration(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto profile = exponential_profile(K, 400, 20.0);
  const auto data = synth_generate(profile, {}, 5);
  ScoreSpec spec;
  spec.base = BaseScore::lac;
  const auto scores = calibration_scores(spec, data.probs, data.batch);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        calibrate_cluster(scores, data.batch, K, 0.1, 4, 0.8, 7));
}
BENCHMARK(BM_ClusterCalibration)->Arg(20)->Arg(100);

void BM_Kmeans(benchmark::State& state) {
  Rng rng(9);
  std::vector<std::vector<double>> pts(state.range(0), std::vector<double>(5));
  for (auto& p : pts)
    for (double& x : p) x = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(pts, 4, 11));
}
BENCHMARK(BM_Kmeans)->Arg(50)->Arg(500);

void BM_SynthGenerate(benchmark::State& state) {
  const auto profile = exponential_profile(20, 1040, 50.0);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(synth_generate(profile, {}, ++seed));
  state.SetItemsProcessed(state.iterations() * profile.total());
}
BENCHMARK(BM_SynthGenerate);

}  // namespace

BENCHMARK_MAIN();
