#include <benchmark/benchmark.h>

#include <vector>

#include "ehrqa/confidence.hpp"
#include "ehrqa/ehr.hpp"
#include "ehrqa/metrics.hpp"
#include "ehrqa/util.hpp"

namespace {

std::vector<ehrqa::EvalRecord> make_records(std::size_t n) {
  ehrqa::Rng rng(17);
  std::vector<ehrqa::EvalRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ehrqa::EvalRecord r;
    r.question_id = "q" + std::to_string(i);
    r.confidence = rng.uniform();
    r.is_correct = rng.uniform() < 0.6;
    r.answer_text = "a";
    out.push_back(std::move(r));
  }
  return out;
}

void BM_MetricCurve(benchmark::State& state) {
  auto records = make_records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ehrqa::metric_curve(records));
  }
}
BENCHMARK(BM_MetricCurve)->Arg(100)->Arg(580)->Arg(2000);

void BM_HcaccAtK(benchmark::State& state) {
  auto records = make_records(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ehrqa::hcacc_at_k(records, 70.0));
  }
}
BENCHMARK(BM_HcaccAtK)->Arg(100)->Arg(580)->Arg(2000);

void BM_WeightedConfidence(benchmark::State& state) {
  auto dist = ehrqa::ConfidenceDistribution::from_logprobs(
      {{0, -9.1}, {1, -6.2}, {2, -2.5}, {3, -0.4}, {4, -1.6}});
  for (auto _ : state) {
    benchmark::DoNotOptimize(ehrqa::weighted_logprob_confidence(dist));
  }
}
BENCHMARK(BM_WeightedConfidence);

void BM_GradeExactMatch(benchmark::State& state) {
  std::string predicted = "Potassium Chloride, insulin, Furosemide, d5w, NS";
  std::string gold = "potassium chloride, insulin, furosemide, d5w, ns";
  for (auto _ : state) {
    benchmark::DoNotOptimize(ehrqa::grade_exact_match(predicted, gold));
  }
}
BENCHMARK(BM_GradeExactMatch);

}  // namespace

BENCHMARK_MAIN();
