#include <benchmark/benchmark.h>

#include <random>

#include "oodcrl/oodcrl.hpp"

using namespace oodcrl;

namespace {

LogitsMatrix random_logits(std::size_t n, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 3.0);
  std::vector<double> v(n * c);
  for (auto& x : v) x = d(rng);
  return LogitsMatrix(n, c, std::move(v));
}

LabelVector cyclic_labels(std::size_t n, std::size_t c) {
  std::vector<std::int32_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::int32_t>(i % c);
  return LabelVector(std::move(y));
}

void BM_FitCrm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto logits = random_logits(n, c, 1);
  const auto labels = cyclic_labels(n, c);
  for (auto _ : state) benchmark::DoNotOptimize(fit_crm(logits, labels));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FitCrm)->Args({10000, 10})->Args({50000, 100});

void BM_ScoreCrl(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  const auto crm = fit_crm(random_logits(c * 20, c, 2), cyclic_labels(c * 20, c));
  const auto test = random_logits(n, c, 3);
  for (auto _ : state) benchmark::DoNotOptimize(score_crl(crm, test));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_ScoreCrl)->Args({10000, 10})->Args({10000, 100});

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> id(n);
  std::vector<double> ood(n);
  for (auto& x : id) x = d(rng);
  for (auto& x : ood) x = d(rng) + 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(auroc(id, ood));
    benchmark::DoNotOptimize(fpr_at_tpr(id, ood));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_Auroc)->Arg(1000)->Arg(100000);

}  // namespace
BENCHMARK_MAIN();
