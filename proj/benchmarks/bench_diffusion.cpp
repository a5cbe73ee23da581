#include <benchmark/benchmark.h>

#include "tokdiff/diffusion.hpp"
#include "tokdiff/oracles.hpp"

using namespace tokdiff;

namespace {

// Uniform prediction for every position; isolates the sampler cost.
class FlatDenoiser final : public Denoiser {
 public:
  explicit FlatDenoiser(int K) : K_(K) {}
  int K() const override { return K_; }
  Matrix predict(const TokenGrid& x_t, int, const Condition&) const override {
    return Matrix(x_t.size(), K_, 1.0 / K_);
  }

 private:
  int K_;
};

void BM_ReverseStep(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const auto s = improved_schedule(100, K, 4, Layout::concatenated, 50);
  const FlatDenoiser d(K);
  TokenGrid x0(K, 4, 50);
  Rng rng(1);
  for (int& v : x0.tokens) v = static_cast<int>(rng.below(K));
  const TokenGrid x_t = corrupt(x0, 50, s, rng);
  for (auto _ : state) benchmark::DoNotOptimize(reverse_step(x_t, 50, d, Condition::of(0), s, 1.0, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(x_t.size()));
}

void BM_SampleToy(benchmark::State& state) {
  const auto s = PositionalScheduleTable::uniform(linear_schedule(10, 4), 1, 3);
  const BayesOracleDenoiser d(oracles::toy_distribution(), s);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_many(d, {}, s, {}, 7, 2000, threads));
}

}  // namespace

BENCHMARK(BM_ReverseStep)->Arg(16)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SampleToy)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);
