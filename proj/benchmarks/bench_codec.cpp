#include <benchmark/benchmark.h>

#include "tokdiff/codec.hpp"
#include "tokdiff/random.hpp"

using namespace tokdiff;

namespace {

Matrix frames(std::size_t rows, std::size_t cols) {
  Rng rng(1);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_Quantize(benchmark::State& state, const char* preset, int dim) {
  const CodecModel m = random_codec(codec_preset(preset), dim, 2);
  const Matrix x = frames(static_cast<std::size_t>(state.range(0)), dim);
  for (auto _ : state) benchmark::DoNotOptimize(quantize(x, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Quantize, mel_vq, "mel-vq", 256)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Quantize, rvq, "rvq", 64)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Quantize, grvq, "grvq", 64)->Arg(64)->Unit(benchmark::kMillisecond);
