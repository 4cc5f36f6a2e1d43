#include <benchmark/benchmark.h>

#include <numeric>

#include "hybrec/data.hpp"
#include "hybrec/graph.hpp"
#include "hybrec/inference.hpp"
#include "hybrec/linalg.hpp"
#include "hybrec/quant.hpp"
#include "hybrec/trainer.hpp"

using namespace hybrec;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1, 1);
  return m;
}

// Default synthetic catalog with a one-epoch hybrid model, built once.
struct Fixture {
  PreparedGraph prepared;
  ModelParams model;

  static const Fixture& get() {
    static const Fixture f = [] {
      SyntheticConfig sc;
      sc.seed = 1;
      Fixture out{prepare_graph(split_leave_one_out(generate_synthetic(sc).data)), {}};
      out.model = ModelParams::init(ModelDims{}, Variant::hybrid, out.prepared.graph.num_nodes(), 1);
      TrainConfig tc;
      tc.epochs = 1;
      train(out.model, out.prepared.graph, out.prepared.corpus, tc);
      return out;
    }();
    return f;
  }
};

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, 32, 1), b = random_matrix(32, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Matmul)->Arg(1000)->Arg(7000);

void BM_Aggregate(benchmark::State& state) {
  const auto& f = Fixture::get();
  const Matrix h = random_matrix(f.prepared.graph.num_nodes(), 32, 3);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(f.prepared.graph, h));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.prepared.graph.num_edges()));
}
BENCHMARK(BM_Aggregate);

void BM_QuantizePerRow(benchmark::State& state) {
  const Matrix w = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(quantize_per_row(w));
}
BENCHMARK(BM_QuantizePerRow)->Arg(128)->Arg(4096);

void BM_ServeTopk(benchmark::State& state) {
  const auto& f = Fixture::get();
  const bool quantized = state.range(1) != 0;
  const auto mode = state.range(0) != 0 ? ServeMode::hot : ServeMode::cold;
  const ServingModel serving(f.model, f.prepared.graph, f.prepared.corpus, quantized);
  const EmbeddingCache cache = precompute(serving);
  std::vector<std::uint32_t> candidates(100);
  std::iota(candidates.begin(), candidates.end(), 0u);
  Rng rng(5);
  for (auto _ : state) {
    const auto user = static_cast<std::uint32_t>(rng.below(f.prepared.graph.num_users()));
    benchmark::DoNotOptimize(serve_topk(serving, &cache, mode, user, candidates, 10));
  }
}
BENCHMARK(BM_ServeTopk)
    ->ArgNames({"hot", "int8"})
    ->Args({0, 0})
    ->Args({1, 0})
    ->Args({0, 1})
    ->Args({1, 1})
    ->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
