// Parallel kernels against their serial references.
//   efr_bench --benchmark_filter=Mips

#include <benchmark/benchmark.h>

#include <map>

#include "efr/encoder.hpp"
#include "efr/rng.hpp"
#include "efr/scorer.hpp"
#include "efr/sparse_index.hpp"
#include "efr/synth.hpp"

namespace {

struct DenseFixture {
  efr::DenseIndex index;
  efr::EmbeddingVector query;
};

const DenseFixture& dense_fixture(std::size_t n) {
  static std::map<std::size_t, DenseFixture> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  efr::Rng rng(17);
  constexpr std::size_t d = 64;
  std::vector<std::string> ids;
  std::vector<efr::EmbeddingVector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("p" + std::to_string(i));
    efr::EmbeddingVector v(d);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    rows.push_back(std::move(v));
  }
  DenseFixture f{efr::DenseIndex(ids, rows), efr::EmbeddingVector(d)};
  for (auto& x : f.query) x = static_cast<float>(rng.normal());
  return cache.emplace(n, std::move(f)).first->second;
}

template <auto Kernel>
void BM_Mips(benchmark::State& state) {
  const auto& f = dense_fixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.index, f.query, 80));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct SparseFixture {
  efr::InvertedIndex index;
  std::vector<efr::TermBag> queries;
};

const SparseFixture& sparse_fixture() {
  static const SparseFixture f = [] {
    efr::SynthConfig c;
    c.total_passages = 20000;
    c.entities_per_category = 60;
    c.train_queries = 1;
    c.test_queries = 512;
    const auto data = efr::generate_synthetic(c);
    SparseFixture s{efr::InvertedIndex::build(data.passages), {}};
    for (const auto& q : data.test_queries) s.queries.push_back(s.index.query_terms(q.question + " " + q.caption));
    return s;
  }();
  return f;
}

template <auto Kernel>
void BM_Bm25Batch(benchmark::State& state) {
  const auto& f = sparse_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(f.index, f.queries, 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.queries.size()));
}

}  // namespace

BENCHMARK(BM_Mips<efr::mips_topk_serial>)->Name("Mips/serial")->Arg(10000)->Arg(200000)->UseRealTime();
BENCHMARK(BM_Mips<efr::mips_topk>)->Name("Mips/omp")->Arg(10000)->Arg(200000)->UseRealTime();
BENCHMARK(BM_Bm25Batch<efr::bm25_search_batch_serial>)->Name("Bm25Batch/serial")->UseRealTime();
BENCHMARK(BM_Bm25Batch<efr::bm25_search_batch>)->Name("Bm25Batch/omp")->UseRealTime();

BENCHMARK_MAIN();
