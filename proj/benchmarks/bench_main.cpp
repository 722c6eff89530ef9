// Microbenchmarks for the hot loops: factorization, neighbor search,
// tokenization and one MTL training step.

#include <benchmark/benchmark.h>

#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/factorization.hpp"
#include "subjqa/mtl.hpp"
#include "subjqa/neighborhood.hpp"

namespace {

subjqa::ExtractionMatrix random_matrix(std::size_t rows, std::size_t cols) {
  subjqa::Rng rng(1);
  subjqa::ExtractionMatrix m;
  for (std::size_t i = 0; i < rows; ++i) m.row_labels.push_back("i" + std::to_string(i));
  for (std::size_t j = 0; j < cols; ++j) m.col_labels.push_back("op|e" + std::to_string(j));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (rng.below(4) == 0) m.entries.push_back({i, j, 1.0 + static_cast<double>(rng.below(20))});
  return m;
}

void BM_Nmf(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = random_matrix(n, 2 * n);
  subjqa::NmfOptions o;
  o.k = 20;
  o.max_iters = 50;
  o.tol = 0;
  for (auto _ : state) benchmark::DoNotOptimize(subjqa::nmf(m, o));
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_Nmf)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Neighbors(benchmark::State& state) {
  const auto n = state.range(0);
  subjqa::Rng rng(2);
  subjqa::FactorModel f;
  f.extraction_embeddings.resize(n, 20);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.extraction_labels.push_back("op|x" + std::to_string(i));
    for (Eigen::Index k = 0; k < 20; ++k) f.extraction_embeddings(i, k) = rng.uniform();
  }
  f.item_embeddings = Eigen::MatrixXd::Ones(1, 20);
  f.item_labels = {"item"};
  for (auto _ : state) benchmark::DoNotOptimize(subjqa::build_neighborhood(f, 10));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Neighbors)->RangeMultiplier(2)->Range(256, 2048)->Complexity(benchmark::oNSquared)
    ->Unit(benchmark::kMillisecond);

void BM_Tokenize(benchmark::State& state) {
  std::string text;
  while (text.size() < 64 * 1024) {
    text += "The room wasn't great, but the staff (and the view!) were lovely. ";
  }
  for (auto _ : state) benchmark::DoNotOptimize(subjqa::tokenize(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_MtlStep(benchmark::State& state) {
  subjqa::WordVocabulary vocab;
  const auto data = subjqa::sentinel_toy_dataset(1, 3, vocab);
  subjqa::MtlConfig c;
  c.vocab_size = vocab.size();
  const auto params = subjqa::MtlParams::init(c, 1);
  auto grads = params;
  for (auto _ : state) {
    for (auto& [name, t] : grads.tensors()) t->setZero();
    benchmark::DoNotOptimize(subjqa::loss_and_gradient(data[0], params, true, true, &grads));
  }
}
BENCHMARK(BM_MtlStep);

}  // namespace

BENCHMARK_MAIN();
