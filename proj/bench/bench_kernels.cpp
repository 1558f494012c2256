// Serial reference kernels against their OpenMP versions. Thread count comes
// from OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "dar/kernels.hpp"
#include "dar/rng.hpp"
#include "dar/search.hpp"
#include "synthetic.hpp"

using namespace dar;

namespace {

struct Workload {
    synthetic::Data data;
    EncoderParams params;
    std::vector<const SparseFeatures*> docs;
    std::vector<const SparseFeatures*> queries;
    DenseIndex index;
    Matrix query_vectors;
    Bm25Index bm25;

    Workload() {
        synthetic::Spec spec;
        spec.documents = 20000;
        spec.clusters = 50;
        spec.train_queries = 1000;
        spec.heldout_queries = 0;
        HashConfig hash;
        hash.vocab_dim = 1u << 16;
        data = synthetic::make_data(spec, hash);
        params = init_params(1, {hash.vocab_dim, 64, 64});
        for (const auto& d : data.corpus.documents()) docs.push_back(&d.features);
        for (const auto& ex : data.train.examples) queries.push_back(&ex.query.features);
        index = encode_corpus(data.corpus, params, Similarity::dot, Exec::serial);
        kernels::serial::encode_rows(queries, params.query, query_vectors);
        bm25 = build_bm25(data.corpus);
    }
};

const Workload& workload() {
    static const Workload w;
    return w;
}

template <bool Parallel>
void BM_encode_rows(benchmark::State& state) {
    const auto& w = workload();
    Matrix out;
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::omp::encode_rows(w.docs, w.params.document, out);
        else
            kernels::serial::encode_rows(w.docs, w.params.document, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.docs.size()));
}

template <bool Parallel>
void BM_dense_topk(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        auto r = Parallel ? kernels::omp::dense_topk_rows(w.query_vectors, w.index, 100)
                          : kernels::serial::dense_topk_rows(w.query_vectors, w.index, 100);
        benchmark::DoNotOptimize(r.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.query_vectors.rows));
}

template <bool Parallel>
void BM_bm25_topk(benchmark::State& state) {
    const auto& w = workload();
    for (auto _ : state) {
        auto r = Parallel ? kernels::omp::bm25_topk_rows(w.queries, w.bm25, 100)
                          : kernels::serial::bm25_topk_rows(w.queries, w.bm25, 100);
        benchmark::DoNotOptimize(r.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.queries.size()));
}

template <bool Parallel>
void BM_adam_update(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    std::vector<double> p(n), g(n), m(n, 0.0), v(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = rng.uniform(-1, 1);
        g[i] = rng.uniform(-1, 1);
    }
    const kernels::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001};
    for (auto _ : state) {
        if constexpr (Parallel)
            kernels::omp::adam_update(p, g, m, v, c);
        else
            kernels::serial::adam_update(p, g, m, v, c);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

}  // namespace

BENCHMARK(BM_encode_rows<false>)->Name("encode_rows/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_rows<true>)->Name("encode_rows/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dense_topk<false>)->Name("dense_topk/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_dense_topk<true>)->Name("dense_topk/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bm25_topk<false>)->Name("bm25_topk/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bm25_topk<true>)->Name("bm25_topk/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_adam_update<false>)->Name("adam_update/serial")->Arg(1 << 22)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_adam_update<true>)->Name("adam_update/omp")->Arg(1 << 22)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
