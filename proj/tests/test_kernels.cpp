#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <numeric>

#include "dar/error.hpp"
#include "dar/kernels.hpp"
#include "dar/rng.hpp"
#include "dar/search.hpp"

using namespace dar;

namespace {

constexpr int kThreadCounts[] = {1, 2, 3, 4, 8};

// Restores the OpenMP thread count on scope exit.
struct ThreadGuard {
    int saved = omp_get_max_threads();
    ~ThreadGuard() { omp_set_num_threads(saved); }
};

struct Fixture {
    HashConfig hash;
    Corpus corpus;
    std::vector<Query> queries;
    EncoderParams params;

    Fixture() {
        hash.vocab_dim = 1u << 12;
        Rng rng(42);
        std::vector<Document> docs;
        for (std::size_t d = 0; d < 700; ++d) {
            std::string text;
            for (std::size_t i = 0, n = 1 + rng.below(15); i < n; ++i) text += "w" + std::to_string(rng.below(150)) + " ";
            // Duplicated texts create exact score ties.
            if (d % 50 == 0 && d > 0) text = docs[d - 1].text;
            docs.push_back(make_document("d" + std::to_string(d), "", text, hash));
        }
        corpus = Corpus(hash, std::move(docs));
        for (std::size_t q = 0; q < 97; ++q) {
            std::string text;
            for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) text += "w" + std::to_string(rng.below(160)) + " ";
            queries.push_back(make_query("q" + std::to_string(q), text, hash));
        }
        params = init_params(7, {hash.vocab_dim, 16, 16});
    }

    std::vector<const SparseFeatures*> doc_features() const {
        std::vector<const SparseFeatures*> out;
        for (const auto& d : corpus.documents()) out.push_back(&d.features);
        return out;
    }
    std::vector<const SparseFeatures*> query_features() const {
        std::vector<const SparseFeatures*> out;
        for (const auto& q : queries) out.push_back(&q.features);
        return out;
    }
};

}  // namespace

TEST_CASE("select_topk orders by score then id rank") {
    const std::vector<double> scores{1.0, 3.0, 3.0, -1.0, 2.0};
    const std::vector<std::uint32_t> rank{0, 4, 1, 2, 3};
    const auto top = kernels::select_topk(scores, rank, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].doc == 2);
    CHECK(top[1].doc == 1);
    CHECK(top[2].doc == 4);
    CHECK(kernels::select_topk(scores, rank, 10).size() == 5);
    CHECK(kernels::select_topk(scores, rank, 0).empty());
}

TEST_CASE("encode_rows and row_norms: parallel equals serial for every thread count") {
    ThreadGuard guard;
    const Fixture f;
    const auto items = f.doc_features();
    Matrix reference;
    kernels::serial::encode_rows(items, f.params.document, reference);
    std::vector<double> ref_norms(reference.rows);
    kernels::serial::row_norms(reference, ref_norms);
    for (const int threads : kThreadCounts) {
        omp_set_num_threads(threads);
        Matrix out;
        kernels::omp::encode_rows(items, f.params.document, out);
        CHECK(out == reference);
        std::vector<double> norms(out.rows);
        kernels::omp::row_norms(out, norms);
        CHECK(norms == ref_norms);
    }
}

TEST_CASE("dense top-k: parallel equals serial for every thread count") {
    ThreadGuard guard;
    const Fixture f;
    for (const auto metric : {Similarity::dot, Similarity::cosine}) {
        const auto index = encode_corpus(f.corpus, f.params, metric, Exec::serial);
        Matrix q;
        kernels::serial::encode_rows(f.query_features(), f.params.query, q);
        const auto reference = kernels::serial::dense_topk_rows(q, index, 50);
        for (const int threads : kThreadCounts) {
            omp_set_num_threads(threads);
            CHECK(kernels::omp::dense_topk_rows(q, index, 50) == reference);
            CHECK(dense_search(f.queries, index, f.params, 50, Exec::parallel) ==
                  dense_search(f.queries, index, f.params, 50, Exec::serial));
        }
    }
}

TEST_CASE("bm25 top-k: parallel equals serial for every thread count") {
    ThreadGuard guard;
    const Fixture f;
    const auto index = build_bm25(f.corpus);
    const auto reference = kernels::serial::bm25_topk_rows(f.query_features(), index, 100);
    for (const int threads : kThreadCounts) {
        omp_set_num_threads(threads);
        CHECK(kernels::omp::bm25_topk_rows(f.query_features(), index, 100) == reference);
        CHECK(bm25_search(f.queries, index, 100, Exec::parallel) == bm25_search(f.queries, index, 100, Exec::serial));
    }
}

TEST_CASE("adam update: parallel equals serial for every thread count") {
    ThreadGuard guard;
    Rng rng(3);
    std::vector<double> p(10007), g(10007), m(10007), v(10007);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform(-1, 1);
        g[i] = rng.uniform(-1, 1);
        m[i] = rng.uniform(-0.1, 0.1);
        v[i] = rng.uniform(0, 0.1);
    }
    const kernels::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
    auto rp = p, rm = m, rv = v;
    kernels::serial::adam_update(rp, g, rm, rv, c);
    for (const int threads : kThreadCounts) {
        omp_set_num_threads(threads);
        auto tp = p, tm = m, tv = v;
        kernels::omp::adam_update(tp, g, tm, tv, c);
        CHECK(tp == rp);
        CHECK(tm == rm);
        CHECK(tv == rv);
    }
}

TEST_CASE("parallel kernels report errors like the serial ones") {
    ThreadGuard guard;
    omp_set_num_threads(4);
    const Fixture f;
    const auto index = encode_corpus(f.corpus, f.params, Similarity::dot);
    const Matrix wrong(3, 5, 1.0);
    CHECK_THROWS_AS(kernels::serial::dense_topk_rows(wrong, index, 5), Error);
    CHECK_THROWS_AS(kernels::omp::dense_topk_rows(wrong, index, 5), Error);

    const SparseFeatures bad{{f.hash.vocab_dim, 1}};
    const std::vector<const SparseFeatures*> items{&bad};
    Matrix out;
    CHECK_THROWS_AS(kernels::serial::encode_rows(items, f.params.query, out), Error);
    CHECK_THROWS_AS(kernels::omp::encode_rows(items, f.params.query, out), Error);
}
