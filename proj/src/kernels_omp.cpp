#include <omp.h>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar::kernels::omp {

void encode_rows(std::span<const SparseFeatures* const> items, const TowerParams& tower, Matrix& out) {
    const auto n = static_cast<std::int64_t>(items.size());
    out = Matrix(items.size(), tower.bias.size());
    // Out-of-range indices are rejected up front; nothing may throw inside the region.
    for (const auto* f : items)
        for (const auto& x : *f)
            if (x.index >= tower.embedding.rows)
                throw Error("feature index " + std::to_string(x.index) + " out of range for vocab " +
                            std::to_string(tower.embedding.rows));
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        encode_into(*items[r], tower, out.row(r));
    }
}

void row_norms(const Matrix& m, std::span<double> out) {
    const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        out[r] = std::sqrt(dot(m.row(r), m.row(r)));
    }
}

std::vector<std::vector<ScoredIndex>> dense_topk_rows(const Matrix& queries, const DenseIndex& index, std::size_t k) {
    std::vector<double> qnorms(queries.rows);
    row_norms(queries, qnorms);
    if (queries.cols != index.vectors.cols && index.size() > 0) throw Error("query dimension does not match index");
    if (index.metric == Similarity::cosine)
        for (const double n : qnorms)
            if (n == 0.0) throw Error("cosine similarity with a zero query vector");

    std::vector<std::vector<ScoredIndex>> out(queries.rows);
    const auto n = static_cast<std::int64_t>(queries.rows);
#pragma omp parallel
    {
        std::vector<double> scores(index.size());
#pragma omp for schedule(dynamic, 4)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(i);
            for (std::size_t j = 0; j < index.size(); ++j)
                scores[j] = detail::dense_score(queries.row(r), qnorms[r], index.vectors.row(j), index.norms[j],
                                                index.metric);
            out[r] = select_topk(scores, index.id_rank, k);
        }
    }
    return out;
}

std::vector<std::vector<ScoredIndex>> bm25_topk_rows(std::span<const SparseFeatures* const> queries,
                                                     const Bm25Index& index, std::size_t k) {
    std::vector<std::vector<ScoredIndex>> out(queries.size());
    const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel
    {
        std::vector<double> scores(index.size());
#pragma omp for schedule(dynamic, 4)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto r = static_cast<std::size_t>(i);
            detail::bm25_score_all(*queries[r], index, scores);
            out[r] = select_topk(scores, index.id_rank, k);
        }
    }
    return out;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
    const auto n = static_cast<std::int64_t>(params.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto e = static_cast<std::size_t>(i);
        detail::adam_element(params[e], grads[e], m[e], v[e], c);
    }
}

}  // namespace dar::kernels::omp
