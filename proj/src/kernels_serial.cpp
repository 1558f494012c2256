#include <algorithm>
#include <numeric>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar::kernels {

std::vector<ScoredIndex> select_topk(std::span<const double> scores, std::span<const std::uint32_t> id_rank,
                                     std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return id_rank[a] < id_rank[b];
    };
    k = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
    std::vector<ScoredIndex> out(k);
    for (std::size_t r = 0; r < k; ++r) out[r] = {order[r], scores[order[r]]};
    return out;
}

namespace detail {

double dense_score(std::span<const double> q, double q_norm, std::span<const double> d, double d_norm,
                   Similarity metric) {
    const double qd = dot(q, d);
    return metric == Similarity::dot ? qd : qd / (q_norm * d_norm);
}

void bm25_score_all(const SparseFeatures& query, const Bm25Index& index, std::span<double> scores) {
    std::fill(scores.begin(), scores.end(), 0.0);
    const double k1 = index.params.k1;
    const double b = index.params.b;
    for (const auto& term : query) {
        const auto it = index.postings.find(term.index);
        if (it == index.postings.end()) continue;
        const double idf = index.idf(it->second.size());
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double len_norm = 1.0 - b + b * index.doc_lengths[p.doc] / index.avg_length;
            scores[p.doc] += idf * tf * (k1 + 1.0) / (tf + k1 * len_norm);
        }
    }
}

}  // namespace detail

namespace {

void check_query_norms(const Matrix& queries, const DenseIndex& index, std::span<const double> norms) {
    if (queries.cols != index.vectors.cols && index.size() > 0) throw Error("query dimension does not match index");
    if (index.metric != Similarity::cosine) return;
    for (std::size_t i = 0; i < queries.rows; ++i)
        if (norms[i] == 0.0) throw Error("cosine similarity with a zero query vector");
}

}  // namespace

namespace serial {

void encode_rows(std::span<const SparseFeatures* const> items, const TowerParams& tower, Matrix& out) {
    out = Matrix(items.size(), tower.bias.size());
    for (std::size_t i = 0; i < items.size(); ++i) encode_into(*items[i], tower, out.row(i));
}

void row_norms(const Matrix& m, std::span<double> out) {
    for (std::size_t i = 0; i < m.rows; ++i) out[i] = std::sqrt(dot(m.row(i), m.row(i)));
}

std::vector<std::vector<ScoredIndex>> dense_topk_rows(const Matrix& queries, const DenseIndex& index, std::size_t k) {
    std::vector<double> qnorms(queries.rows);
    row_norms(queries, qnorms);
    check_query_norms(queries, index, qnorms);
    std::vector<std::vector<ScoredIndex>> out(queries.rows);
    std::vector<double> scores(index.size());
    for (std::size_t i = 0; i < queries.rows; ++i) {
        for (std::size_t j = 0; j < index.size(); ++j)
            scores[j] = detail::dense_score(queries.row(i), qnorms[i], index.vectors.row(j), index.norms[j], index.metric);
        out[i] = select_topk(scores, index.id_rank, k);
    }
    return out;
}

std::vector<std::vector<ScoredIndex>> bm25_topk_rows(std::span<const SparseFeatures* const> queries,
                                                     const Bm25Index& index, std::size_t k) {
    std::vector<std::vector<ScoredIndex>> out(queries.size());
    std::vector<double> scores(index.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        detail::bm25_score_all(*queries[i], index, scores);
        out[i] = select_topk(scores, index.id_rank, k);
    }
    return out;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c) {
    for (std::size_t i = 0; i < params.size(); ++i) detail::adam_element(params[i], grads[i], m[i], v[i], c);
}

}  // namespace serial

}  // namespace dar::kernels
