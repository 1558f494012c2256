#pragma once

// Data-parallel inner loops. Every kernel exists twice: serial:: is the
// reference implementation, omp:: splits independent rows (or elements)
// across OpenMP threads. Each output element is computed by exactly the same
// floating-point sequence in both, so results are bitwise identical for any
// thread count.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dar/corpus.hpp"
#include "dar/encoder.hpp"
#include "dar/linalg.hpp"
#include "dar/search.hpp"

namespace dar::kernels {

struct ScoredIndex {
    std::size_t doc = 0;
    double score = 0.0;
    bool operator==(const ScoredIndex&) const = default;
};

// Top k of one score row by (score desc, id_rank asc).
std::vector<ScoredIndex> select_topk(std::span<const double> scores, std::span<const std::uint32_t> id_rank,
                                     std::size_t k);

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias1;  // 1 - beta1^t
    double bias2;  // 1 - beta2^t
};

namespace serial {

void encode_rows(std::span<const SparseFeatures* const> items, const TowerParams& tower, Matrix& out);
void row_norms(const Matrix& m, std::span<double> out);
std::vector<std::vector<ScoredIndex>> dense_topk_rows(const Matrix& queries, const DenseIndex& index, std::size_t k);
std::vector<std::vector<ScoredIndex>> bm25_topk_rows(std::span<const SparseFeatures* const> queries,
                                                     const Bm25Index& index, std::size_t k);
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);

}  // namespace serial

namespace omp {

void encode_rows(std::span<const SparseFeatures* const> items, const TowerParams& tower, Matrix& out);
void row_norms(const Matrix& m, std::span<double> out);
std::vector<std::vector<ScoredIndex>> dense_topk_rows(const Matrix& queries, const DenseIndex& index, std::size_t k);
std::vector<std::vector<ScoredIndex>> bm25_topk_rows(std::span<const SparseFeatures* const> queries,
                                                     const Bm25Index& index, std::size_t k);
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 const AdamCoefficients& c);

}  // namespace omp

// Per-element pieces shared by both implementations.
namespace detail {

double dense_score(std::span<const double> q, double q_norm, std::span<const double> d, double d_norm,
                   Similarity metric);
void bm25_score_all(const SparseFeatures& query, const Bm25Index& index, std::span<double> scores);

inline void adam_element(double& p, double g, double& m, double& v, const AdamCoefficients& c) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / c.bias1;
    const double v_hat = v / c.bias2;
    p -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
}

}  // namespace detail

}  // namespace dar::kernels
