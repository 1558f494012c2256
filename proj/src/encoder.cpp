#include "dar/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "dar/error.hpp"
#include "dar/rng.hpp"

namespace dar {

Similarity parse_similarity(std::string_view name) {
    if (name == "dot") return Similarity::dot;
    if (name == "cosine") return Similarity::cosine;
    throw Error("unknown similarity '" + std::string(name) + "' (expected dot or cosine)");
}

std::string_view to_string(Similarity sim) { return sim == Similarity::dot ? "dot" : "cosine"; }

namespace {

TowerParams init_tower(Rng& rng, const EncoderDims& dims) {
    TowerParams t{Matrix(dims.vocab, dims.hidden), Matrix(dims.hidden, dims.output), DenseVec(dims.output, 0.0)};
    const double e = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    const double w = 1.0 / std::sqrt(static_cast<double>(dims.output));
    for (auto& x : t.embedding.data) x = rng.uniform(-e, e);
    for (auto& x : t.projection.data) x = rng.uniform(-w, w);
    return t;
}

TowerParams zero_tower(const EncoderDims& dims) {
    return {Matrix(dims.vocab, dims.hidden), Matrix(dims.hidden, dims.output), DenseVec(dims.output, 0.0)};
}

void pool(const SparseFeatures& features, const Matrix& embedding, std::span<double> pooled) {
    std::fill(pooled.begin(), pooled.end(), 0.0);
    double total = 0.0;
    for (const auto& f : features) {
        if (f.index >= embedding.rows)
            throw Error("feature index " + std::to_string(f.index) + " out of range for vocab " +
                        std::to_string(embedding.rows));
        total += f.count;
    }
    if (total == 0.0) return;
    for (const auto& f : features) axpy(f.count / total, embedding.row(f.index), pooled);
}

void project(std::span<const double> pooled, const TowerParams& tower, std::span<double> out) {
    std::copy(tower.bias.begin(), tower.bias.end(), out.begin());
    for (std::size_t k = 0; k < pooled.size(); ++k) axpy(pooled[k], tower.projection.row(k), out);
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

EncoderParams init_params(std::uint64_t seed, EncoderDims dims, std::uint64_t hash_seed) {
    if (dims.vocab == 0 || dims.hidden == 0 || dims.output == 0) throw Error("encoder dimensions must be positive");
    Rng rng(seed);
    EncoderParams p;
    p.dims = dims;
    p.hash_seed = hash_seed;
    p.query = init_tower(rng, dims);
    p.document = init_tower(rng, dims);
    return p;
}

void encode_into(const SparseFeatures& features, const TowerParams& tower, std::span<double> out) {
    DenseVec pooled(tower.embedding.cols);
    pool(features, tower.embedding, pooled);
    project(pooled, tower, out);
}

DenseVec encode(const SparseFeatures& features, Tower tower, const EncoderParams& params) {
    DenseVec out(params.dims.output);
    encode_into(features, params.tower(tower), out);
    return out;
}

double similarity(std::span<const double> q, std::span<const double> d, Similarity metric) {
    if (q.size() != d.size()) throw Error("similarity: length mismatch");
    const double qd = dot(q, d);
    if (metric == Similarity::dot) return qd;
    const double nq = norm(q);
    const double nd = norm(d);
    if (nq == 0.0 || nd == 0.0) throw Error("cosine similarity with a zero vector");
    return qd / (nq * nd);
}

SimilarityGrad similarity_grad(std::span<const double> q, std::span<const double> d, Similarity metric) {
    SimilarityGrad g;
    g.value = similarity(q, d, metric);
    if (metric == Similarity::dot) {
        g.d_first.assign(d.begin(), d.end());
        g.d_second.assign(q.begin(), q.end());
        return g;
    }
    // d/dq (q·d / |q||d|) = d/(|q||d|) - s q/|q|^2
    const double nq = norm(q);
    const double nd = norm(d);
    const double inv = 1.0 / (nq * nd);
    g.d_first.resize(q.size());
    g.d_second.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        g.d_first[i] = d[i] * inv - g.value * q[i] / (nq * nq);
        g.d_second[i] = q[i] * inv - g.value * d[i] / (nd * nd);
    }
    return g;
}

EncoderGradients::EncoderGradients(const EncoderDims& dims) : query(zero_tower(dims)), document(zero_tower(dims)) {}

void EncoderGradients::clear() {
    for (const Tower t : {Tower::query, Tower::document}) {
        auto& tw = tower(t);
        auto& rows = touched(t);
        for (const auto r : rows) std::ranges::fill(tw.embedding.row(r), 0.0);
        rows.clear();
        std::ranges::fill(tw.projection.data, 0.0);
        std::ranges::fill(tw.bias, 0.0);
    }
}

std::size_t ForwardTape::encode(const SparseFeatures& features, Tower tower) {
    const auto& tw = params_->tower(tower);
    Entry e{tower, features, DenseVec(tw.embedding.cols), DenseVec(tw.bias.size())};
    pool(features, tw.embedding, e.pooled);
    project(e.pooled, tw, e.output);
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
}

void ForwardTape::backward(std::span<const DenseVec> upstream, EncoderGradients& grads) const {
    if (entries_.empty()) throw Error("backward called without a recorded forward pass");
    if (upstream.size() != entries_.size())
        throw Error("backward: expected " + std::to_string(entries_.size()) + " upstream gradients, got " +
                    std::to_string(upstream.size()));
    for (std::size_t s = 0; s < entries_.size(); ++s) {
        const auto& e = entries_[s];
        const auto& g = upstream[s];
        if (g.size() != e.output.size()) throw Error("backward: upstream gradient has wrong length");
        const auto& tw = params_->tower(e.tower);
        auto& gt = grads.tower(e.tower);

        axpy(1.0, g, gt.bias);
        DenseVec d_pooled(e.pooled.size(), 0.0);
        for (std::size_t k = 0; k < e.pooled.size(); ++k) {
            axpy(e.pooled[k], g, gt.projection.row(k));
            d_pooled[k] = dot(tw.projection.row(k), g);
        }
        double total = 0.0;
        for (const auto& f : e.features) total += f.count;
        if (total == 0.0) continue;
        auto& touched = grads.touched(e.tower);
        for (const auto& f : e.features) {
            axpy(f.count / total, d_pooled, gt.embedding.row(f.index));
            touched.push_back(f.index);
        }
    }
    for (const Tower t : {Tower::query, Tower::document}) {
        auto& rows = grads.touched(t);
        std::ranges::sort(rows);
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
}

}  // namespace dar
