#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dar/corpus.hpp"
#include "dar/linalg.hpp"

namespace dar {

enum class Tower { query, document };
enum class Similarity { dot, cosine };

Similarity parse_similarity(std::string_view name);
std::string_view to_string(Similarity sim);

struct EncoderDims {
    std::uint32_t vocab = 1u << 18;
    std::uint32_t hidden = 64;
    std::uint32_t output = 64;

    bool operator==(const EncoderDims&) const = default;
};

// One tower: embedding table (vocab x hidden), projection (hidden x output),
// bias (output). Output is projectionᵀ · mean-pooled embedding + bias.
struct TowerParams {
    Matrix embedding;
    Matrix projection;
    DenseVec bias;

    bool operator==(const TowerParams&) const = default;
};

struct EncoderParams {
    EncoderDims dims;
    std::uint64_t hash_seed = 0;
    TowerParams query;
    TowerParams document;

    TowerParams& tower(Tower t) { return t == Tower::query ? query : document; }
    const TowerParams& tower(Tower t) const { return t == Tower::query ? query : document; }

    bool operator==(const EncoderParams&) const = default;
};

// Embedding entries ~ U[-1/sqrt(h), 1/sqrt(h)], projection ~ U[-1/sqrt(m), 1/sqrt(m)], bias 0.
EncoderParams init_params(std::uint64_t seed, EncoderDims dims, std::uint64_t hash_seed = 0);

// Throws if a feature index is out of range.
void encode_into(const SparseFeatures& features, const TowerParams& tower, std::span<double> out);
DenseVec encode(const SparseFeatures& features, Tower tower, const EncoderParams& params);

// Cosine with a zero vector throws.
double similarity(std::span<const double> q, std::span<const double> d, Similarity metric);

struct SimilarityGrad {
    double value = 0.0;
    DenseVec d_first;   // d value / d q
    DenseVec d_second;  // d value / d d
};
SimilarityGrad similarity_grad(std::span<const double> q, std::span<const double> d, Similarity metric);

// Gradient accumulator with the same shapes as EncoderParams. Tracks which
// embedding rows were written so clearing is proportional to the batch.
struct EncoderGradients {
    TowerParams query;
    TowerParams document;
    std::vector<std::uint32_t> touched_query_rows;
    std::vector<std::uint32_t> touched_document_rows;

    explicit EncoderGradients(const EncoderDims& dims);

    TowerParams& tower(Tower t) { return t == Tower::query ? query : document; }
    const TowerParams& tower(Tower t) const { return t == Tower::query ? query : document; }
    std::vector<std::uint32_t>& touched(Tower t) { return t == Tower::query ? touched_query_rows : touched_document_rows; }

    void clear();
};

// Records forward passes so exact gradients can be propagated back to the
// parameters. One tape per batch; not shared across threads.
class ForwardTape {
public:
    explicit ForwardTape(const EncoderParams& params) : params_(&params) {}

    // Returns the slot index of the recorded output.
    std::size_t encode(const SparseFeatures& features, Tower tower);
    const DenseVec& output(std::size_t slot) const { return entries_[slot].output; }
    std::size_t size() const { return entries_.size(); }

    // upstream[slot] is d loss / d output(slot). Accumulates into grads.
    void backward(std::span<const DenseVec> upstream, EncoderGradients& grads) const;

private:
    struct Entry {
        Tower tower;
        SparseFeatures features;
        DenseVec pooled;
        DenseVec output;
    };
    const EncoderParams* params_;
    std::vector<Entry> entries_;
};

// Binary checkpoint, little-endian:
//   "DARC" | u32 version | u32 vocab | u32 hidden | u32 output |
//   f32 query.embedding[vocab*hidden] | f32 query.projection[hidden*output] | f32 query.bias[output] |
//   f32 document.embedding | f32 document.projection | f32 document.bias |
//   u64 hash seed
// Matrices are row-major. Values are rounded to float32 on save.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params);
EncoderParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dar
