#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dar/augment.hpp"
#include "dar/corpus.hpp"
#include "dar/encoder.hpp"
#include "dar/linalg.hpp"
#include "dar/rng.hpp"

namespace dar {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    EncoderDims dims;
    std::size_t batch_size = 32;
    unsigned epochs = 25;
    AdamConfig adam;
    std::uint64_t seed = 0;
    bool shuffle = true;
    Similarity similarity = Similarity::dot;
    AugmentSide side = AugmentSide::dar;
    PerturbConfig perturb;
    MixupConfig mixup;
    bool hard_negatives = false;
    std::size_t hard_negatives_per_query = 1;

    void validate() const;
};

// Mean negative log-likelihood of the positive column over all rows, with
// d loss / d scores. Throws on a non-finite score, naming (row, column).
struct NllResult {
    double loss = 0.0;
    Matrix grad;
};
NllResult nll_loss(const Matrix& scores, std::span<const std::size_t> positive_column);

struct LossBreakdown {
    double nll = 0.0;
    double mixup = 0.0;  // mean over interpolation triples, before weighting
    double total = 0.0;  // nll + weight * mixup
    std::size_t rows = 0;
    std::size_t columns = 0;
    std::size_t triples = 0;
};

// Vectors of one mini-batch before and after augmentation.
struct BatchForward {
    AugmentSide side = AugmentSide::dar;
    std::vector<DenseVec> queries;    // raw, one per example
    std::vector<DenseVec> documents;  // raw positives [0, B) then shared hard negatives
    std::vector<std::vector<std::size_t>> hard_negatives_of;  // per example, indices into the hard-negative block
    std::vector<std::vector<Perturbation>> variants;         // per example, perturbed copies of the augmented side
    std::vector<InterpolationTriple> triples;

    std::size_t batch() const { return queries.size(); }
    std::size_t variants_per_row() const { return variants.empty() ? 1 : variants.front().size(); }
    // Query vector of NLL row (i, k).
    const DenseVec& row_query(std::size_t i, std::size_t k) const;
    // Document vector in column j of NLL row (i, k).
    const DenseVec& column_document(std::size_t i, std::size_t k, std::size_t j) const;
    // The anchor a triple is scored against.
    const DenseVec& anchor(const InterpolationTriple& t) const;
};

struct BatchResult {
    LossBreakdown loss;
    BatchForward forward;
};

// Forward pass, loss, and (when grads is non-null) accumulated parameter
// gradients for the examples selected by `members`.
BatchResult batch_loss(const EncoderParams& params, const Corpus& corpus, std::span<const TrainingExample> examples,
                       std::span<const std::size_t> members, const TrainConfig& config, Rng& rng,
                       EncoderGradients* grads);

struct OptimizerState {
    TowerParams query_m, query_v, document_m, document_v;
    std::uint64_t step = 0;

    static OptimizerState zeros(const EncoderDims& dims);
    bool operator==(const OptimizerState&) const = default;
};

void save_optimizer_state(const std::filesystem::path& path, const OptimizerState& state);
OptimizerState load_optimizer_state(const std::filesystem::path& path);

void adam_step(EncoderParams& params, OptimizerState& state, const EncoderGradients& grads, const AdamConfig& config);

// One optimizer step over a batch. Throws TrainingHalted on a non-finite loss
// without touching the parameters.
LossBreakdown train_step(EncoderParams& params, OptimizerState& state, EncoderGradients& grads, const Corpus& corpus,
                         std::span<const TrainingExample> examples, std::span<const std::size_t> members,
                         const TrainConfig& config, Rng& rng);

struct EpochLog {
    unsigned epoch = 0;
    std::size_t steps = 0;
    double nll = 0.0;
    double mixup = 0.0;
    double total = 0.0;
    double seconds = 0.0;
};

struct TrainOutputs {
    std::filesystem::path checkpoint;       // final checkpoint; empty to skip
    std::filesystem::path loss_log;         // JSON lines; empty to skip
    std::filesystem::path optimizer_state;  // empty to skip
    unsigned checkpoint_every = 0;          // also write "<checkpoint>.epoch<N>" every N epochs
};

struct TrainResult {
    EncoderParams params;
    OptimizerState optimizer;
    std::vector<EpochLog> log;
    std::size_t steps = 0;
};

struct TrainState {
    EncoderParams params;
    OptimizerState optimizer;
};

// Parameters a fresh training run starts from.
EncoderParams initial_params(const TrainConfig& config, const HashConfig& hash);

// Runs epochs x ceil(N / batch_size) steps. The last short batch is kept.
TrainResult train(const Corpus& corpus, std::span<const TrainingExample> examples, const TrainConfig& config,
                  const TrainOutputs& outputs = {}, std::optional<TrainState> resume = std::nullopt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace dar
