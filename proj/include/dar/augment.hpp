#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dar/encoder.hpp"
#include "dar/linalg.hpp"
#include "dar/rng.hpp"

namespace dar {

// dar augments document vectors, qar augments query vectors.
enum class AugmentSide { dar, qar };
enum class LambdaSampling { per_triple, per_batch };

AugmentSide parse_augment_side(std::string_view name);
std::string_view to_string(AugmentSide side);
LambdaSampling parse_lambda_sampling(std::string_view name);
std::string_view to_string(LambdaSampling mode);

// The tower whose vectors are perturbed and interpolated.
inline Tower augmented_tower(AugmentSide side) { return side == AugmentSide::dar ? Tower::document : Tower::query; }

struct PerturbConfig {
    unsigned n_masks = 3;
    double drop_rate = 0.1;
    bool rescale = true;

    void validate() const;
};

struct MixupConfig {
    bool enabled = true;
    double loss_weight = 1.0;
    bool squash = true;  // logistic over the raw similarity before BCE
    LambdaSampling lambda_per = LambdaSampling::per_triple;

    void validate() const;
};

// A dropout-masked copy of a vector. `scale[i]` is the factor applied to
// coordinate i (0 when dropped), which is also d value[i] / d source[i].
struct Perturbation {
    DenseVec value;
    DenseVec scale;
};

// n independent Bernoulli(1-p) masks; kept coordinates are divided by (1-p)
// when rescaling.
std::vector<Perturbation> perturb(std::span<const double> v, const PerturbConfig& config, Rng& rng);

// lambda * pos + (1 - lambda) * neg. Throws for lambda outside [0, 1].
DenseVec interpolate(std::span<const double> pos, std::span<const double> neg, double lambda);

inline constexpr double kProbabilityClamp = 1e-7;

struct MixupLoss {
    double loss = 0.0;
    double score = 0.0;
    DenseVec grad_anchor;
    DenseVec grad_mixed;
};

// Binary cross-entropy between the (squashed) similarity and the soft label
// lambda. The prediction is clamped to [1e-7, 1 - 1e-7] for the loss value.
MixupLoss mixup_loss(std::span<const double> anchor, std::span<const double> mixed, double lambda,
                     const MixupConfig& config, Similarity metric);

// Loss and d loss / d score for a scalar score; exposed for testing.
struct ScalarBce {
    double loss;
    double d_score;
};
ScalarBce soft_label_bce(double score, double lambda, bool squash);

// Side-agnostic view of a batch for interpolation. Anchor i is paired with
// positives[i]; every other positive in the batch is a negative for it, plus
// the extra negatives listed for it.
struct InterpolationInputs {
    std::span<const DenseVec> positives;
    // Per anchor; an empty list means the raw positive is used.
    std::span<const std::vector<Perturbation>> positive_variants;
    std::span<const DenseVec> extra_negatives;
    // Per anchor indices into extra_negatives; may be empty.
    std::span<const std::vector<std::size_t>> extra_negatives_of;
};

struct InterpolationTriple {
    std::size_t anchor = 0;
    std::size_t variant = 0;  // index into positive_variants[anchor], 0 when raw
    // Index into the negative pool: [0, B) are in-batch positives, [B, B+H) extra negatives.
    std::size_t negative = 0;
    double lambda = 0.0;
    DenseVec mixed;
};

// One triple per in-batch negative (B-1) plus one per extra negative of the
// anchor. Each triple gets a lambda ~ U[0,1] (fresh per triple, or shared per
// batch) and a uniformly chosen perturbed variant.
std::vector<InterpolationTriple> build_interpolations(const InterpolationInputs& in, const MixupConfig& config,
                                                      Rng& rng);

}  // namespace dar
