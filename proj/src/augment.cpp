#include "dar/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dar/error.hpp"

namespace dar {

AugmentSide parse_augment_side(std::string_view name) {
    if (name == "dar") return AugmentSide::dar;
    if (name == "qar") return AugmentSide::qar;
    throw Error("unknown augment side '" + std::string(name) + "' (expected dar or qar)");
}

std::string_view to_string(AugmentSide side) { return side == AugmentSide::dar ? "dar" : "qar"; }

LambdaSampling parse_lambda_sampling(std::string_view name) {
    if (name == "triple") return LambdaSampling::per_triple;
    if (name == "batch") return LambdaSampling::per_batch;
    throw Error("unknown lambda sampling '" + std::string(name) + "' (expected triple or batch)");
}

std::string_view to_string(LambdaSampling mode) { return mode == LambdaSampling::per_triple ? "triple" : "batch"; }

void PerturbConfig::validate() const {
    if (n_masks < 1) throw Error("perturb.n must be at least 1");
    if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw Error("perturb.p must lie in [0, 1)");
}

void MixupConfig::validate() const {
    if (!(loss_weight > 0.0)) throw Error("mixup.weight must be positive");
}

std::vector<Perturbation> perturb(std::span<const double> v, const PerturbConfig& config, Rng& rng) {
    config.validate();
    const double keep = 1.0 - config.drop_rate;
    const double kept_scale = config.rescale ? 1.0 / keep : 1.0;
    std::vector<Perturbation> out(config.n_masks);
    for (auto& p : out) {
        p.value.resize(v.size());
        p.scale.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const bool kept = rng.uniform() >= config.drop_rate;
            p.scale[i] = kept ? kept_scale : 0.0;
            p.value[i] = kept ? (config.rescale ? v[i] / keep : v[i]) : 0.0;
        }
    }
    return out;
}

DenseVec interpolate(std::span<const double> pos, std::span<const double> neg, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("interpolation lambda must lie in [0, 1]");
    if (pos.size() != neg.size()) throw Error("interpolate: length mismatch");
    DenseVec out(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) out[i] = lambda * pos[i] + (1.0 - lambda) * neg[i];
    return out;
}

ScalarBce soft_label_bce(double score, double lambda, bool squash) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("soft label must lie in [0, 1]");
    double pred = 0.0;
    double d_pred_d_score = 1.0;
    if (squash) {
        pred = score >= 0.0 ? 1.0 / (1.0 + std::exp(-score)) : std::exp(score) / (1.0 + std::exp(score));
        d_pred_d_score = pred * (1.0 - pred);
    } else {
        pred = score;
    }
    const double clamped = std::clamp(pred, kProbabilityClamp, 1.0 - kProbabilityClamp);
    ScalarBce r;
    r.loss = -lambda * std::log(clamped) - (1.0 - lambda) * std::log(1.0 - clamped);
    if (squash) {
        // d/ds of the unclamped BCE-with-logits; keeps a learning signal when
        // the logistic saturates.
        r.d_score = pred - lambda;
    } else if (pred != clamped) {
        r.d_score = 0.0;
    } else {
        r.d_score = (-lambda / pred + (1.0 - lambda) / (1.0 - pred)) * d_pred_d_score;
    }
    return r;
}

MixupLoss mixup_loss(std::span<const double> anchor, std::span<const double> mixed, double lambda,
                     const MixupConfig& config, Similarity metric) {
    const auto sg = similarity_grad(anchor, mixed, metric);
    const auto bce = soft_label_bce(sg.value, lambda, config.squash);
    MixupLoss out;
    out.loss = bce.loss;
    out.score = sg.value;
    out.grad_anchor.resize(anchor.size());
    out.grad_mixed.resize(mixed.size());
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        out.grad_anchor[i] = bce.d_score * sg.d_first[i];
        out.grad_mixed[i] = bce.d_score * sg.d_second[i];
    }
    return out;
}

std::vector<InterpolationTriple> build_interpolations(const InterpolationInputs& in, const MixupConfig& config,
                                                      Rng& rng) {
    const std::size_t batch = in.positives.size();
    if (!in.positive_variants.empty() && in.positive_variants.size() != batch)
        throw Error("build_interpolations: one variant list per anchor expected");
    if (!in.extra_negatives_of.empty() && in.extra_negatives_of.size() != batch)
        throw Error("build_interpolations: one extra-negative list per anchor expected");

    std::vector<InterpolationTriple> out;
    const bool shared_lambda = config.lambda_per == LambdaSampling::per_batch;
    const double batch_lambda = shared_lambda ? rng.uniform() : 0.0;

    auto emit = [&](std::size_t anchor, std::size_t negative, std::span<const double> neg) {
        InterpolationTriple t;
        t.anchor = anchor;
        t.negative = negative;
        t.lambda = shared_lambda ? batch_lambda : rng.uniform();
        std::span<const double> pos = in.positives[anchor];
        if (!in.positive_variants.empty() && !in.positive_variants[anchor].empty()) {
            const auto& variants = in.positive_variants[anchor];
            t.variant = static_cast<std::size_t>(rng.below(variants.size()));
            pos = variants[t.variant].value;
        }
        t.mixed = interpolate(pos, neg, t.lambda);
        out.push_back(std::move(t));
    };

    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < batch; ++j) {
            if (j != i) emit(i, j, in.positives[j]);
        }
        if (!in.extra_negatives_of.empty()) {
            for (const auto h : in.extra_negatives_of[i]) {
                if (h >= in.extra_negatives.size()) throw Error("build_interpolations: extra negative out of range");
                emit(i, batch + h, in.extra_negatives[h]);
            }
        }
    }
    return out;
}

}  // namespace dar
