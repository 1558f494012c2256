#pragma once

// Finite-difference checks of the analytic gradients on small random models.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dar/corpus.hpp"
#include "dar/encoder.hpp"
#include "dar/train.hpp"

namespace dar::gradcheck {

// |a - n| / max(|a| + |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Central differences of `loss` over every entry of every parameter array,
// compared with `analytic`. Returns the worst relative error.
double worst_error(EncoderParams& params, const EncoderGradients& analytic, const std::function<double()>& loss,
                   double eps = 1e-4);

// Same, for a flat vector of inputs.
double worst_error(std::span<double> x, std::span<const double> analytic, const std::function<double()>& loss,
                   double eps = 1e-4);

// A random model with V=32, h=m=4, a dozen documents with random sparse
// features, and `batch` examples with `hard_negatives` each.
struct TinyProblem {
    Corpus corpus;
    std::vector<TrainingExample> examples;
    TrainConfig config;
    EncoderParams params;
};

TinyProblem tiny_problem(std::uint64_t seed, std::size_t batch = 4, std::size_t hard_negatives = 0);

// Worst error of the full batch objective (NLL plus augmentation) for one
// tiny problem. The augmentation stream is replayed from the same seed for
// every evaluation so masks, lambdas and variants stay fixed.
double batch_objective_error(TinyProblem& problem, std::uint64_t stream_seed);

}  // namespace dar::gradcheck
