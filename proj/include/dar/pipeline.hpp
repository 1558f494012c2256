#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "dar/config.hpp"
#include "dar/corpus.hpp"
#include "dar/eval.hpp"
#include "dar/train.hpp"

namespace dar {

// The stages behind the `dar` command line. Each stage reads its inputs and
// writes its outputs through paths in the RunConfig, and throws dar::Error on
// failure.

// Ingested data as stored in the cache directory (corpus.json, train.json,
// eval.json).
struct Cache {
    Corpus corpus;
    TrainingSet train;
    std::optional<TrainingSet> eval;
};

Cache load_cache(const std::filesystem::path& dir);
TrainConfig train_config_from(const RunConfig& config, const HashConfig& hash);
EvalConfig eval_config_from(const RunConfig& config);

// Applies --threads (0 keeps the OpenMP default).
void apply_threads(const RunConfig& config);

struct IngestSummary {
    std::size_t documents = 0;
    std::size_t train_examples = 0;
    std::size_t eval_examples = 0;
    std::size_t skipped = 0;
};

IngestSummary cmd_ingest(const RunConfig& config);
TrainResult cmd_train(const RunConfig& config, std::ostream& progress);
void cmd_encode(const RunConfig& config);
void cmd_retrieve(const RunConfig& config);
MetricsReport cmd_eval(const RunConfig& config);
void cmd_export_embeddings(const RunConfig& config);

}  // namespace dar
