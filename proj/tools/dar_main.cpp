// dar: command-line front end for ingestion, training, encoding, retrieval,
// evaluation, and embedding export.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dar/error.hpp"
#include "dar/pipeline.hpp"

namespace {

struct FlagSink {
    std::map<std::string, std::string> values;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }
};

void add_shared(CLI::App* app, FlagSink& sink, std::string& config_path) {
    app->add_option("--config", config_path, "Config file ([section] key = value)");
    sink.add(app, "--seed", "seed", "Seed for all randomness");
    sink.add(app, "--threads", "threads", "OpenMP threads for encoding and search (0 = default)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense retrieval training and evaluation with document augmentation"};
    app.require_subcommand(1);
    FlagSink sink;
    std::string config_path;

    auto* ingest = app.add_subcommand("ingest", "Load, validate, and hash passages and training records");
    add_shared(ingest, sink, config_path);
    sink.add(ingest, "--passages", "paths.passages", "Passage TSV (id, text, title)");
    sink.add(ingest, "--train", "paths.train", "Training records (JSON array or JSON lines)");
    sink.add(ingest, "--eval", "paths.eval", "Held-out records in the same format");
    sink.add(ingest, "--out", "paths.cache", "Cache directory to write");
    sink.add(ingest, "--vocab-dim", "hash.vocab_dim", "Hashed vocabulary size (power of two)");
    sink.add(ingest, "--hash-seed", "hash.seed", "Feature hash seed");
    sink.add(ingest, "--lowercase", "hash.lowercase", "on|off");
    sink.add(ingest, "--mine-negatives", "ingest.mine_negatives", "Replace hard negatives with N mined BM25 hits");

    auto* train = app.add_subcommand("train", "Train the dual encoder");
    add_shared(train, sink, config_path);
    sink.add(train, "--cache", "paths.cache", "Cache directory from ingest");
    sink.add(train, "--checkpoint", "paths.checkpoint", "Checkpoint to write");
    sink.add(train, "--loss-log", "paths.loss_log", "Per-epoch loss log (JSON lines)");
    sink.add(train, "--resume", "paths.resume", "Checkpoint to continue from");
    sink.add(train, "--debug-dump", "paths.debug_dump", "Write the first batch's vectors before/after augmentation");
    sink.add(train, "--batch-size", "train.batch_size", "Mini-batch size");
    sink.add(train, "--epochs", "train.epochs", "Number of epochs");
    sink.add(train, "--lr", "train.lr", "Adam learning rate");
    sink.add(train, "--shuffle", "train.shuffle", "on|off");
    sink.add(train, "--checkpoint-every", "train.checkpoint_every", "Also checkpoint every N epochs");
    sink.add(train, "--save-optimizer", "train.save_optimizer", "on|off: write <checkpoint>.opt");
    sink.add(train, "--hidden", "model.hidden", "Embedding width");
    sink.add(train, "--output-dim", "model.output", "Output vector width");
    sink.add(train, "--sim", "model.sim", "dot|cosine");
    sink.add(train, "--mixup", "mixup.enabled", "on|off");
    sink.add(train, "--mixup-weight", "mixup.weight", "Weight of the interpolation loss");
    sink.add(train, "--lambda-per", "mixup.lambda_per", "triple|batch");
    sink.add(train, "--perturb-n", "perturb.n", "Dropout masks per positive");
    sink.add(train, "--perturb-p", "perturb.p", "Dropout rate");
    sink.add(train, "--perturb-rescale", "perturb.rescale", "on|off");
    sink.add(train, "--augment-side", "augment.side", "dar|qar");
    sink.add(train, "--hard-negatives", "train.hard_negatives", "on|off");
    sink.add(train, "--hard-negatives-per-query", "train.hard_negatives_per_query", "Hard negatives used per query");

    auto* encode = app.add_subcommand("encode", "Encode the corpus into a dense index file");
    add_shared(encode, sink, config_path);
    sink.add(encode, "--cache", "paths.cache", "Cache directory from ingest");
    sink.add(encode, "--checkpoint", "paths.checkpoint", "Trained checkpoint");
    sink.add(encode, "--out", "paths.index", "Index file to write");
    sink.add(encode, "--sim", "model.sim", "dot|cosine");

    auto* retrieve = app.add_subcommand("retrieve", "Retrieve the top-k passages for every query");
    add_shared(retrieve, sink, config_path);
    sink.add(retrieve, "--cache", "paths.cache", "Cache directory from ingest");
    sink.add(retrieve, "--checkpoint", "paths.checkpoint", "Trained checkpoint (dense)");
    sink.add(retrieve, "--index", "paths.index", "Prebuilt dense index (optional)");
    sink.add(retrieve, "--out", "paths.run", "Retrieval output (JSON lines)");
    sink.add(retrieve, "--topk", "retrieve.topk", "Passages per query");
    sink.add(retrieve, "--sim", "model.sim", "dot|cosine");
    sink.add(retrieve, "--retriever", "retrieve.retriever", "dense|bm25");
    sink.add(retrieve, "--split", "retrieve.split", "eval|train");
    sink.add(retrieve, "--bm25-k1", "bm25.k1", "BM25 k1");
    sink.add(retrieve, "--bm25-b", "bm25.b", "BM25 b");

    auto* eval = app.add_subcommand("eval", "Score a retrieval output");
    add_shared(eval, sink, config_path);
    sink.add(eval, "--cache", "paths.cache", "Cache directory from ingest");
    sink.add(eval, "--run", "paths.run", "Retrieval output (JSON lines)");
    sink.add(eval, "--out", "paths.metrics", "Metrics report to write");
    sink.add(eval, "--split", "retrieve.split", "eval|train");
    sink.add(eval, "--relevance", "eval.relevance", "answer|gold");
    sink.add(eval, "--depth", "eval.depth", "Retrieval depth");
    sink.add(eval, "--cap", "eval.cap", "Rank cap for MRR and MAP");
    sink.add(eval, "--topk-list", "eval.topk", "Comma-separated K values for top-K accuracy");
    sink.add(eval, "--recall-k", "eval.recall_k", "Comma-separated k values for R@k");

    auto* exportc = app.add_subcommand("export-embeddings", "Write document vectors as TSV");
    add_shared(exportc, sink, config_path);
    sink.add(exportc, "--cache", "paths.cache", "Cache directory from ingest");
    sink.add(exportc, "--checkpoint", "paths.checkpoint", "Trained checkpoint");
    sink.add(exportc, "--index", "paths.index", "Prebuilt dense index (optional)");
    sink.add(exportc, "--out", "paths.embeddings", "TSV to write");
    sink.add(exportc, "--sim", "model.sim", "dot|cosine");

    CLI11_PARSE(app, argc, argv);

    try {
        dar::RunConfig config = config_path.empty() ? dar::RunConfig{} : dar::RunConfig::load(config_path);
        for (const auto& [key, value] : sink.values) config.set(key, value);

        if (ingest->parsed()) {
            const auto s = dar::cmd_ingest(config);
            std::cout << "documents " << s.documents << "\ntrain examples " << s.train_examples << "\neval examples "
                      << s.eval_examples << "\nskipped (no positive) " << s.skipped << "\n";
        } else if (train->parsed()) {
            const auto r = dar::cmd_train(config, std::cout);
            std::cout << "trained " << r.steps << " steps; checkpoint " << config.get_string("paths.checkpoint") << "\n";
        } else if (encode->parsed()) {
            dar::cmd_encode(config);
        } else if (retrieve->parsed()) {
            dar::cmd_retrieve(config);
        } else if (eval->parsed()) {
            std::cout << dar::cmd_eval(config).to_json().dump(2) << "\n";
        } else if (exportc->parsed()) {
            dar::cmd_export_embeddings(config);
        }
    } catch (const std::exception& e) {
        std::cerr << "dar: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
