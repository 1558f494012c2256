#include "dar/pipeline.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "dar/error.hpp"
#include "dar/search.hpp"

namespace dar {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("I/O error writing " + path.string());
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
    auto p = path;
    p += ".config.json";
    return p;
}

void write_sidecar(const std::filesystem::path& artifact, const RunConfig& config) {
    write_text(sidecar(artifact), json{{"config", config.resolved()}}.dump(2) + "\n");
}

HashConfig hash_config_from(const RunConfig& config) {
    HashConfig h;
    h.vocab_dim = static_cast<std::uint32_t>(config.get_uint("hash.vocab_dim"));
    h.lowercase = config.get_bool("hash.lowercase");
    h.seed = config.get_uint("hash.seed");
    h.validate();
    return h;
}

json features_json(const SparseFeatures& f) {
    json out = json::array();
    for (const auto& x : f) out.push_back({x.index, x.count});
    return out;
}

SparseFeatures features_from(const json& j) {
    SparseFeatures f;
    for (const auto& x : j) f.push_back({x.at(0).get<std::uint32_t>(), x.at(1).get<std::uint32_t>()});
    return f;
}

json training_json(const TrainingSet& set, const RunConfig& config) {
    json examples = json::array();
    for (const auto& ex : set.examples) {
        examples.push_back({{"query_id", ex.query.id},
                            {"question", ex.query.text},
                            {"features", features_json(ex.query.features)},
                            {"positive", ex.positive_doc_id},
                            {"hard_negatives", ex.hard_negative_doc_ids},
                            {"answers", ex.answers}});
    }
    return {{"config", config.resolved()},
            {"skipped_no_positive", set.skipped_no_positive},
            {"dropped_hard_negatives", set.dropped_hard_negatives},
            {"examples", std::move(examples)}};
}

TrainingSet training_from(const json& j) {
    TrainingSet set;
    set.skipped_no_positive = j.at("skipped_no_positive").get<std::size_t>();
    set.dropped_hard_negatives = j.at("dropped_hard_negatives").get<std::size_t>();
    for (const auto& e : j.at("examples")) {
        TrainingExample ex;
        ex.query = {e.at("query_id").get<std::string>(), e.at("question").get<std::string>(),
                    features_from(e.at("features"))};
        ex.positive_doc_id = e.at("positive").get<std::string>();
        ex.hard_negative_doc_ids = e.at("hard_negatives").get<std::vector<std::string>>();
        ex.answers = e.at("answers").get<std::vector<std::string>>();
        set.examples.push_back(std::move(ex));
    }
    return set;
}

json parse_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

EncoderParams load_checked_checkpoint(const RunConfig& config, const Cache& cache) {
    auto params = load_checkpoint(config.get_path("paths.checkpoint"));
    const auto& h = cache.corpus.hash_config();
    if (params.dims.vocab != h.vocab_dim || params.hash_seed != h.seed)
        throw Error("checkpoint was trained with a different feature hashing (vocab " +
                    std::to_string(params.dims.vocab) + ", seed " + std::to_string(params.hash_seed) + ")");
    return params;
}

Similarity sim_from(const RunConfig& config) { return parse_similarity(config.get_string("model.sim")); }

std::span<const TrainingExample> split_examples(const Cache& cache, const RunConfig& config) {
    const auto split = config.get_string("retrieve.split");
    if (split == "train") return cache.train.examples;
    if (split != "eval") throw Error("retrieve.split must be eval or train");
    if (!cache.eval) throw Error("cache has no eval split (ingest with --eval)");
    return cache.eval->examples;
}

DenseIndex dense_index_for(const RunConfig& config, const Cache& cache, const EncoderParams& params) {
    const auto metric = sim_from(config);
    const auto index_path = config.get_string("paths.index");
    if (!index_path.empty() && std::filesystem::exists(index_path)) {
        auto index = load_dense_index(index_path);
        if (index.metric != metric) throw Error("index " + index_path + " was built with a different similarity");
        return index;
    }
    return encode_corpus(cache.corpus, params, metric);
}

json vec_json(const DenseVec& v) { return json(v); }

void write_debug_dump(const std::filesystem::path& path, const Cache& cache, const TrainConfig& tc) {
    const auto params = initial_params(tc, cache.corpus.hash_config());
    const auto& examples = cache.train.examples;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < std::min(examples.size(), tc.batch_size); ++i) members.push_back(i);
    Rng rng(derive_seed(tc.seed, 99));
    const auto r = batch_loss(params, cache.corpus, examples, members, tc, rng, nullptr);
    const auto& fw = r.forward;
    json rows_q = json::array(), rows_d = json::array();
    for (std::size_t i = 0; i < fw.batch(); ++i) {
        json q = json::array(), d = json::array();
        for (std::size_t k = 0; k < fw.variants_per_row(); ++k) {
            q.push_back(vec_json(fw.row_query(i, k)));
            d.push_back(vec_json(fw.column_document(i, k, i)));
        }
        rows_q.push_back(std::move(q));
        rows_d.push_back(std::move(d));
    }
    json dump = {{"side", to_string(fw.side)},
                 {"queries", fw.queries},
                 {"documents", fw.documents},
                 {"row_queries", std::move(rows_q)},
                 {"positive_documents", std::move(rows_d)},
                 {"triples", fw.triples.size()},
                 {"loss", {{"nll", r.loss.nll}, {"mixup", r.loss.mixup}, {"total", r.loss.total}}}};
    write_text(path, dump.dump() + "\n");
}

}  // namespace

void apply_threads(const RunConfig& config) {
    const auto n = config.get_int("threads");
    if (n < 0) throw Error("--threads must be non-negative");
    if (n > 0) omp_set_num_threads(static_cast<int>(n));
}

Cache load_cache(const std::filesystem::path& dir) {
    const auto corpus_json = parse_json_file(dir / "corpus.json");
    HashConfig h;
    const auto& hj = corpus_json.at("hash");
    h.vocab_dim = hj.at("vocab_dim").get<std::uint32_t>();
    h.lowercase = hj.at("lowercase").get<bool>();
    h.seed = hj.at("seed").get<std::uint64_t>();
    std::vector<Document> docs;
    for (const auto& d : corpus_json.at("documents")) {
        docs.push_back({d.at("id").get<std::string>(), d.at("title").get<std::string>(), d.at("text").get<std::string>(),
                        features_from(d.at("features"))});
    }
    Cache cache{Corpus(h, std::move(docs)), training_from(parse_json_file(dir / "train.json")), std::nullopt};
    if (std::filesystem::exists(dir / "eval.json")) cache.eval = training_from(parse_json_file(dir / "eval.json"));
    return cache;
}

TrainConfig train_config_from(const RunConfig& config, const HashConfig& hash) {
    TrainConfig tc;
    tc.dims = {hash.vocab_dim, static_cast<std::uint32_t>(config.get_uint("model.hidden")),
               static_cast<std::uint32_t>(config.get_uint("model.output"))};
    tc.batch_size = config.get_uint("train.batch_size");
    tc.epochs = static_cast<unsigned>(config.get_uint("train.epochs"));
    tc.adam.lr = config.get_double("train.lr");
    tc.seed = config.get_uint("seed");
    tc.shuffle = config.get_bool("train.shuffle");
    tc.similarity = sim_from(config);
    tc.side = parse_augment_side(config.get_string("augment.side"));
    tc.perturb.n_masks = static_cast<unsigned>(config.get_uint("perturb.n"));
    tc.perturb.drop_rate = config.get_double("perturb.p");
    tc.perturb.rescale = config.get_bool("perturb.rescale");
    tc.mixup.enabled = config.get_bool("mixup.enabled");
    tc.mixup.loss_weight = config.get_double("mixup.weight");
    tc.mixup.lambda_per = parse_lambda_sampling(config.get_string("mixup.lambda_per"));
    tc.mixup.squash = config.get_bool("mixup.squash");
    tc.hard_negatives = config.get_bool("train.hard_negatives");
    tc.hard_negatives_per_query = config.get_uint("train.hard_negatives_per_query");
    tc.validate();
    return tc;
}

EvalConfig eval_config_from(const RunConfig& config) {
    EvalConfig ec;
    ec.mode = parse_relevance_mode(config.get_string("eval.relevance"));
    ec.depth = config.get_uint("eval.depth");
    ec.cap = config.get_uint("eval.cap");
    ec.topk = config.get_size_list("eval.topk");
    ec.recall_k = config.get_size_list("eval.recall_k");
    return ec;
}

IngestSummary cmd_ingest(const RunConfig& config) {
    config.check_known_keys();
    const auto hash = hash_config_from(config);
    const auto out_dir = config.get_path("paths.cache");
    const auto corpus = load_corpus(config.get_path("paths.passages"), hash);
    auto train = load_training(config.get_path("paths.train"), hash, &corpus);
    std::optional<TrainingSet> eval;
    if (const auto p = config.get_string("paths.eval"); !p.empty()) eval = load_training(p, hash, &corpus);

    if (const auto mine = config.get_uint("ingest.mine_negatives"); mine > 0) {
        const auto bm25 = build_bm25(corpus, {config.get_double("bm25.k1"), config.get_double("bm25.b")});
        mine_hard_negatives(train.examples, corpus, bm25, mine);
    }

    std::filesystem::create_directories(out_dir);
    json docs = json::array();
    for (const auto& d : corpus.documents())
        docs.push_back({{"id", d.id}, {"title", d.title}, {"text", d.text}, {"features", features_json(d.features)}});
    const json corpus_json = {{"config", config.resolved()},
                              {"hash", {{"vocab_dim", hash.vocab_dim}, {"lowercase", hash.lowercase}, {"seed", hash.seed}}},
                              {"documents", std::move(docs)}};
    write_text(out_dir / "corpus.json", corpus_json.dump() + "\n");
    write_text(out_dir / "train.json", training_json(train, config).dump() + "\n");
    if (eval)
        write_text(out_dir / "eval.json", training_json(*eval, config).dump() + "\n");
    else
        std::filesystem::remove(out_dir / "eval.json");

    IngestSummary s;
    s.documents = corpus.size();
    s.train_examples = train.examples.size();
    s.eval_examples = eval ? eval->examples.size() : 0;
    s.skipped = train.skipped_no_positive + (eval ? eval->skipped_no_positive : 0);
    return s;
}

TrainResult cmd_train(const RunConfig& config, std::ostream& progress) {
    config.check_known_keys();
    apply_threads(config);
    const auto cache = load_cache(config.get_path("paths.cache"));
    const auto tc = train_config_from(config, cache.corpus.hash_config());

    TrainOutputs outputs;
    outputs.checkpoint = config.get_path("paths.checkpoint");
    outputs.loss_log = config.get_string("paths.loss_log");
    if (outputs.loss_log.empty()) {
        outputs.loss_log = outputs.checkpoint;
        outputs.loss_log += ".loss.jsonl";
    }
    outputs.checkpoint_every = static_cast<unsigned>(config.get_uint("train.checkpoint_every"));
    if (config.get_bool("train.save_optimizer")) {
        outputs.optimizer_state = outputs.checkpoint;
        outputs.optimizer_state += ".opt";
    }

    std::optional<TrainState> resume;
    if (const auto r = config.get_string("paths.resume"); !r.empty()) {
        TrainState state{load_checkpoint(r), OptimizerState::zeros(tc.dims)};
        const auto opt = std::filesystem::path(r + ".opt");
        if (std::filesystem::exists(opt)) state.optimizer = load_optimizer_state(opt);
        resume = std::move(state);
    }

    if (const auto dump = config.get_string("paths.debug_dump"); !dump.empty()) write_debug_dump(dump, cache, tc);

    write_sidecar(outputs.checkpoint, config);
    write_sidecar(outputs.loss_log, config);
    return train(cache.corpus, cache.train.examples, tc, outputs, std::move(resume), [&](const EpochLog& log) {
        progress << "epoch " << log.epoch << "  nll " << log.nll << "  mixup " << log.mixup << "  total " << log.total
                 << "  (" << log.steps << " steps, " << log.seconds << " s)\n";
    });
}

void cmd_encode(const RunConfig& config) {
    config.check_known_keys();
    apply_threads(config);
    const auto cache = load_cache(config.get_path("paths.cache"));
    const auto params = load_checked_checkpoint(config, cache);
    const auto out = config.get_path("paths.index");
    save_dense_index(out, encode_corpus(cache.corpus, params, sim_from(config)));
    write_sidecar(out, config);
}

void cmd_retrieve(const RunConfig& config) {
    config.check_known_keys();
    apply_threads(config);
    const auto cache = load_cache(config.get_path("paths.cache"));
    const auto examples = split_examples(cache, config);
    const auto k = config.get_uint("retrieve.topk");
    const auto out_path = config.get_path("paths.run");

    std::vector<Query> queries;
    queries.reserve(examples.size());
    for (const auto& ex : examples) queries.push_back(ex.query);

    std::vector<RankedList> lists;
    const auto retriever = config.get_string("retrieve.retriever");
    if (retriever == "dense") {
        const auto params = load_checked_checkpoint(config, cache);
        lists = dense_search(queries, dense_index_for(config, cache, params), params, k);
    } else if (retriever == "bm25") {
        const auto bm25 = build_bm25(cache.corpus, {config.get_double("bm25.k1"), config.get_double("bm25.b")});
        lists = bm25_search(queries, bm25, k);
    } else {
        throw Error("unknown retriever '" + retriever + "' (expected dense or bm25)");
    }

    std::ostringstream out;
    write_run(out, lists);
    write_text(out_path, out.str());
    write_sidecar(out_path, config);
}

MetricsReport cmd_eval(const RunConfig& config) {
    config.check_known_keys();
    const auto cache = load_cache(config.get_path("paths.cache"));
    const auto examples = split_examples(cache, config);
    const auto run = read_run(config.get_path("paths.run"));
    const auto report = evaluate(run, examples, cache.corpus, eval_config_from(config));
    auto j = report.to_json();
    j["config"] = config.resolved();
    j["seed"] = config.get_uint("seed");
    if (const auto out = config.get_string("paths.metrics"); !out.empty()) write_text(out, j.dump(2) + "\n");
    return report;
}

void cmd_export_embeddings(const RunConfig& config) {
    config.check_known_keys();
    apply_threads(config);
    const auto cache = load_cache(config.get_path("paths.cache"));
    const auto params = load_checked_checkpoint(config, cache);
    const auto out_path = config.get_path("paths.embeddings");
    std::ostringstream out;
    write_embeddings_tsv(out, dense_index_for(config, cache, params));
    write_text(out_path, out.str());
    write_sidecar(out_path, config);
}

}  // namespace dar
