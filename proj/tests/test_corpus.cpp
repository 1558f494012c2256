#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "dar/corpus.hpp"
#include "dar/error.hpp"
#include "dar/rng.hpp"
#include "synthetic.hpp"

using namespace dar;

namespace {

std::uint32_t total_count(const SparseFeatures& f) {
    return std::accumulate(f.begin(), f.end(), 0u, [](std::uint32_t s, const FeatureCount& c) { return s + c.count; });
}

Corpus corpus_from(const std::string& tsv, const HashConfig& hash = {}) {
    std::istringstream in(tsv);
    return parse_corpus(in, hash, "test.tsv");
}

std::string random_string(Rng& rng, std::size_t max_len) {
    static constexpr char alphabet[] = "abcXYZ019 -_.,!?\t";
    std::string s;
    const std::size_t n = rng.below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(sizeof(alphabet) - 1)];
    return s;
}

}  // namespace

TEST_CASE("tokenize splits on non-alphanumeric runs and lowercases") {
    const HashConfig cfg;
    CHECK(tokenize("", cfg).empty());
    CHECK(tokenize("Dense  Retrieval!", cfg) == std::vector<std::string>{"dense", "retrieval"});
    CHECK(tokenize("BM25-based (TF-IDF)", cfg) == std::vector<std::string>{"bm25", "based", "tf", "idf"});
    CHECK(tokenize("  ...  ", cfg).empty());
}

TEST_CASE("tokenize keeps case when lowercasing is off") {
    HashConfig cfg;
    cfg.lowercase = false;
    CHECK(tokenize("Dense Retrieval", cfg) == std::vector<std::string>{"Dense", "Retrieval"});
}

TEST_CASE("tokenize passes multi-byte UTF-8 through as word characters") {
    const HashConfig cfg;
    CHECK(tokenize("caf\xc3\xa9 na\xc3\xafve", cfg) == std::vector<std::string>{"caf\xc3\xa9", "na\xc3\xafve"});
}

TEST_CASE("hash_features conserves counts") {
    const HashConfig cfg;
    CHECK(hash_features({}, cfg).empty());

    const std::vector<std::string> aab{"a", "a", "b"};
    const auto f = hash_features(aab, cfg);
    CHECK(total_count(f) == 3);
    if (f.size() == 2) {
        std::vector<std::uint32_t> counts{f[0].count, f[1].count};
        std::sort(counts.begin(), counts.end());
        CHECK(counts == std::vector<std::uint32_t>{1, 2});
    } else {
        CHECK(f.size() == 1);
    }

    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::string> tokens(rng.below(40));
        for (auto& t : tokens) t = "t" + std::to_string(rng.below(30));
        CHECK(total_count(hash_features(tokens, cfg)) == tokens.size());
    }
}

TEST_CASE("feature indices stay below V and are sorted") {
    HashConfig cfg;
    cfg.vocab_dim = 1u << 10;
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto f = featurize(random_string(rng, 30), cfg);
        for (std::size_t k = 0; k < f.size(); ++k) {
            REQUIRE(f[k].index < cfg.vocab_dim);
            REQUIRE(f[k].count >= 1);
            if (k > 0) REQUIRE(f[k - 1].index < f[k].index);
        }
    }
}

TEST_CASE("hashing depends on the seed and is deterministic") {
    HashConfig a;
    HashConfig b;
    b.seed = 99;
    CHECK(featurize("dense passage retrieval", a) == featurize("dense passage retrieval", a));
    CHECK(featurize("dense passage retrieval", a) != featurize("dense passage retrieval", b));
}

TEST_CASE("HashConfig requires a power-of-two vocabulary") {
    HashConfig cfg;
    cfg.vocab_dim = 1000;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.vocab_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.vocab_dim = 1024;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("passage TSV header is skipped") {
    const auto c = corpus_from("id\ttext\ttitle\nd1\tParis is the capital\tFrance\n");
    REQUIRE(c.size() == 1);
    CHECK(c[0].id == "d1");
    CHECK(c[0].text == "Paris is the capital");
    CHECK(c[0].title == "France");
    CHECK(c[0].features == featurize("France Paris is the capital", HashConfig{}));
}

TEST_CASE("passage TSV without a header keeps every row") {
    const auto c = corpus_from("d1\tone\tA\nd2\ttwo\t\n");
    REQUIRE(c.size() == 2);
    CHECK(c[1].title.empty());
    CHECK(c.index_of("d2") == 1);
    CHECK_FALSE(c.find("d3").has_value());
}

TEST_CASE("passage TSV with a wrong column count names the line") {
    try {
        corpus_from("id\ttext\ttitle\nd1\tone\tA\nd2\tonly two\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("test.tsv:3") != std::string::npos);
    }
}

TEST_CASE("duplicate passage ids are rejected by name") {
    try {
        corpus_from("d1\tone\tA\nd7\ttwo\tB\nd7\tthree\tC\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("d7") != std::string::npos);
    }
}

TEST_CASE("quoted passage text is unquoted") {
    const auto c = corpus_from("d1\t\"He said \"\"hi\"\"\"\tT\n");
    CHECK(c[0].text == "He said \"hi\"");
}

TEST_CASE("1000-row synthetic passage file loads every id in order") {
    const auto dir = synthetic::temp_dir("corpus_1000");
    std::vector<std::string> ids;
    {
        std::ofstream out(dir / "p.tsv");
        out << "id\ttext\ttitle\n";
        Rng rng(11);
        for (int i = 0; i < 1000; ++i) {
            const std::string id = "doc-" + std::to_string(rng.next() % 1000000) + "-" + std::to_string(i);
            out << id << "\tsome text " << i << "\ttitle " << i << "\n";
        }
    }
    // Independent extraction: first tab-separated field of every line after the header.
    {
        std::ifstream in(dir / "p.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) ids.push_back(line.substr(0, line.find('\t')));
    }
    const auto c = load_corpus(dir / "p.tsv", HashConfig{});
    REQUIRE(c.size() == ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) CHECK(c[i].id == ids[i]);
}

TEST_CASE("loading a missing passage file names the path") {
    try {
        load_corpus("/nonexistent/passages.tsv", HashConfig{});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("/nonexistent/passages.tsv") != std::string::npos);
    }
}

TEST_CASE("training record with one positive and no hard negatives") {
    const auto c = corpus_from("d1\tParis is the capital\tFrance\nd2\tBerlin\tGermany\n");
    const auto set = parse_training(
        R"({"question": "capital of France?", "answers": ["Paris"], "positive_ctxs": [{"passage_id": "d1"}]})", {},
        &c);
    REQUIRE(set.examples.size() == 1);
    const auto& ex = set.examples[0];
    CHECK(ex.positive_doc_id == "d1");
    CHECK(ex.hard_negative_doc_ids.empty());
    CHECK(ex.answers == std::vector<std::string>{"Paris"});
    CHECK(ex.query.text == "capital of France?");
    CHECK(ex.query.id == "q0");
}

TEST_CASE("training records without a positive are skipped and counted") {
    const std::string jsonl = R"({"question": "a", "answers": [], "positive_ctxs": []}
{"question": "b", "answers": [], "positive_ctxs": [{"id": "d2"}], "hard_negative_ctxs": [{"passage_id": "d1"}, {"passage_id": "d2"}, {"passage_id": "zz"}]}
)";
    const auto c = corpus_from("d1\tx\t\nd2\ty\t\n");
    const auto set = parse_training(jsonl, {}, &c);
    CHECK(set.skipped_no_positive == 1);
    REQUIRE(set.examples.size() == 1);
    CHECK(set.examples[0].positive_doc_id == "d2");
    // Equal to the positive or unknown: dropped.
    CHECK(set.examples[0].hard_negative_doc_ids == std::vector<std::string>{"d1"});
    CHECK(set.dropped_hard_negatives == 2);
}

TEST_CASE("training records as a JSON array keep hard-negative order") {
    const std::string json = R"([{"id": "x", "question": "q", "answers": ["a"],
        "positive_ctxs": [{"passage_id": "d3"}, {"passage_id": "d1"}],
        "hard_negative_ctxs": [{"passage_id": "d2"}, {"passage_id": "d1"}]}])";
    const auto set = parse_training(json, {});
    REQUIRE(set.examples.size() == 1);
    CHECK(set.examples[0].query.id == "x");
    CHECK(set.examples[0].positive_doc_id == "d3");
    CHECK(set.examples[0].hard_negative_doc_ids == std::vector<std::string>{"d2", "d1"});
}

TEST_CASE("unparsable training record names its index") {
    const std::string jsonl = "{\"question\": \"a\", \"answers\": [], \"positive_ctxs\": [{\"id\": \"d1\"}]}\n{not json\n";
    try {
        parse_training(jsonl, {});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("record 1") != std::string::npos);
    }
}

TEST_CASE("positive missing from the corpus is an error") {
    const auto c = corpus_from("d1\tx\t\n");
    CHECK_THROWS_AS(
        parse_training(R"({"question": "a", "answers": [], "positive_ctxs": [{"id": "nope"}]})", {}, &c), Error);
}

TEST_CASE("50-record file with 3 positive-less records yields 47 examples") {
    synthetic::Spec spec;
    spec.documents = 100;
    spec.clusters = 5;
    spec.train_queries = 50;
    spec.heldout_queries = 0;
    spec.skip_every = 16;  // records 16, 32, 48
    const auto text = synthetic::make_text(spec);

    // Independent count: lines whose positive_ctxs array is non-empty.
    std::size_t qualifying = 0;
    std::istringstream lines(text.train_jsonl);
    for (std::string line; std::getline(lines, line);)
        if (line.find("\"positive_ctxs\":[]") == std::string::npos) ++qualifying;
    REQUIRE(qualifying == 47);

    const auto set = parse_training(text.train_jsonl, {});
    CHECK(set.examples.size() == qualifying);
    CHECK(set.skipped_no_positive == 3);
}

TEST_CASE("loading the same files twice gives identical collections") {
    synthetic::Spec spec;
    spec.documents = 200;
    spec.train_queries = 30;
    const auto files = synthetic::write_files(spec, synthetic::temp_dir("corpus_determinism"));
    const HashConfig hash;
    const auto c1 = load_corpus(files.passages, hash);
    const auto c2 = load_corpus(files.passages, hash);
    CHECK(c1 == c2);
    const auto t1 = load_training(files.train, hash, &c1);
    const auto t2 = load_training(files.train, hash, &c2);
    CHECK(t1.examples == t2.examples);
}
