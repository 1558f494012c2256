#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dar/error.hpp"
#include "dar/eval.hpp"
#include "dar/rng.hpp"
#include "oracles.hpp"

using namespace dar;

namespace {

Judgment first_relevant_at(std::size_t rank, std::size_t len = 10) {
    Judgment j(len, 0);
    if (rank > 0) j[rank - 1] = 1;
    return j;
}

std::vector<Judgment> random_judgments(std::size_t n, std::uint64_t seed) {
    std::vector<Judgment> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_judgment(seed * 100003 + i, 120));
    return out;
}

// Gold-id data: query i's positive is document i.
struct GoldData {
    Corpus corpus;
    std::vector<TrainingExample> examples;
};

GoldData gold_data(std::size_t n) {
    GoldData g;
    HashConfig h;
    std::vector<Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        docs.push_back(make_document("d" + std::to_string(i), "", "text " + std::to_string(i), h));
        TrainingExample ex;
        ex.query = make_query("q" + std::to_string(i), "text", h);
        ex.positive_doc_id = "d" + std::to_string(i);
        ex.answers = {std::to_string(i)};
        g.examples.push_back(ex);
    }
    g.corpus = Corpus(h, std::move(docs));
    return g;
}

std::vector<RankedList> perfect_run(const GoldData& g, bool reversed) {
    std::vector<RankedList> run;
    const std::size_t n = g.corpus.size();
    for (std::size_t i = 0; i < n; ++i) {
        RankedList list{g.examples[i].query.id, {}};
        list.results.push_back({"d" + std::to_string(i), 1.0});
        for (std::size_t d = 0; d < n; ++d)
            if (d != i) list.results.push_back({"d" + std::to_string(d), 0.5 - 0.001 * static_cast<double>(d)});
        if (reversed) std::reverse(list.results.begin(), list.results.end());
        run.push_back(list);
    }
    return run;
}

// Independent containment check: exact token-run match on lowercase tokens.
bool contains_oracle(const std::vector<std::string>& text, const std::vector<std::string>& answer) {
    if (answer.empty() || answer.size() > text.size()) return false;
    for (std::size_t i = 0; i + answer.size() <= text.size(); ++i)
        if (std::equal(answer.begin(), answer.end(), text.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    return false;
}

}  // namespace

TEST_CASE("answer containment respects token boundaries") {
    const HashConfig h;
    const std::vector<std::string> paris{"paris"};
    CHECK(contains_answer("Paris is the capital", paris, h));
    CHECK_FALSE(contains_answer("comparison", paris, h));
    const std::vector<std::string> multi{"New York"};
    CHECK(contains_answer("he moved to new york city", multi, h));
    CHECK_FALSE(contains_answer("new jersey and york", multi, h));
    const std::vector<std::string> punct{"U.S."};
    CHECK(contains_answer("the u s army", punct, h));
}

TEST_CASE("judging by answers and by gold id") {
    HashConfig h;
    const Corpus corpus(h, {make_document("a", "", "Paris is the capital", h), make_document("b", "", "comparison", h)});
    const RankedList list{"q", {{"b", 2.0}, {"a", 1.0}}};
    const std::vector<std::string> answers{"paris"};
    CHECK(judge_answers(list, answers, corpus) == Judgment{0, 1});
    CHECK(judge_gold(list, "b") == Judgment{1, 0});
    CHECK_THROWS_AS(judge_answers(list, {}, corpus), Error);
}

TEST_CASE("planted answers match an independent subsequence search") {
    HashConfig h;
    Rng rng(1);
    std::vector<Document> docs;
    std::vector<std::vector<std::string>> tokens;
    for (std::size_t d = 0; d < 100; ++d) {
        std::string text;
        for (std::size_t i = 0, n = 3 + rng.below(10); i < n; ++i) text += "v" + std::to_string(rng.below(12)) + " ";
        // Plant a two-word answer in every third document.
        if (d % 3 == 0) text += "golden gate ";
        docs.push_back(make_document("d" + std::to_string(d), "", text, h));
        tokens.push_back(tokenize(text, h));
    }
    const Corpus corpus(h, docs);
    RankedList list{"q", {}};
    for (std::size_t d = 0; d < 100; ++d) list.results.push_back({corpus[d].id, 0.0});
    for (const std::vector<std::string> answers :
         {std::vector<std::string>{"Golden Gate"}, std::vector<std::string>{"v3 v4"},
          std::vector<std::string>{"v1", "v11"}}) {
        const auto j = judge_answers(list, answers, corpus);
        for (std::size_t d = 0; d < 100; ++d) {
            bool expected = false;
            for (const auto& a : answers) expected = expected || contains_oracle(tokens[d], tokenize(a, h));
            CHECK(j[d] == (expected ? 1 : 0));
        }
    }
}

TEST_CASE("top-k accuracy examples") {
    const std::vector<Judgment> one{first_relevant_at(4)};
    CHECK(topk_accuracy(one, 5, 10) == 1.0);
    CHECK(topk_accuracy(one, 1, 10) == 0.0);
    const std::vector<Judgment> none{Judgment(10, 0), Judgment(10, 0)};
    for (const std::size_t k : {1, 5, 10}) CHECK(topk_accuracy(none, k, 10) == 0.0);
    CHECK_THROWS_AS(topk_accuracy(one, 11, 10), Error);
    CHECK(recall_at(one, 5, 10) == 1.0);
    CHECK(recall_at(one, 1, 10) == 0.0);
    CHECK(recall_at(none, 5, 10) == 0.0);
    CHECK_THROWS_AS(recall_at(one, 11, 10), Error);
}

TEST_CASE("MRR examples") {
    CHECK(mean_reciprocal_rank(std::vector<Judgment>{first_relevant_at(1)}) == 1.0);
    CHECK(mean_reciprocal_rank(std::vector<Judgment>{first_relevant_at(4)}) == 0.25);
    const std::vector<Judgment> mixed{first_relevant_at(1), first_relevant_at(2), first_relevant_at(0)};
    CHECK(mean_reciprocal_rank(mixed) == doctest::Approx(0.5).epsilon(1e-15));
    // Beyond the cap counts as absent.
    CHECK(mean_reciprocal_rank(std::vector<Judgment>{first_relevant_at(4)}, 3) == 0.0);
}

TEST_CASE("MAP examples") {
    CHECK(mean_average_precision(std::vector<Judgment>{Judgment(7, 1)}) == 1.0);
    CHECK(mean_average_precision(std::vector<Judgment>{first_relevant_at(2, 5)}) == 0.5);
    CHECK(mean_average_precision(std::vector<Judgment>{Judgment{1, 0, 1}}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(mean_average_precision(std::vector<Judgment>{Judgment(5, 0)}) == 0.0);
}

TEST_CASE("metrics equal brute-force oracles on 1000 random lists") {
    const auto lists = random_judgments(1000, 7);
    for (const std::size_t k : {1, 5, 20, 100}) {
        double hits = 0;
        for (const auto& j : lists) hits += oracle::hit_within(j, k) ? 1 : 0;
        CHECK(topk_accuracy(lists, k, 120) == hits / 1000.0);
        CHECK(recall_at(lists, k, 120) == hits / 1000.0);
    }
    for (const std::size_t cap : {10, 100}) {
        double rr = 0, ap = 0;
        for (const auto& j : lists) {
            rr += oracle::reciprocal_rank(j, cap);
            ap += oracle::average_precision(j, cap);
        }
        CHECK(mean_reciprocal_rank(lists, cap) == rr / 1000.0);
        CHECK(std::abs(mean_average_precision(lists, cap) - ap / 1000.0) <= 1e-12);
    }
}

TEST_CASE("metric ranges and top-k monotonicity") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto lists = random_judgments(50, seed + 100);
        double prev = 0.0;
        for (const std::size_t k : {1, 5, 20, 100}) {
            const double t = topk_accuracy(lists, k, 120);
            CHECK(t >= prev);
            prev = t;
        }
        const double mrr = mean_reciprocal_rank(lists);
        const double map = mean_average_precision(lists);
        CHECK((mrr >= 0.0 && mrr <= 1.0));
        CHECK((map >= 0.0 && map <= 1.0));
    }
}

TEST_CASE("perfect retriever scores 100 and a reversed one scores T1 = 0") {
    const auto g = gold_data(30);
    EvalConfig cfg;
    cfg.mode = RelevanceMode::gold;
    cfg.recall_k = {10};
    const auto perfect = evaluate(perfect_run(g, false), g.examples, g.corpus, cfg);
    CHECK(perfect.n_queries == 30);
    for (const auto& [name, value] : perfect.metrics) CHECK(value == 100.0);
    CHECK(perfect.metrics.count("R@10") == 1);

    const auto reversed = evaluate(perfect_run(g, true), g.examples, g.corpus, cfg);
    CHECK(reversed.metrics.at("T1") == 0.0);

    cfg.mode = RelevanceMode::answer;
    const auto by_answer = evaluate(perfect_run(g, false), g.examples, g.corpus, cfg);
    CHECK(by_answer.metrics.at("T1") == 100.0);
}

TEST_CASE("missing retrieval records are listed") {
    const auto g = gold_data(5);
    auto run = perfect_run(g, false);
    run.erase(run.begin() + 1);
    run.erase(run.begin() + 2);
    EvalConfig cfg;
    cfg.mode = RelevanceMode::gold;
    try {
        evaluate(run, g.examples, g.corpus, cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("q1") != std::string::npos);
        CHECK(msg.find("q3") != std::string::npos);
    }
}

TEST_CASE("metrics depend only on rank order") {
    const auto g = gold_data(25);
    Rng rng(3);
    std::vector<RankedList> run;
    for (std::size_t i = 0; i < 25; ++i) {
        RankedList list{g.examples[i].query.id, {}};
        for (std::size_t d = 0; d < 25; ++d) list.results.push_back({"d" + std::to_string(d), rng.uniform(-2, 2)});
        std::sort(list.results.begin(), list.results.end(),
                  [](const ScoredDoc& a, const ScoredDoc& b) { return a.score > b.score; });
        run.push_back(list);
    }
    auto transformed = run;
    for (auto& list : transformed)
        for (auto& r : list.results) r.score = std::exp(3.0 * r.score) - 7.0;
    EvalConfig cfg;
    cfg.mode = RelevanceMode::gold;
    cfg.depth = 20;
    cfg.cap = 20;
    cfg.topk = {1, 5, 20};
    CHECK(evaluate(run, g.examples, g.corpus, cfg).metrics == evaluate(transformed, g.examples, g.corpus, cfg).metrics);
}

TEST_CASE("report JSON carries counts, mode and rounded metrics") {
    MetricsReport r;
    r.n_queries = 3;
    r.depth = 100;
    r.mode = RelevanceMode::gold;
    r.metrics = {{"MRR", 100.0 / 3.0}, {"T1", 50.0}};
    const auto j = r.to_json();
    CHECK(j.at("n_queries") == 3);
    CHECK(j.at("depth") == 100);
    CHECK(j.at("relevance") == "gold");
    CHECK(j.at("metrics").at("MRR").get<double>() == 33.33);
    CHECK(j.at("metrics").at("T1").get<double>() == 50.0);
    CHECK(parse_relevance_mode("answer") == RelevanceMode::answer);
    CHECK_THROWS_AS(parse_relevance_mode("fuzzy"), Error);
}
