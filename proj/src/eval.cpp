#include "dar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dar/error.hpp"

namespace dar {

RelevanceMode parse_relevance_mode(std::string_view name) {
    if (name == "answer") return RelevanceMode::answer;
    if (name == "gold") return RelevanceMode::gold;
    throw Error("unknown relevance mode '" + std::string(name) + "' (expected answer or gold)");
}

std::string_view to_string(RelevanceMode mode) { return mode == RelevanceMode::answer ? "answer" : "gold"; }

bool contains_answer(std::string_view text, std::span<const std::string> answers, const HashConfig& config) {
    HashConfig lower = config;
    lower.lowercase = true;
    const auto tokens = tokenize(text, lower);
    for (const auto& answer : answers) {
        const auto needle = tokenize(answer, lower);
        if (needle.empty()) continue;
        if (std::search(tokens.begin(), tokens.end(), needle.begin(), needle.end()) != tokens.end()) return true;
    }
    return false;
}

Judgment judge_answers(const RankedList& ranked, std::span<const std::string> answers, const Corpus& corpus) {
    if (answers.empty()) throw Error("query '" + ranked.query_id + "' has no answers to judge against");
    Judgment j;
    j.reserve(ranked.results.size());
    for (const auto& r : ranked.results)
        j.push_back(contains_answer(corpus[corpus.index_of(r.doc_id)].text, answers, corpus.hash_config()) ? 1 : 0);
    return j;
}

Judgment judge_gold(const RankedList& ranked, std::string_view gold_id) {
    Judgment j;
    j.reserve(ranked.results.size());
    for (const auto& r : ranked.results) j.push_back(r.doc_id == gold_id ? 1 : 0);
    return j;
}

double topk_accuracy(std::span<const Judgment> judgments, std::size_t k, std::size_t depth) {
    if (k > depth)
        throw Error("top-" + std::to_string(k) + " exceeds retrieval depth " + std::to_string(depth));
    if (judgments.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& j : judgments) {
        const auto end = j.begin() + static_cast<std::ptrdiff_t>(std::min(k, j.size()));
        if (std::find(j.begin(), end, 1) != end) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(judgments.size());
}

double recall_at(std::span<const Judgment> judgments, std::size_t k, std::size_t depth) {
    return topk_accuracy(judgments, k, depth);
}

double mean_reciprocal_rank(std::span<const Judgment> judgments, std::size_t cap) {
    if (judgments.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& j : judgments) {
        const std::size_t n = std::min(cap, j.size());
        for (std::size_t r = 0; r < n; ++r) {
            if (j[r]) {
                sum += 1.0 / static_cast<double>(r + 1);
                break;
            }
        }
    }
    return sum / static_cast<double>(judgments.size());
}

double mean_average_precision(std::span<const Judgment> judgments, std::size_t cap) {
    if (judgments.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& j : judgments) {
        const std::size_t n = std::min(cap, j.size());
        std::size_t relevant = 0;
        double precision_sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (!j[r]) continue;
            ++relevant;
            precision_sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
        }
        if (relevant > 0) sum += precision_sum / static_cast<double>(relevant);
    }
    return sum / static_cast<double>(judgments.size());
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [name, value] : metrics) m[name] = std::round(value * 100.0) / 100.0;
    return {{"n_queries", n_queries}, {"depth", depth}, {"relevance", to_string(mode)}, {"metrics", m}};
}

MetricsReport evaluate(std::span<const RankedList> run, std::span<const TrainingExample> examples,
                       const Corpus& corpus, const EvalConfig& config) {
    if (config.cap > config.depth) throw Error("metric cap exceeds retrieval depth");
    std::unordered_map<std::string, const RankedList*> by_query;
    for (const auto& list : run) by_query.emplace(list.query_id, &list);

    std::vector<std::string> missing;
    for (const auto& ex : examples)
        if (!by_query.contains(ex.query.id)) missing.push_back(ex.query.id);
    if (!missing.empty()) {
        std::string msg = "no retrieval record for " + std::to_string(missing.size()) + " queries:";
        for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
        if (missing.size() > 20) msg += " ...";
        throw Error(msg);
    }

    std::vector<Judgment> judgments;
    judgments.reserve(examples.size());
    for (const auto& ex : examples) {
        RankedList ranked = *by_query.at(ex.query.id);
        if (ranked.results.size() > config.depth) ranked.results.resize(config.depth);
        judgments.push_back(config.mode == RelevanceMode::gold ? judge_gold(ranked, ex.positive_doc_id)
                                                               : judge_answers(ranked, ex.answers, corpus));
    }

    MetricsReport report;
    report.n_queries = examples.size();
    report.depth = config.depth;
    report.mode = config.mode;
    for (const auto k : config.topk) report.metrics["T" + std::to_string(k)] = 100.0 * topk_accuracy(judgments, k, config.depth);
    for (const auto k : config.recall_k)
        report.metrics["R@" + std::to_string(k)] = 100.0 * recall_at(judgments, k, config.depth);
    report.metrics["MRR"] = 100.0 * mean_reciprocal_rank(judgments, config.cap);
    report.metrics["MAP"] = 100.0 * mean_average_precision(judgments, config.cap);
    return report;
}

}  // namespace dar
