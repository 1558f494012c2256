#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dar/corpus.hpp"
#include "dar/search.hpp"

namespace dar {

// answer: a document is relevant when it contains one of the query's answers.
// gold:   a document is relevant when it is the query's positive passage.
enum class RelevanceMode { answer, gold };

RelevanceMode parse_relevance_mode(std::string_view name);
std::string_view to_string(RelevanceMode mode);

// Binary relevance per rank of a RankedList.
using Judgment = std::vector<std::uint8_t>;

// True when some answer, tokenized like the corpus, appears as a contiguous
// token run in the tokenized text. Matches never split a word.
bool contains_answer(std::string_view text, std::span<const std::string> answers, const HashConfig& config);

// Throws when answers is empty.
Judgment judge_answers(const RankedList& ranked, std::span<const std::string> answers, const Corpus& corpus);
Judgment judge_gold(const RankedList& ranked, std::string_view gold_id);

// Fraction of queries with a relevant document in ranks 1..k. Throws if k > depth.
double topk_accuracy(std::span<const Judgment> judgments, std::size_t k, std::size_t depth);

// Same quantity as topk_accuracy: with a single gold passage per query,
// "at least one relevant in the top k" is recall@k.
double recall_at(std::span<const Judgment> judgments, std::size_t k, std::size_t depth);

// Mean of 1 / rank of the first relevant document within the cap (0 if none).
double mean_reciprocal_rank(std::span<const Judgment> judgments, std::size_t cap = 100);

// Mean over queries of average precision within the cap; AP is the mean of
// precision@r over relevant ranks r, or 0 when nothing relevant was retrieved.
double mean_average_precision(std::span<const Judgment> judgments, std::size_t cap = 100);

struct EvalConfig {
    RelevanceMode mode = RelevanceMode::answer;
    std::size_t depth = 100;
    std::size_t cap = 100;
    std::vector<std::size_t> topk = {1, 5, 20, 100};
    std::vector<std::size_t> recall_k;
};

struct MetricsReport {
    std::size_t n_queries = 0;
    std::size_t depth = 0;
    RelevanceMode mode = RelevanceMode::answer;
    std::map<std::string, double> metrics;  // scaled x100

    // {"n_queries", "depth", "relevance", "metrics": {...}} with metrics
    // rounded to two decimals.
    nlohmann::json to_json() const;
};

// Throws listing the ids of examples without a retrieval record.
MetricsReport evaluate(std::span<const RankedList> run, std::span<const TrainingExample> examples,
                       const Corpus& corpus, const EvalConfig& config);

}  // namespace dar
