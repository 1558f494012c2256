#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dar/corpus.hpp"
#include "dar/encoder.hpp"
#include "dar/linalg.hpp"

namespace dar {

// Selects between the serial reference kernels and the OpenMP kernels. Both
// produce identical results.
enum class Exec { serial, parallel };

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
    bool operator==(const ScoredDoc&) const = default;
};

// Descending score, ties broken by ascending document id.
struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> results;
    bool operator==(const RankedList&) const = default;
};

// rank[i] is the position of ids[i] in lexicographic order.
std::vector<std::uint32_t> rank_ids(std::span<const std::string> ids);

struct DenseIndex {
    std::vector<std::string> ids;
    Matrix vectors;
    Similarity metric = Similarity::dot;
    std::vector<double> norms;          // Euclidean norm per row
    std::vector<std::uint32_t> id_rank;

    std::size_t size() const { return ids.size(); }
};

DenseIndex make_dense_index(std::vector<std::string> ids, Matrix vectors, Similarity metric);
DenseIndex encode_corpus(const Corpus& corpus, const EncoderParams& params, Similarity metric,
                         Exec exec = Exec::parallel);

RankedList dense_topk(const Query& query, const DenseIndex& index, const EncoderParams& params, std::size_t k);
std::vector<RankedList> dense_search(std::span<const Query> queries, const DenseIndex& index,
                                     const EncoderParams& params, std::size_t k, Exec exec = Exec::parallel);

// Binary dense index: "DARI" | u32 version | u32 metric | u64 rows | u64 cols |
// per row: u32 id length, id bytes | f64 vectors row-major.
void save_dense_index(const std::filesystem::path& path, const DenseIndex& index);
DenseIndex load_dense_index(const std::filesystem::path& path);

// `doc_id<TAB>v1,...,vm`
void write_embeddings_tsv(std::ostream& out, const DenseIndex& index);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0;
    std::uint32_t tf = 0;
};

// Okapi BM25 over hashed terms.
struct Bm25Index {
    Bm25Params params;
    std::unordered_map<std::uint32_t, std::vector<Posting>> postings;
    std::vector<std::uint32_t> doc_lengths;
    double avg_length = 0.0;
    std::vector<std::string> ids;
    std::vector<std::uint32_t> id_rank;

    std::size_t size() const { return ids.size(); }
    // ln((N - df + 0.5) / (df + 0.5) + 1)
    double idf(std::size_t df) const;
};

Bm25Index build_bm25(const Corpus& corpus, Bm25Params params = {});

// Scores are summed over the distinct terms of the query.
RankedList bm25_topk(const Query& query, const Bm25Index& index, std::size_t k);
std::vector<RankedList> bm25_search(std::span<const Query> queries, const Bm25Index& index, std::size_t k,
                                    Exec exec = Exec::parallel);

// Retrieval output, one JSON record per line:
// {"query_id", "results": [{"doc_id", "score", "rank"}]}
void write_run(std::ostream& out, std::span<const RankedList> lists);
std::vector<RankedList> read_run(const std::filesystem::path& path);

}  // namespace dar

namespace dar {

// Replaces each example's hard negatives with its top BM25 hits that are not
// the positive passage and do not contain an answer.
void mine_hard_negatives(std::span<TrainingExample> examples, const Corpus& corpus, const Bm25Index& index,
                         std::size_t count, Exec exec = Exec::parallel);

}  // namespace dar
