#include "dar/search.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "dar/error.hpp"
#include "dar/kernels.hpp"

namespace dar {

std::vector<std::uint32_t> rank_ids(std::span<const std::string> ids) {
    std::vector<std::uint32_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0u);
    std::ranges::sort(order, [&](std::uint32_t a, std::uint32_t b) { return ids[a] < ids[b]; });
    std::vector<std::uint32_t> rank(ids.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    return rank;
}

namespace {

std::vector<const SparseFeatures*> feature_ptrs(const Corpus& corpus) {
    std::vector<const SparseFeatures*> out;
    out.reserve(corpus.size());
    for (const auto& d : corpus.documents()) out.push_back(&d.features);
    return out;
}

std::vector<const SparseFeatures*> feature_ptrs(std::span<const Query> queries) {
    std::vector<const SparseFeatures*> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(&q.features);
    return out;
}

std::vector<RankedList> to_ranked(std::span<const Query> queries, std::span<const std::string> ids,
                                  const std::vector<std::vector<kernels::ScoredIndex>>& hits) {
    std::vector<RankedList> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out[i].query_id = queries[i].id;
        out[i].results.reserve(hits[i].size());
        for (const auto& h : hits[i]) out[i].results.push_back({ids[h.doc], h.score});
    }
    return out;
}

}  // namespace

DenseIndex make_dense_index(std::vector<std::string> ids, Matrix vectors, Similarity metric) {
    if (ids.size() != vectors.rows) throw Error("dense index: id count does not match row count");
    DenseIndex index;
    index.metric = metric;
    index.norms.resize(vectors.rows);
    kernels::serial::row_norms(vectors, index.norms);
    for (std::size_t i = 0; i < vectors.rows; ++i) {
        for (const double x : vectors.row(i))
            if (!std::isfinite(x)) throw Error("dense index: non-finite vector for '" + ids[i] + "'");
        if (metric == Similarity::cosine && index.norms[i] == 0.0)
            throw Error("cosine similarity with a zero document vector ('" + ids[i] + "')");
    }
    index.id_rank = rank_ids(ids);
    index.ids = std::move(ids);
    index.vectors = std::move(vectors);
    return index;
}

DenseIndex encode_corpus(const Corpus& corpus, const EncoderParams& params, Similarity metric, Exec exec) {
    const auto items = feature_ptrs(corpus);
    Matrix vectors;
    if (exec == Exec::serial)
        kernels::serial::encode_rows(items, params.document, vectors);
    else
        kernels::omp::encode_rows(items, params.document, vectors);
    vectors.cols = params.dims.output;
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& d : corpus.documents()) ids.push_back(d.id);
    return make_dense_index(std::move(ids), std::move(vectors), metric);
}

std::vector<RankedList> dense_search(std::span<const Query> queries, const DenseIndex& index,
                                     const EncoderParams& params, std::size_t k, Exec exec) {
    if (k < 1) throw Error("top-k must be at least 1");
    const auto items = feature_ptrs(queries);
    Matrix qvecs;
    std::vector<std::vector<kernels::ScoredIndex>> hits;
    if (exec == Exec::serial) {
        kernels::serial::encode_rows(items, params.query, qvecs);
        hits = kernels::serial::dense_topk_rows(qvecs, index, k);
    } else {
        kernels::omp::encode_rows(items, params.query, qvecs);
        hits = kernels::omp::dense_topk_rows(qvecs, index, k);
    }
    return to_ranked(queries, index.ids, hits);
}

RankedList dense_topk(const Query& query, const DenseIndex& index, const EncoderParams& params, std::size_t k) {
    return dense_search(std::span<const Query>(&query, 1), index, params, k, Exec::serial).front();
}

namespace {

constexpr char kIndexMagic[4] = {'D', 'A', 'R', 'I'};
constexpr std::uint32_t kIndexVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(path.string() + ": truncated index");
    return v;
}

}  // namespace

void save_dense_index(const std::filesystem::path& path, const DenseIndex& index) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index " + path.string());
    out.write(kIndexMagic, 4);
    put<std::uint32_t>(out, kIndexVersion);
    put<std::uint32_t>(out, index.metric == Similarity::dot ? 0u : 1u);
    put<std::uint64_t>(out, index.vectors.rows);
    put<std::uint64_t>(out, index.vectors.cols);
    for (const auto& id : index.ids) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    out.write(reinterpret_cast<const char*>(index.vectors.data.data()),
              static_cast<std::streamsize>(index.vectors.data.size() * sizeof(double)));
    if (!out) throw Error("I/O error writing index " + path.string());
}

DenseIndex load_dense_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open index " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kIndexMagic, 4) != 0) throw Error(path.string() + ": not a DARI index");
    if (get<std::uint32_t>(in, path) != kIndexVersion) throw Error(path.string() + ": unsupported index version");
    const auto metric = get<std::uint32_t>(in, path) == 0 ? Similarity::dot : Similarity::cosine;
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    std::vector<std::string> ids(rows);
    for (auto& id : ids) {
        id.resize(get<std::uint32_t>(in, path));
        if (!in.read(id.data(), static_cast<std::streamsize>(id.size()))) throw Error(path.string() + ": truncated index");
    }
    Matrix vectors(rows, cols);
    if (!in.read(reinterpret_cast<char*>(vectors.data.data()),
                 static_cast<std::streamsize>(vectors.data.size() * sizeof(double))))
        throw Error(path.string() + ": truncated index");
    return make_dense_index(std::move(ids), std::move(vectors), metric);
}

namespace {

std::string format_double(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

}  // namespace

void write_embeddings_tsv(std::ostream& out, const DenseIndex& index) {
    for (std::size_t i = 0; i < index.size(); ++i) {
        out << index.ids[i] << '\t';
        const auto row = index.vectors.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
        out << '\n';
    }
}

double Bm25Index::idf(std::size_t df) const {
    const double n = static_cast<double>(ids.size());
    const double d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

Bm25Index build_bm25(const Corpus& corpus, Bm25Params params) {
    Bm25Index index;
    index.params = params;
    index.doc_lengths.resize(corpus.size());
    double total = 0.0;
    for (std::uint32_t i = 0; i < corpus.size(); ++i) {
        std::uint32_t len = 0;
        for (const auto& f : corpus[i].features) {
            index.postings[f.index].push_back({i, f.count});
            len += f.count;
        }
        index.doc_lengths[i] = len;
        total += len;
        index.ids.push_back(corpus[i].id);
    }
    index.avg_length = corpus.empty() || total == 0.0 ? 1.0 : total / static_cast<double>(corpus.size());
    index.id_rank = rank_ids(index.ids);
    return index;
}

std::vector<RankedList> bm25_search(std::span<const Query> queries, const Bm25Index& index, std::size_t k,
                                    Exec exec) {
    if (k < 1) throw Error("top-k must be at least 1");
    const auto items = feature_ptrs(queries);
    const auto hits = exec == Exec::serial ? kernels::serial::bm25_topk_rows(items, index, k)
                                           : kernels::omp::bm25_topk_rows(items, index, k);
    return to_ranked(queries, index.ids, hits);
}

RankedList bm25_topk(const Query& query, const Bm25Index& index, std::size_t k) {
    return bm25_search(std::span<const Query>(&query, 1), index, k, Exec::serial).front();
}

void write_run(std::ostream& out, std::span<const RankedList> lists) {
    for (const auto& list : lists) {
        nlohmann::json results = nlohmann::json::array();
        for (std::size_t r = 0; r < list.results.size(); ++r)
            results.push_back({{"doc_id", list.results[r].doc_id}, {"score", list.results[r].score}, {"rank", r + 1}});
        out << nlohmann::json{{"query_id", list.query_id}, {"results", std::move(results)}}.dump() << '\n';
    }
}

std::vector<RankedList> read_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open retrieval file " + path.string());
    std::vector<RankedList> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            RankedList list;
            list.query_id = rec.at("query_id").get<std::string>();
            for (const auto& r : rec.at("results"))
                list.results.push_back({r.at("doc_id").get<std::string>(), r.at("score").get<double>()});
            out.push_back(std::move(list));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace dar

#include "dar/eval.hpp"

namespace dar {

void mine_hard_negatives(std::span<TrainingExample> examples, const Corpus& corpus, const Bm25Index& index,
                         std::size_t count, Exec exec) {
    if (count == 0) return;
    std::vector<Query> queries;
    queries.reserve(examples.size());
    for (const auto& ex : examples) queries.push_back(ex.query);
    // Look a little deeper than `count` so answer-bearing hits can be skipped.
    const auto lists = bm25_search(queries, index, std::min(corpus.size(), count * 4 + 8), exec);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        auto& ex = examples[i];
        ex.hard_negative_doc_ids.clear();
        for (const auto& hit : lists[i].results) {
            if (ex.hard_negative_doc_ids.size() == count) break;
            if (hit.doc_id == ex.positive_doc_id) continue;
            if (!ex.answers.empty() &&
                contains_answer(corpus[corpus.index_of(hit.doc_id)].text, ex.answers, corpus.hash_config()))
                continue;
            ex.hard_negative_doc_ids.push_back(hit.doc_id);
        }
    }
}

}  // namespace dar
