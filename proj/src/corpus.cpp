#include "dar/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dar/error.hpp"

namespace dar {

namespace {

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::string unquote(std::string_view field) {
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') {
        std::string out;
        field = field.substr(1, field.size() - 2);
        for (std::size_t i = 0; i < field.size(); ++i) {
            out.push_back(field[i]);
            if (field[i] == '"' && i + 1 < field.size() && field[i + 1] == '"') ++i;
        }
        return out;
    }
    return std::string(field);
}

}  // namespace

void HashConfig::validate() const {
    if (vocab_dim == 0 || (vocab_dim & (vocab_dim - 1)) != 0)
        throw Error("hash vocab_dim must be a power of two, got " + std::to_string(vocab_dim));
}

std::vector<std::string> tokenize(std::string_view text, const HashConfig& config) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_word_byte(c)) {
            current.push_back(config.lowercase && c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::uint64_t hash_token(std::string_view token, std::uint64_t seed) {
    // FNV-1a over the bytes, seeded through the offset basis, then a
    // splitmix64 finalizer so low bits are well mixed for the power-of-two mask.
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    for (const char ch : token) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

SparseFeatures hash_features(std::span<const std::string> tokens, const HashConfig& config) {
    config.validate();
    const std::uint64_t mask = config.vocab_dim - 1;
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& token : tokens) ++counts[static_cast<std::uint32_t>(hash_token(token, config.seed) & mask)];
    SparseFeatures out;
    out.reserve(counts.size());
    for (const auto& [index, count] : counts) out.push_back({index, count});
    return out;
}

Document make_document(std::string id, std::string title, std::string text, const HashConfig& config) {
    Document doc{std::move(id), std::move(title), std::move(text), {}};
    doc.features = featurize(doc.title + " " + doc.text, config);
    return doc;
}

Query make_query(std::string id, std::string text, const HashConfig& config) {
    Query q{std::move(id), std::move(text), {}};
    q.features = featurize(q.text, config);
    return q;
}

Corpus::Corpus(HashConfig config, std::vector<Document> docs) : config_(config), docs_(std::move(docs)) {
    config_.validate();
    by_id_.reserve(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        if (!by_id_.emplace(docs_[i].id, i).second) throw Error("duplicate document id '" + docs_[i].id + "'");
    }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
    const auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::size_t Corpus::index_of(std::string_view id) const {
    if (auto i = find(id)) return *i;
    throw Error("unknown document id '" + std::string(id) + "'");
}

Corpus parse_corpus(std::istream& in, const HashConfig& config, std::string_view source) {
    config.validate();
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "id\ttext\ttitle") continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3) {
            throw Error(std::string(source) + ":" + std::to_string(line_no) + ": expected 3 tab-separated columns, got " +
                        std::to_string(fields.size()));
        }
        docs.push_back(make_document(std::string(fields[0]), unquote(fields[2]), unquote(fields[1]), config));
    }
    return Corpus(config, std::move(docs));
}

Corpus load_corpus(const std::filesystem::path& path, const HashConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return parse_corpus(in, config, path.string());
}

namespace {

std::string json_id(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw Error("id must be a string or integer");
}

std::string context_id(const nlohmann::json& ctx) {
    if (ctx.contains("passage_id")) return json_id(ctx.at("passage_id"));
    if (ctx.contains("id")) return json_id(ctx.at("id"));
    throw Error("context has neither 'passage_id' nor 'id'");
}

// Returns nullopt when the record has no positive context.
std::optional<TrainingExample> parse_record(const nlohmann::json& rec, std::size_t index, const HashConfig& config,
                                            const Corpus* corpus, std::size_t& dropped) {
    if (!rec.is_object()) throw Error("not an object");
    std::string qid = "q" + std::to_string(index);
    for (const char* key : {"id", "qid", "query_id"}) {
        if (rec.contains(key)) {
            qid = json_id(rec.at(key));
            break;
        }
    }
    TrainingExample ex;
    ex.query = make_query(std::move(qid), rec.at("question").get<std::string>(), config);
    if (rec.contains("answers")) ex.answers = rec.at("answers").get<std::vector<std::string>>();
    const auto& positives = rec.at("positive_ctxs");
    if (!positives.is_array()) throw Error("'positive_ctxs' must be an array");
    if (positives.empty()) return std::nullopt;
    ex.positive_doc_id = context_id(positives.front());
    if (corpus && !corpus->find(ex.positive_doc_id))
        throw Error("positive passage '" + ex.positive_doc_id + "' not in corpus");
    if (rec.contains("hard_negative_ctxs")) {
        for (const auto& ctx : rec.at("hard_negative_ctxs")) {
            auto id = context_id(ctx);
            if (id == ex.positive_doc_id || (corpus && !corpus->find(id))) {
                ++dropped;
                continue;
            }
            ex.hard_negative_doc_ids.push_back(std::move(id));
        }
    }
    return ex;
}

}  // namespace

TrainingSet parse_training(std::string_view content, const HashConfig& config, const Corpus* corpus) {
    config.validate();
    std::vector<nlohmann::json> records;
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && content[first] == '[') {
        nlohmann::json all;
        try {
            all = nlohmann::json::parse(content);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("training file is not a valid JSON array: ") + e.what());
        }
        records.assign(all.begin(), all.end());
    } else {
        std::size_t start = 0;
        while (start < content.size()) {
            auto end = content.find('\n', start);
            if (end == std::string_view::npos) end = content.size();
            const auto line = content.substr(start, end - start);
            start = end + 1;
            if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
            try {
                records.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                throw Error("record " + std::to_string(records.size()) + ": " + e.what());
            }
        }
    }

    TrainingSet set;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            auto ex = parse_record(records[i], i, config, corpus, set.dropped_hard_negatives);
            if (ex)
                set.examples.push_back(std::move(*ex));
            else
                ++set.skipped_no_positive;
        } catch (const nlohmann::json::exception& e) {
            throw Error("record " + std::to_string(i) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("record " + std::to_string(i) + ": " + e.what());
        }
    }
    return set;
}

TrainingSet load_training(const std::filesystem::path& path, const HashConfig& config, const Corpus* corpus) {
    const auto content = read_file(path);
    try {
        return parse_training(content, config, corpus);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace dar
