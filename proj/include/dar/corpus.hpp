#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dar {

struct HashConfig {
    std::uint32_t vocab_dim = 1u << 18;  // must be a power of two
    bool lowercase = true;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const HashConfig&) const = default;
};

struct FeatureCount {
    std::uint32_t index = 0;
    std::uint32_t count = 0;
    bool operator==(const FeatureCount&) const = default;
};

// Hashed bag of words, sorted by index, every count >= 1.
using SparseFeatures = std::vector<FeatureCount>;

// Lowercases ASCII letters (when configured) and splits on maximal runs of
// non-alphanumeric codepoints. Bytes of multi-byte UTF-8 sequences count as
// alphanumeric and are passed through unchanged.
std::vector<std::string> tokenize(std::string_view text, const HashConfig& config);

std::uint64_t hash_token(std::string_view token, std::uint64_t seed);

SparseFeatures hash_features(std::span<const std::string> tokens, const HashConfig& config);

inline SparseFeatures featurize(std::string_view text, const HashConfig& config) {
    const auto tokens = tokenize(text, config);
    return hash_features(tokens, config);
}

struct Document {
    std::string id;
    std::string title;
    std::string text;
    SparseFeatures features;  // of title + " " + text

    bool operator==(const Document&) const = default;
};

struct Query {
    std::string id;
    std::string text;
    SparseFeatures features;

    bool operator==(const Query&) const = default;
};

struct TrainingExample {
    Query query;
    std::string positive_doc_id;
    std::vector<std::string> hard_negative_doc_ids;
    std::vector<std::string> answers;

    bool operator==(const TrainingExample&) const = default;
};

Document make_document(std::string id, std::string title, std::string text, const HashConfig& config);
Query make_query(std::string id, std::string text, const HashConfig& config);

// Immutable document collection with id lookup.
class Corpus {
public:
    Corpus() = default;
    // Throws on duplicate ids.
    Corpus(HashConfig config, std::vector<Document> docs);

    const HashConfig& hash_config() const { return config_; }
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    const std::vector<Document>& documents() const { return docs_; }
    const Document& operator[](std::size_t i) const { return docs_[i]; }

    std::optional<std::size_t> find(std::string_view id) const;
    // Throws if absent.
    std::size_t index_of(std::string_view id) const;

    bool operator==(const Corpus& other) const {
        return config_ == other.config_ && docs_ == other.docs_;
    }

private:
    HashConfig config_;
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Passage TSV: `id<TAB>text<TAB>title`, optional header row with exactly
// those names. Quoted text fields ("...", with "" escapes) are unquoted.
Corpus parse_corpus(std::istream& in, const HashConfig& config, std::string_view source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path, const HashConfig& config);

struct TrainingSet {
    std::vector<TrainingExample> examples;
    std::size_t skipped_no_positive = 0;
    std::size_t dropped_hard_negatives = 0;  // missing from the corpus or equal to the positive
};

// DPR training records as a JSON array or JSON lines. When `corpus` is given,
// positives must exist in it and unknown hard negatives are dropped.
TrainingSet parse_training(std::string_view content, const HashConfig& config, const Corpus* corpus = nullptr);
TrainingSet load_training(const std::filesystem::path& path, const HashConfig& config,
                          const Corpus* corpus = nullptr);

}  // namespace dar
