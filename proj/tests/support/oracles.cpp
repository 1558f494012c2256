#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dar/rng.hpp"

namespace dar::oracle {

bool hit_within(const Judgment& j, std::size_t k) {
    for (std::size_t r = 0; r < j.size(); ++r)
        if (r < k && j[r] == 1) return true;
    return false;
}

double reciprocal_rank(const Judgment& j, std::size_t cap) {
    std::size_t first = 0;
    for (std::size_t r = j.size(); r-- > 0;)
        if (j[r] == 1) first = r + 1;
    if (first == 0 || first > cap) return 0.0;
    return 1.0 / static_cast<double>(first);
}

double average_precision(const Judgment& j, std::size_t cap) {
    const std::size_t n = std::min(cap, j.size());
    double precision_sum = 0.0;
    std::size_t relevant = 0;
    for (std::size_t r = 1; r <= n; ++r) {
        if (j[r - 1] != 1) continue;
        std::size_t above = 0;
        for (std::size_t s = 0; s < r; ++s) above += j[s];
        precision_sum += static_cast<double>(above) / static_cast<double>(r);
        ++relevant;
    }
    return relevant == 0 ? 0.0 : precision_sum / static_cast<double>(relevant);
}

Judgment random_judgment(std::uint64_t seed, std::size_t max_len) {
    Rng rng(seed);
    const std::size_t len = rng.below(max_len + 1);
    const double density = rng.uniform() * rng.uniform();
    Judgment j(len);
    for (auto& v : j) v = rng.uniform() < density ? 1 : 0;
    return j;
}

std::vector<Scored> full_sort(std::vector<Scored> all) {
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    return all;
}

std::vector<double> bm25_scores(const std::vector<std::string>& query, const std::vector<std::vector<std::string>>& docs,
                                double k1, double b) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0.0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avg_len = total_len / n;
    const std::set<std::string> terms(query.begin(), query.end());
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : terms) {
        double df = 0.0;
        for (const auto& d : docs)
            if (std::find(d.begin(), d.end(), term) != d.end()) df += 1.0;
        if (df == 0.0) continue;
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
            if (tf == 0.0) continue;
            const double len = static_cast<double>(docs[i].size());
            scores[i] += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len / avg_len));
        }
    }
    return scores;
}

bool same_ranking(const std::vector<Scored>& got, const std::vector<Scored>& want, double tol) {
    if (got.size() > want.size()) return false;
    std::map<std::string, double> reference;
    for (const auto& s : want) reference[s.id] = s.score;
    for (std::size_t r = 0; r < got.size(); ++r) {
        const auto it = reference.find(got[r].id);
        if (it == reference.end()) return false;
        // The document at rank r must score like the reference's rank-r
        // document, up to the tolerance of a tie.
        if (std::abs(it->second - want[r].score) > tol) return false;
        if (std::abs(got[r].score - it->second) > tol) return false;
    }
    // No duplicates.
    std::set<std::string> seen;
    for (const auto& s : got)
        if (!seen.insert(s.id).second) return false;
    return true;
}

}  // namespace dar::oracle
