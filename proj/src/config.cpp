#include "dar/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dar/error.hpp"

namespace dar {

const std::map<std::string, std::string>& config_defaults() {
    static const std::map<std::string, std::string> defaults = {
        {"seed", "0"},
        {"threads", "0"},
        {"hash.vocab_dim", "262144"},
        {"hash.lowercase", "on"},
        {"hash.seed", "0"},
        {"model.hidden", "64"},
        {"model.output", "64"},
        {"model.sim", "dot"},
        {"train.batch_size", "32"},
        {"train.epochs", "25"},
        {"train.lr", "0.001"},
        {"train.shuffle", "on"},
        {"train.hard_negatives", "off"},
        {"train.hard_negatives_per_query", "1"},
        {"train.checkpoint_every", "0"},
        {"train.save_optimizer", "off"},
        {"perturb.n", "3"},
        {"perturb.p", "0.1"},
        {"perturb.rescale", "on"},
        {"mixup.enabled", "on"},
        {"mixup.weight", "1.0"},
        {"mixup.lambda_per", "triple"},
        {"mixup.squash", "on"},
        {"augment.side", "dar"},
        {"retrieve.topk", "100"},
        {"retrieve.retriever", "dense"},
        {"retrieve.split", "eval"},
        {"bm25.k1", "1.2"},
        {"bm25.b", "0.75"},
        {"eval.relevance", "answer"},
        {"eval.depth", "100"},
        {"eval.cap", "100"},
        {"eval.topk", "1,5,20,100"},
        {"eval.recall_k", ""},
        {"ingest.mine_negatives", "0"},
        {"paths.passages", ""},
        {"paths.train", ""},
        {"paths.eval", ""},
        {"paths.cache", ""},
        {"paths.checkpoint", ""},
        {"paths.loss_log", ""},
        {"paths.resume", ""},
        {"paths.debug_dump", ""},
        {"paths.index", ""},
        {"paths.run", ""},
        {"paths.metrics", ""},
        {"paths.embeddings", ""},
    };
    return defaults;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, std::string_view source) {
    RunConfig cfg;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(std::string(source) + ":" + std::to_string(line_no) + ": bad section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
        const auto key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw Error(std::string(source) + ":" + std::to_string(line_no) + ": empty key");
        cfg.set(section.empty() ? key : section + "." + key, unquote(trim(std::string_view(line).substr(eq + 1))));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::string RunConfig::get_string(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    const auto& d = config_defaults();
    if (auto it = d.find(key); it != d.end()) return it->second;
    throw Error("unknown config key '" + key + "'");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& s) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error("config key '" + key + "': cannot parse '" + s + "' as a number");
    return v;
}

}  // namespace

std::int64_t RunConfig::get_int(const std::string& key) const { return parse_number<std::int64_t>(key, get_string(key)); }

std::uint64_t RunConfig::get_uint(const std::string& key) const {
    return parse_number<std::uint64_t>(key, get_string(key));
}

double RunConfig::get_double(const std::string& key) const { return parse_number<double>(key, get_string(key)); }

bool RunConfig::get_bool(const std::string& key) const {
    const auto s = get_string(key);
    if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
    if (s == "off" || s == "false" || s == "no" || s == "0") return false;
    throw Error("config key '" + key + "': expected on or off, got '" + s + "'");
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    std::istringstream in(get_string(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_number<std::size_t>(key, item));
    }
    return out;
}

std::filesystem::path RunConfig::get_path(const std::string& key) const {
    auto s = get_string(key);
    if (s.empty()) throw Error("missing required path '" + key + "'");
    return s;
}

void RunConfig::check_known_keys() const {
    const auto& d = config_defaults();
    for (const auto& [key, value] : values_)
        if (!d.contains(key)) throw Error("unknown config key '" + key + "'");
}

nlohmann::json RunConfig::resolved() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, value] : config_defaults()) {
        if (key == "threads" || key.starts_with("paths.")) continue;
        out[key] = get_string(key);
    }
    return out;
}

}  // namespace dar
