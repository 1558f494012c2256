#include <bit>
#include <cstring>
#include <fstream>

#include "dar/encoder.hpp"
#include "dar/error.hpp"

namespace dar {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'D', 'A', 'R', 'C'};

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw Error(path.string() + ": truncated checkpoint");
    return value;
}

void put_array(std::ostream& out, const std::vector<double>& values) {
    std::vector<float> buf(values.begin(), values.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void get_array(std::istream& in, std::vector<double>& values, const std::filesystem::path& path) {
    std::vector<float> buf(values.size());
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
        throw Error(path.string() + ": truncated checkpoint");
    std::copy(buf.begin(), buf.end(), values.begin());
}

void put_tower(std::ostream& out, const TowerParams& t) {
    put_array(out, t.embedding.data);
    put_array(out, t.projection.data);
    put_array(out, t.bias);
}

void get_tower(std::istream& in, TowerParams& t, const std::filesystem::path& path) {
    get_array(in, t.embedding.data, path);
    get_array(in, t.projection.data, path);
    get_array(in, t.bias, path);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params) {
    // Written to a sibling temp file and renamed so a failed write never
    // leaves a partial checkpoint behind.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + tmp.string());
        out.write(kMagic, 4);
        put<std::uint32_t>(out, kCheckpointVersion);
        put<std::uint32_t>(out, params.dims.vocab);
        put<std::uint32_t>(out, params.dims.hidden);
        put<std::uint32_t>(out, params.dims.output);
        put_tower(out, params.query);
        put_tower(out, params.document);
        put<std::uint64_t>(out, params.hash_seed);
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Error("I/O error writing checkpoint " + path.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot move checkpoint into place at " + path.string());
    }
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error(path.string() + ": not a DARC checkpoint");
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion)
        throw Error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    EncoderParams p;
    p.dims.vocab = get<std::uint32_t>(in, path);
    p.dims.hidden = get<std::uint32_t>(in, path);
    p.dims.output = get<std::uint32_t>(in, path);
    if (p.dims.vocab == 0 || p.dims.hidden == 0 || p.dims.output == 0) throw Error(path.string() + ": zero dimension");
    for (auto* t : {&p.query, &p.document}) {
        *t = {Matrix(p.dims.vocab, p.dims.hidden), Matrix(p.dims.hidden, p.dims.output), DenseVec(p.dims.output)};
        get_tower(in, *t, path);
    }
    p.hash_seed = get<std::uint64_t>(in, path);
    if (in.peek() != std::char_traits<char>::eof()) throw Error(path.string() + ": trailing bytes after checkpoint");
    return p;
}

}  // namespace dar
