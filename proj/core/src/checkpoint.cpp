#include "teq/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace teq {

namespace {

constexpr char kMagic[8] = {'T', 'E', 'Q', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const TeqNetwork& network) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_string(out, network.config().to_json());

    const auto& params = network.params().all();
    write_pod<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        write_string(out, p->name);
        write_pod<std::int32_t>(out, p->shape.n);
        write_pod<std::int32_t>(out, p->shape.c);
        write_pod<std::int32_t>(out, p->shape.h);
        write_pod<std::int32_t>(out, p->shape.w);
        write_pod<std::uint64_t>(out, p->value.size());
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

std::unique_ptr<TeqNetwork> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());

    ModelConfig cfg = ModelConfig::from_json(read_string(in));
    auto network = std::make_unique<TeqNetwork>(cfg);

    const auto count = read_pod<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string name = read_string(in);
        nn::Shape shape;
        shape.n = read_pod<std::int32_t>(in);
        shape.c = read_pod<std::int32_t>(in);
        shape.h = read_pod<std::int32_t>(in);
        shape.w = read_pod<std::int32_t>(in);
        const auto elems = read_pod<std::uint64_t>(in);
        nn::Parameter* p = network->params().find(name);
        if (!p) throw std::runtime_error("checkpoint: unknown parameter " + name);
        if (!(p->shape == shape) || p->value.size() != elems)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(p->value.data()),
                static_cast<std::streamsize>(elems * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated data for " + name);
    }
    return network;
}

} // namespace teq
