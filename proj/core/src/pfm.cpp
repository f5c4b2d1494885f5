#include "teq/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace teq {

namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM I/O assumes a little-endian host");

std::string next_token(std::istream& in) {
    std::string tok;
    in >> tok;
    if (!in) throw std::runtime_error("pfm: truncated header");
    return tok;
}

} // namespace

Image read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pfm: cannot open " + path.string());

    std::string magic = next_token(in);
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        throw std::runtime_error("pfm: bad magic in " + path.string());

    int width = std::stoi(next_token(in));
    int height = std::stoi(next_token(in));
    double scale = std::stod(next_token(in));
    if (width <= 0 || height <= 0)
        throw std::runtime_error("pfm: bad dimensions in " + path.string());
    if (scale >= 0.0)
        throw std::runtime_error("pfm: big-endian file not supported: " + path.string());
    in.get(); // single whitespace byte after the header

    std::vector<float> row(static_cast<std::size_t>(width) * channels);
    Image img(channels, height, width);
    const double mag = std::abs(scale);
    // PFM scanlines run bottom-to-top.
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("pfm: truncated data in " + path.string());
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(c, y, x) = mag * static_cast<double>(row[x * channels + c]);
    }
    return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("pfm: image must have 1 or 3 channels");
    if (img.empty()) throw std::invalid_argument("pfm: empty image");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pfm: cannot write " + path.string());
    out << (img.channels == 3 ? "PF" : "Pf") << "\n"
        << img.width << " " << img.height << "\n"
        << "-1.0" << "\n";

    std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[x * img.channels + c] = static_cast<float>(img.at(c, y, x));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("pfm: write failed for " + path.string());
}

} // namespace teq
