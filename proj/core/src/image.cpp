#include "teq/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teq {

Image box_downsample2(const Image& img) { return box_downsample(img, 2); }

Image box_downsample(const Image& img, int factor) {
    if (factor < 1) throw std::invalid_argument("box_downsample: factor must be >= 1");
    if (factor == 1) return img;
    if (img.height % factor != 0 || img.width % factor != 0)
        throw std::invalid_argument("box_downsample: dimensions must divide by factor");
    Image out(img.channels, img.height / factor, img.width / factor);
    const double inv = 1.0 / (factor * factor);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(c, y * factor + dy, x * factor + dx);
                out.at(c, y, x) = acc * inv;
            }
    return out;
}

Image upsample_nearest2(const Image& img) {
    Image out(img.channels, img.height * 2, img.width * 2);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = img.at(c, y / 2, x / 2);
    return out;
}

Image channel_mean(const Image& img) {
    Image out(1, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int c = 0; c < img.channels; ++c) acc += img.at(c, y, x);
            out.at(0, y, x) = acc / img.channels;
        }
    return out;
}

double max_value(const Image& img) {
    double m = 0.0;
    for (double v : img.data) m = std::max(m, v);
    return m;
}

bool all_finite(const Image& img) {
    return std::all_of(img.data.begin(), img.data.end(),
                       [](double v) { return std::isfinite(v); });
}

} // namespace teq
