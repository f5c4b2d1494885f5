#pragma once

#include <cstddef>
#include <vector>

namespace teq {

/// Planar floating point image, channel-major: data[(c*height + y)*width + x].
/// Used for mosaics (1 channel), RGB frames (3 channels) and intermediate maps.
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Image() = default;
    Image(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Image& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

/// 2x box downsample; each dimension must be even.
Image box_downsample2(const Image& img);

/// Nearest-neighbour 2x upsample.
Image upsample_nearest2(const Image& img);

/// Box downsample by an integer factor (dims must divide evenly).
Image box_downsample(const Image& img, int factor);

/// Per-pixel channel mean.
Image channel_mean(const Image& img);

double max_value(const Image& img);
bool all_finite(const Image& img);

} // namespace teq
