#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "teq/image.hpp"
#include "teq/sensor_model.hpp"

namespace teq {

/// JSON sidecar written next to every simulated raw.
struct RawSidecar {
    TeqLayout layout = TeqLayout::standard();
    ExposureConfig exposure;
    std::array<int, 3> blur_frames = {1, 2, 4}; ///< K_S, K_M, K_L
    int bit_depth = 10;
    std::uint64_t seed = 0;
    int frame_index = 0;
    double radiance_scale = 1.0;

    std::string to_json() const;
    static RawSidecar from_json(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static RawSidecar load(const std::filesystem::path& path);
};

/// One training sample: three consecutive raws plus the center ground truth.
struct TripletRecord {
    std::string scene;
    int center_frame = 0;
    std::array<std::string, 3> raws;     ///< paths relative to the manifest
    std::array<std::string, 3> sidecars;
    std::string ground_truth;
};

struct Manifest {
    std::vector<TripletRecord> triplets;

    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);

    /// Directory the relative paths are resolved against (set on load/save).
    std::filesystem::path base_dir;
};

/// A loaded triplet, ready for reconstruction or training.
struct Triplet {
    std::array<TeqRawFrame, 3> raws;
    Image ground_truth; ///< full raw resolution, 3 channels, linear radiance
    std::string scene;
    int center_frame = 0;
};

Triplet load_triplet(const Manifest& manifest, const TripletRecord& record);

/// Patch anchors along one dimension: {0, stride, 2*stride, ...} plus a final
/// anchor flush to the edge; duplicates removed. Throws if patch > extent.
std::vector<int> patch_anchors(int extent, int patch, int stride);

/// Aligned patch coordinates over a full frame; anchors are in raw (full-res)
/// pixels and guaranteed to be multiples of 4.
struct PatchCoord {
    int y = 0;
    int x = 0;
};

std::vector<PatchCoord> extract_patch_coords(int height, int width, int patch, int stride);

/// Copies a window out of an image (any channel count).
Image crop(const Image& img, int y0, int x0, int h, int w);

} // namespace teq
