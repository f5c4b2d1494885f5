#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "teq/dataset.hpp"
#include "teq/exposure.hpp"
#include "teq/image.hpp"
#include "teq/sensor_model.hpp"

namespace teq {

/// Controls raw simulation from HDR footage.
struct SimulationConfig {
    ExposureConfig exposure;
    TeqLayout layout = TeqLayout::standard();
    double sigma_min = 4e-3;  ///< short-exposure noise std-dev sampling range
    double sigma_max = 1.6e-2;
    std::optional<double> sigma_s; ///< fixed sigma_S; overrides range sampling
    std::array<int, 3> blur_frames = {1, 2, 4}; ///< K_S <= K_M <= K_L
    int bit_depth = 10;
    std::uint64_t seed = 0;
    /// Radiance scale applied to the footage before rendering; when unset it
    /// is derived from the footage so that mid-gray (log-average luminance)
    /// lands at the radiance the M exposure renders to 0.5.
    std::optional<double> radiance_scale;

    std::string to_json() const;
    static SimulationConfig from_json(const std::string& text);
    static SimulationConfig load(const std::filesystem::path& path);

    void validate() const;

    int blur(Exposure e) const { return blur_frames[exposure_index(e)]; }
};

/// Simulated LDR exposure of an HDR frame: quantize(clip((H*t*g)^(1/2.2))).
/// Quantization rounds to the nearest of 2^bit_depth levels.
Image render_ldr(const Image& hdr, double t, double g, int bit_depth);

double quantize_intensity(double v, int bit_depth);

/// Adds i.i.d. zero-mean gaussian noise with sigma_S * ratio^{0,1,2} for
/// {S,M,L}, then clips to [0,1]. Deterministic given seed.
Image add_noise(const Image& ldr, Exposure e, double sigma_s, double ratio,
                std::uint64_t seed);

/// Arithmetic mean of k consecutive radiance frames, window centered (floor)
/// on target. Throws if the window does not fit.
Image integrate_motion_blur(std::span<const Image> frames, int target, int k);

/// Radiance scale anchoring the footage's log-average luminance to the value
/// the M exposure maps to mid-gray: 0.5^2.2 / (t_M * g_M).
double radiance_scale_for_midgray(std::span<const Image> frames,
                                  const ExposureConfig& exposure);

struct SimulatedFrame {
    TeqRawFrame raw;
    Image ground_truth; ///< un-blurred, scaled radiance of the target frame
    double radiance_scale = 1.0;
    double sigma_s = 0.0;
};

/// Full per-frame pipeline: per exposure blur-integrate, render, add noise,
/// then scatter into the mosaic following the layout. frames are raw footage
/// radiance (scale applied inside).
SimulatedFrame simulate_teq_frame(std::span<const Image> frames, int target,
                                  const SimulationConfig& cfg, std::uint64_t seed);

/// Simulates every scene under input_dir (one subdirectory of ordered PFM
/// frames per scene, or a flat directory treated as one scene) and writes
/// raws, ground truths, sidecars and a manifest under output_dir.
/// Scenes that fail to read are reported and skipped; throws if none succeed.
Manifest build_dataset(const std::filesystem::path& input_dir,
                       const std::filesystem::path& output_dir,
                       const SimulationConfig& cfg);

} // namespace teq
