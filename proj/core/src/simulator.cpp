#include "teq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "json_io.hpp"
#include "teq/pfm.hpp"
#include "teq/rng.hpp"

namespace teq {

using nlohmann::json;
using detail::exposure_from_json;
using detail::exposure_to_json;
using detail::layout_from_json;
using detail::layout_to_json;

std::string SimulationConfig::to_json() const {
    json j;
    j["exposure"] = exposure_to_json(exposure);
    j["layout"] = layout_to_json(layout);
    j["sigma_range"] = {sigma_min, sigma_max};
    if (sigma_s) j["sigma_s"] = *sigma_s;
    j["blur_frames"] = blur_frames;
    j["bit_depth"] = bit_depth;
    j["seed"] = seed;
    if (radiance_scale) j["radiance_scale"] = *radiance_scale;
    return j.dump(2);
}

SimulationConfig SimulationConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    SimulationConfig c;
    if (j.contains("exposure")) c.exposure = exposure_from_json(j["exposure"]);
    if (j.contains("layout")) c.layout = layout_from_json(j["layout"]);
    if (j.contains("sigma_range")) {
        c.sigma_min = j["sigma_range"].at(0).get<double>();
        c.sigma_max = j["sigma_range"].at(1).get<double>();
    }
    if (j.contains("sigma_s") && !j["sigma_s"].is_null())
        c.sigma_s = j["sigma_s"].get<double>();
    if (j.contains("blur_frames")) {
        for (int i = 0; i < 3; ++i) c.blur_frames[i] = j["blur_frames"].at(i).get<int>();
    }
    c.bit_depth = j.value("bit_depth", c.bit_depth);
    c.seed = j.value("seed", c.seed);
    if (j.contains("radiance_scale") && !j["radiance_scale"].is_null())
        c.radiance_scale = j["radiance_scale"].get<double>();
    c.validate();
    return c;
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("simulation config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

void SimulationConfig::validate() const {
    exposure.validate();
    if (!(sigma_min > 0.0 && sigma_min <= sigma_max))
        throw std::invalid_argument("simulation: sigma range must be positive and ordered");
    if (sigma_s && *sigma_s < 0.0)
        throw std::invalid_argument("simulation: sigma_S must be >= 0");
    if (!(blur_frames[0] >= 1 && blur_frames[0] <= blur_frames[1] &&
          blur_frames[1] <= blur_frames[2]))
        throw std::invalid_argument("simulation: need 1 <= K_S <= K_M <= K_L");
    if (bit_depth < 8 || bit_depth > 16)
        throw std::invalid_argument("simulation: bit depth must be in [8,16]");
}

double quantize_intensity(double v, int bit_depth) {
    const double levels = static_cast<double>((1u << bit_depth) - 1u);
    return std::round(v * levels) / levels;
}

Image render_ldr(const Image& hdr, double t, double g, int bit_depth) {
    if (!(t > 0.0 && g > 0.0))
        throw std::invalid_argument("render_ldr: t and g must be > 0");
    if (!all_finite(hdr))
        throw std::invalid_argument("render_ldr: non-finite radiance");
    Image out(hdr.channels, hdr.height, hdr.width);
    const double tg = t * g;
    for (std::size_t i = 0; i < hdr.data.size(); ++i) {
        const double v = std::clamp(std::pow(hdr.data[i] * tg, 1.0 / kGamma), 0.0, 1.0);
        out.data[i] = quantize_intensity(v, bit_depth);
    }
    return out;
}

Image add_noise(const Image& ldr, Exposure e, double sigma_s, double ratio,
                std::uint64_t seed) {
    if (sigma_s < 0.0) throw std::invalid_argument("add_noise: sigma_S must be >= 0");
    if (sigma_s == 0.0) return ldr;
    const double sigma = sigma_s * std::pow(ratio, exposure_index(e));
    Rng rng(seed);
    Image out(ldr.channels, ldr.height, ldr.width);
    for (std::size_t i = 0; i < ldr.data.size(); ++i)
        out.data[i] = std::clamp(ldr.data[i] + sigma * rng.normal(), 0.0, 1.0);
    return out;
}

Image integrate_motion_blur(std::span<const Image> frames, int target, int k) {
    if (k < 1) throw std::invalid_argument("motion_blur: K must be >= 1");
    const int start = target - (k - 1) / 2;
    if (start < 0 || start + k > static_cast<int>(frames.size()))
        throw std::invalid_argument("motion_blur: insufficient frames for window");
    Image out = frames[start];
    for (int i = 1; i < k; ++i) {
        const Image& f = frames[start + i];
        if (!f.same_shape(out))
            throw std::invalid_argument("motion_blur: frame shape mismatch");
        for (std::size_t j = 0; j < out.data.size(); ++j) out.data[j] += f.data[j];
    }
    for (double& v : out.data) v /= k;
    return out;
}

double radiance_scale_for_midgray(std::span<const Image> frames,
                                  const ExposureConfig& exposure) {
    // Log-average luminance (channel mean) of the footage as the mid-gray key.
    double log_sum = 0.0;
    std::size_t count = 0;
    for (const Image& f : frames) {
        Image lum = channel_mean(f);
        for (double v : lum.data) log_sum += std::log(v + 1e-6);
        count += lum.data.size();
    }
    if (count == 0) throw std::invalid_argument("radiance_scale: no frames");
    const double key = std::exp(log_sum / static_cast<double>(count));
    const double target = std::pow(0.5, kGamma) / exposure.exposure_gain(Exposure::M);
    return target / key;
}

SimulatedFrame simulate_teq_frame(std::span<const Image> frames, int target,
                                  const SimulationConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (target < 0 || target >= static_cast<int>(frames.size()))
        throw std::invalid_argument("simulate: target index out of range");
    const Image& center = frames[target];
    if (center.channels != 3)
        throw std::invalid_argument("simulate: HDR frames must have 3 channels");
    if (center.height % 4 != 0 || center.width % 4 != 0)
        throw std::invalid_argument("simulate: dimensions must be multiples of 4");
    for (const Image& f : frames)
        if (!all_finite(f)) throw std::invalid_argument("simulate: non-finite radiance");

    const double scale = cfg.radiance_scale
                             ? *cfg.radiance_scale
                             : radiance_scale_for_midgray(frames, cfg.exposure);
    const double sigma_s =
        cfg.sigma_s ? *cfg.sigma_s
                    : Rng(combine_seed(seed, 0x5167)).uniform(cfg.sigma_min, cfg.sigma_max);

    // Scaled footage window.
    std::vector<Image> scaled(frames.begin(), frames.end());
    for (Image& f : scaled)
        for (double& v : f.data) v *= scale;

    // Per-exposure LDR with blur and noise, full resolution RGB.
    std::array<Image, 3> noisy;
    for (Exposure e : kExposures) {
        const int idx = exposure_index(e);
        Image blurred = integrate_motion_blur(scaled, target, cfg.blur(e));
        Image ldr = render_ldr(blurred, cfg.exposure.exposure_time(e),
                               cfg.exposure.gain(e), cfg.bit_depth);
        noisy[idx] = add_noise(ldr, e, sigma_s, cfg.exposure.ratio,
                               combine_seed(seed, static_cast<std::uint64_t>(idx) + 1));
    }

    // Scatter: each physical pixel samples its (color, exposure) plane at its
    // own coordinates, so duplicate M pixels carry independent noise.
    SimulatedFrame out;
    out.raw.mosaic = Image(1, center.height, center.width);
    out.raw.layout = cfg.layout;
    out.raw.config = cfg.exposure;
    out.raw.config.sigma_s = sigma_s;
    out.raw.frame_index = target;
    out.raw.seed = seed;
    for (int y = 0; y < center.height; ++y)
        for (int x = 0; x < center.width; ++x) {
            const auto& cell = cfg.layout.cell(y, x);
            out.raw.mosaic.at(0, y, x) =
                noisy[exposure_index(cell.exposure)].at(static_cast<int>(cell.color), y, x);
        }

    out.ground_truth = scaled[target];
    out.radiance_scale = scale;
    out.sigma_s = sigma_s;
    return out;
}

namespace {

std::vector<std::filesystem::path> sorted_pfms(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pfm")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

Manifest build_dataset(const std::filesystem::path& input_dir,
                       const std::filesystem::path& output_dir,
                       const SimulationConfig& cfg) {
    cfg.validate();
    if (!std::filesystem::is_directory(input_dir))
        throw std::runtime_error("build_dataset: input directory not found: " +
                                 input_dir.string());

    // Scene discovery: subdirectories with PFM frames, else the flat directory.
    std::map<std::string, std::vector<std::filesystem::path>> scenes;
    for (const auto& entry : std::filesystem::directory_iterator(input_dir)) {
        if (entry.is_directory()) {
            auto frames = sorted_pfms(entry.path());
            if (!frames.empty()) scenes[entry.path().filename().string()] = std::move(frames);
        }
    }
    if (scenes.empty()) {
        auto frames = sorted_pfms(input_dir);
        if (!frames.empty()) scenes[input_dir.filename().string()] = std::move(frames);
    }
    if (scenes.empty())
        throw std::runtime_error("build_dataset: no PFM frames under " + input_dir.string());

    std::filesystem::create_directories(output_dir);
    Manifest manifest;
    manifest.base_dir = output_dir;
    int scenes_ok = 0;

    for (const auto& [scene, frame_paths] : scenes) {
        try {
            std::vector<Image> frames;
            frames.reserve(frame_paths.size());
            for (const auto& p : frame_paths) frames.push_back(read_pfm(p));
            const int n = static_cast<int>(frames.size());

            SimulationConfig scene_cfg = cfg;
            if (!scene_cfg.sigma_s) {
                scene_cfg.sigma_s = Rng(derive_seed(cfg.seed, scene, 0x51))
                                        .uniform(cfg.sigma_min, cfg.sigma_max);
            }
            // Blur windows must fit every frame of a triplet; fall back to
            // K = 1 when the sequence is too short for any triplet otherwise.
            const int k_l = scene_cfg.blur_frames[2];
            int lo = (k_l - 1) / 2;
            int hi = n - 1 - k_l / 2;
            if (hi - lo < 2) {
                if (n < 3) throw std::runtime_error("scene has fewer than 3 frames");
                std::cerr << "[simulate] warning: scene '" << scene
                          << "' too short for blur window K=" << k_l
                          << ", falling back to K=1\n";
                scene_cfg.blur_frames = {1, 1, 1};
                lo = 0;
                hi = n - 1;
            }
            if (!scene_cfg.radiance_scale)
                scene_cfg.radiance_scale =
                    radiance_scale_for_midgray(std::span<const Image>(frames), cfg.exposure);

            const auto scene_dir = output_dir / scene;
            std::filesystem::create_directories(scene_dir);

            // Simulate every usable frame once.
            std::map<int, std::pair<std::string, std::string>> raw_files; // frame -> (raw, sidecar)
            for (int i = lo; i <= hi; ++i) {
                const std::uint64_t frame_seed = derive_seed(cfg.seed, scene, i);
                SimulatedFrame sim =
                    simulate_teq_frame(std::span<const Image>(frames), i, scene_cfg, frame_seed);

                char name[64];
                std::snprintf(name, sizeof(name), "frame_%04d", i);
                const std::string raw_rel = scene + "/" + name + "_raw.pfm";
                const std::string gt_rel = scene + "/" + name + "_gt.pfm";
                const std::string sc_rel = scene + "/" + name + "_raw.json";
                write_pfm(output_dir / raw_rel, sim.raw.mosaic);
                write_pfm(output_dir / gt_rel, sim.ground_truth);

                RawSidecar sidecar;
                sidecar.layout = scene_cfg.layout;
                sidecar.exposure = sim.raw.config;
                sidecar.blur_frames = scene_cfg.blur_frames;
                sidecar.bit_depth = scene_cfg.bit_depth;
                sidecar.seed = frame_seed;
                sidecar.frame_index = i;
                sidecar.radiance_scale = sim.radiance_scale;
                sidecar.save(output_dir / sc_rel);

                raw_files[i] = {raw_rel, sc_rel};
            }

            for (int c = lo + 1; c <= hi - 1; ++c) {
                TripletRecord rec;
                rec.scene = scene;
                rec.center_frame = c;
                for (int k = 0; k < 3; ++k) {
                    rec.raws[k] = raw_files.at(c - 1 + k).first;
                    rec.sidecars[k] = raw_files.at(c - 1 + k).second;
                }
                char name[64];
                std::snprintf(name, sizeof(name), "frame_%04d", c);
                rec.ground_truth = scene + "/" + name + "_gt.pfm";
                manifest.triplets.push_back(std::move(rec));
            }
            ++scenes_ok;
        } catch (const std::exception& ex) {
            std::cerr << "[simulate] scene '" << scene << "' failed: " << ex.what() << "\n";
        }
    }

    if (scenes_ok == 0)
        throw std::runtime_error("build_dataset: every scene failed");
    manifest.save(output_dir / "manifest.json");
    return manifest;
}

} // namespace teq
