#include "teq/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "json_io.hpp"
#include "teq/pfm.hpp"

namespace teq {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace

std::string RawSidecar::to_json() const {
    json j;
    j["layout"] = detail::layout_to_json(layout);
    j["t_s"] = exposure.t_s;
    j["ratio"] = exposure.ratio;
    j["gains"] = {exposure.gain_s, exposure.gain_m, exposure.gain_l};
    j["sigma_s"] = exposure.sigma_s;
    j["blur_frames"] = blur_frames;
    j["bit_depth"] = bit_depth;
    j["seed"] = seed;
    j["frame_index"] = frame_index;
    j["radiance_scale"] = radiance_scale;
    return j.dump(2);
}

RawSidecar RawSidecar::from_json(const std::string& text) {
    json j = json::parse(text);
    RawSidecar s;
    if (j.contains("layout")) s.layout = detail::layout_from_json(j["layout"]);
    s.exposure.t_s = j.at("t_s").get<double>();
    s.exposure.ratio = j.at("ratio").get<double>();
    s.exposure.gain_s = j.at("gains").at(0).get<double>();
    s.exposure.gain_m = j.at("gains").at(1).get<double>();
    s.exposure.gain_l = j.at("gains").at(2).get<double>();
    s.exposure.sigma_s = j.value("sigma_s", 0.0);
    if (j.contains("blur_frames"))
        for (int i = 0; i < 3; ++i) s.blur_frames[i] = j["blur_frames"].at(i).get<int>();
    s.bit_depth = j.value("bit_depth", 10);
    s.seed = j.value("seed", std::uint64_t{0});
    s.frame_index = j.value("frame_index", 0);
    s.radiance_scale = j.value("radiance_scale", 1.0);
    return s;
}

void RawSidecar::save(const std::filesystem::path& path) const {
    write_text(path, to_json());
}

RawSidecar RawSidecar::load(const std::filesystem::path& path) {
    return from_json(read_text(path));
}

void Manifest::save(const std::filesystem::path& path) const {
    json j;
    j["version"] = 1;
    json list = json::array();
    for (const auto& t : triplets) {
        json rec;
        rec["scene"] = t.scene;
        rec["center_frame"] = t.center_frame;
        rec["raws"] = t.raws;
        rec["sidecars"] = t.sidecars;
        rec["ground_truth"] = t.ground_truth;
        list.push_back(std::move(rec));
    }
    j["triplets"] = std::move(list);
    write_text(path, j.dump(2));
}

Manifest Manifest::load(const std::filesystem::path& path) {
    json j = json::parse(read_text(path));
    Manifest m;
    m.base_dir = path.parent_path();
    for (const auto& rec : j.at("triplets")) {
        TripletRecord t;
        t.scene = rec.at("scene").get<std::string>();
        t.center_frame = rec.at("center_frame").get<int>();
        for (int i = 0; i < 3; ++i) {
            t.raws[i] = rec.at("raws").at(i).get<std::string>();
            t.sidecars[i] = rec.at("sidecars").at(i).get<std::string>();
        }
        t.ground_truth = rec.at("ground_truth").get<std::string>();
        m.triplets.push_back(std::move(t));
    }
    return m;
}

Triplet load_triplet(const Manifest& manifest, const TripletRecord& record) {
    Triplet t;
    t.scene = record.scene;
    t.center_frame = record.center_frame;
    for (int i = 0; i < 3; ++i) {
        RawSidecar sc = RawSidecar::load(manifest.base_dir / record.sidecars[i]);
        t.raws[i].mosaic = read_pfm(manifest.base_dir / record.raws[i]);
        t.raws[i].layout = sc.layout;
        t.raws[i].config = sc.exposure;
        t.raws[i].frame_index = sc.frame_index;
        t.raws[i].seed = sc.seed;
        t.raws[i].validate();
    }
    t.ground_truth = read_pfm(manifest.base_dir / record.ground_truth);
    if (t.ground_truth.channels != 3 ||
        t.ground_truth.height != t.raws[1].mosaic.height ||
        t.ground_truth.width != t.raws[1].mosaic.width)
        throw std::runtime_error("triplet: ground truth does not match raw dimensions");
    return t;
}

std::vector<int> patch_anchors(int extent, int patch, int stride) {
    if (patch > extent) throw std::invalid_argument("patch larger than frame");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    std::vector<int> anchors;
    for (int a = 0; a + patch <= extent; a += stride) anchors.push_back(a);
    const int flush = extent - patch;
    if (anchors.empty() || anchors.back() != flush) anchors.push_back(flush);
    return anchors;
}

std::vector<PatchCoord> extract_patch_coords(int height, int width, int patch, int stride) {
    if (patch % 4 != 0 || stride % 4 != 0)
        throw std::invalid_argument("patch and stride must be multiples of 4");
    auto ys = patch_anchors(height, patch, stride);
    auto xs = patch_anchors(width, patch, stride);
    std::vector<PatchCoord> coords;
    coords.reserve(ys.size() * xs.size());
    for (int y : ys)
        for (int x : xs) coords.push_back({y, x});
    return coords;
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
        throw std::invalid_argument("crop: window out of bounds");
    Image out(img.channels, h, w);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

} // namespace teq
