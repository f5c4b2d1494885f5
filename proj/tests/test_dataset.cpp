#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "teq/dataset.hpp"
#include "teq/pfm.hpp"
#include "test_util.hpp"

using namespace teq;

TEST_CASE("patch_anchors: regular grid plus flush edge anchor") {
    // Frame equals the patch: single anchor, the flush one coincides.
    CHECK(patch_anchors(256, 256, 120) == std::vector<int>{0});
    // 496-wide frame: {0, 120, 240} and flush 240 coincides with the last.
    CHECK(patch_anchors(496, 256, 120) == std::vector<int>{0, 120, 240});
    // Flush anchor appended when the stride overshoots.
    CHECK(patch_anchors(300, 256, 120) == std::vector<int>{0, 44});
    CHECK_THROWS_AS(patch_anchors(128, 256, 120), std::invalid_argument);
}

TEST_CASE("extract_patch_coords: multiples of 4 and full coverage") {
    auto coords = extract_patch_coords(496, 496, 256, 120);
    CHECK(coords.size() == 9); // 3 x 3 grid
    for (const auto& c : coords) {
        CHECK(c.y % 4 == 0);
        CHECK(c.x % 4 == 0);
    }
    CHECK_THROWS_AS(extract_patch_coords(496, 496, 250, 120), std::invalid_argument);
    CHECK_THROWS_AS(extract_patch_coords(496, 496, 256, 121), std::invalid_argument);
}

TEST_CASE("crop: bounds and content") {
    Image img = testutil::make_random_image(3, 8, 8, 4);
    Image window = crop(img, 2, 4, 4, 4);
    CHECK(window.height == 4);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(window.at(c, y, x) == img.at(c, 2 + y, 4 + x));
    CHECK_THROWS_AS(crop(img, 6, 6, 4, 4), std::invalid_argument);
}

TEST_CASE("pfm: float32 round trip for 1- and 3-channel images") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "teq_pfm_test";
    fs::create_directories(dir);

    for (int channels : {1, 3}) {
        Image img = testutil::make_random_image(channels, 6, 10, 5 + channels, 0.0, 4.0);
        // Narrow to float32 first so the round trip is exact.
        for (double& v : img.data) v = static_cast<float>(v);
        const fs::path path = dir / ("img_" + std::to_string(channels) + ".pfm");
        write_pfm(path, img);
        Image back = read_pfm(path);
        CHECK(back.channels == channels);
        CHECK(back.height == 6);
        CHECK(back.width == 10);
        CHECK(back.data == img.data);
    }

    // Identical content writes identical bytes.
    Image img = testutil::make_random_image(3, 4, 4, 99);
    write_pfm(dir / "a.pfm", img);
    write_pfm(dir / "b.pfm", img);
    std::ifstream fa(dir / "a.pfm", std::ios::binary), fb(dir / "b.pfm", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);

    CHECK_THROWS(read_pfm(dir / "missing.pfm"));
    CHECK_THROWS_AS(write_pfm(dir / "bad.pfm", Image(2, 4, 4)), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("sidecar and manifest JSON round trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "teq_manifest_test";
    fs::create_directories(dir);

    RawSidecar sidecar;
    sidecar.exposure.t_s = 0.125;
    sidecar.exposure.sigma_s = 5e-3;
    sidecar.blur_frames = {1, 3, 5};
    sidecar.bit_depth = 12;
    sidecar.seed = 987654321;
    sidecar.frame_index = 7;
    sidecar.radiance_scale = 2.25;
    sidecar.save(dir / "frame.json");
    RawSidecar back = RawSidecar::load(dir / "frame.json");
    CHECK(back.exposure.t_s == sidecar.exposure.t_s);
    CHECK(back.exposure.sigma_s == sidecar.exposure.sigma_s);
    CHECK(back.blur_frames == sidecar.blur_frames);
    CHECK(back.bit_depth == 12);
    CHECK(back.seed == sidecar.seed);
    CHECK(back.frame_index == 7);
    CHECK(back.radiance_scale == 2.25);
    CHECK(back.layout == TeqLayout::standard());

    Manifest manifest;
    TripletRecord rec;
    rec.scene = "s";
    rec.center_frame = 2;
    rec.raws = {"s/a.pfm", "s/b.pfm", "s/c.pfm"};
    rec.sidecars = {"s/a.json", "s/b.json", "s/c.json"};
    rec.ground_truth = "s/b_gt.pfm";
    manifest.triplets.push_back(rec);
    manifest.save(dir / "manifest.json");
    Manifest loaded = Manifest::load(dir / "manifest.json");
    CHECK(loaded.triplets.size() == 1);
    CHECK(loaded.triplets[0].scene == "s");
    CHECK(loaded.triplets[0].raws[1] == "s/b.pfm");
    CHECK(loaded.base_dir == dir);
    fs::remove_all(dir);
}
