#include <doctest.h>

#include <cmath>

#include "teq/baseline.hpp"
#include "teq/simulator.hpp"
#include "test_util.hpp"

using namespace teq;

namespace {

int reflect101(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

Color rggb_color(int y, int x) {
    const bool ey = y % 2 == 0, ex = x % 2 == 0;
    if (ey && ex) return Color::R;
    if (!ey && !ex) return Color::B;
    return Color::G;
}

/// Independent demosaic oracle: the native sample where the site color
/// matches, otherwise the average of same-color samples in the reflected
/// 3x3 neighbourhood.
double stencil_oracle(const Image& bayer, int c, int y, int x) {
    if (static_cast<int>(rggb_color(y, x)) == c) return bayer.at(0, y, x);
    double acc = 0.0;
    int count = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int yy = reflect101(y + dy, bayer.height);
            const int xx = reflect101(x + dx, bayer.width);
            if (static_cast<int>(rggb_color(y + dy, x + dx)) != c) continue;
            acc += bayer.at(0, yy, xx);
            ++count;
        }
    return acc / count;
}

} // namespace

TEST_CASE("demosaic_bilinear: constant mosaic stays constant") {
    Image out = demosaic_bilinear(Image(1, 6, 6, 0.37));
    CHECK(out.channels == 3);
    for (double v : out.data) CHECK(v == doctest::Approx(0.37));
}

TEST_CASE("demosaic_bilinear: interior samples reproduce a linear ramp") {
    Image bayer(1, 8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) bayer.at(0, y, x) = 0.1 + 0.05 * x;
    Image out = demosaic_bilinear(bayer);
    for (int c = 0; c < 3; ++c)
        for (int y = 2; y < 6; ++y)
            for (int x = 2; x < 6; ++x)
                CHECK(out.at(c, y, x) == doctest::Approx(0.1 + 0.05 * x).epsilon(1e-12));
}

TEST_CASE("demosaic_bilinear: random mosaic matches the stencil oracle") {
    Image bayer = testutil::make_random_image(1, 8, 8, 21);
    Image out = demosaic_bilinear(bayer);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                CHECK(out.at(c, y, x) ==
                      doctest::Approx(stencil_oracle(bayer, c, y, x)).epsilon(1e-12));
}

TEST_CASE("demosaic_bilinear: odd dimensions rejected") {
    CHECK_THROWS_AS(demosaic_bilinear(Image(1, 7, 8)), std::invalid_argument);
    CHECK_THROWS_AS(demosaic_bilinear(Image(1, 8, 7)), std::invalid_argument);
}

TEST_CASE("merge_hdr_trapezoid: single well-exposed exposure wins") {
    ExposureConfig cfg;
    // Weight is exactly zero only at the ramp endpoints.
    Image s(3, 2, 2, 0.0), m(3, 2, 2, 0.5), l(3, 2, 2, 1.0);
    Image out = merge_hdr_trapezoid(s, m, l, cfg);
    const double want = linearize(0.5) / cfg.exposure_gain(Exposure::M);
    for (double v : out.data) CHECK(v == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("merge_hdr_trapezoid: triple clipping falls back to the short exposure") {
    ExposureConfig cfg;
    Image one(3, 2, 2, 1.0);
    Image out = merge_hdr_trapezoid(one, one, one, cfg);
    const double want = linearize(1.0) / cfg.exposure_gain(Exposure::S);
    for (double v : out.data) CHECK(v == doctest::Approx(want).epsilon(1e-12));

    // All under-exposed: the long exposure is the most trustworthy.
    Image zero(3, 2, 2, 0.0);
    Image dark = merge_hdr_trapezoid(zero, zero, zero, cfg);
    for (double v : dark.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("merge_hdr_trapezoid: convex combination of normalized estimates") {
    ExposureConfig cfg;
    Image s = testutil::make_random_image(3, 6, 6, 31, 0.15, 0.85);
    Image m = testutil::make_random_image(3, 6, 6, 32, 0.15, 0.85);
    Image l = testutil::make_random_image(3, 6, 6, 33, 0.15, 0.85);
    Image out = merge_hdr_trapezoid(s, m, l, cfg);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double hs = linearize(s.data[i]) / cfg.exposure_gain(Exposure::S);
        const double hm = linearize(m.data[i]) / cfg.exposure_gain(Exposure::M);
        const double hl = linearize(l.data[i]) / cfg.exposure_gain(Exposure::L);
        const double lo = std::min({hs, hm, hl}) - 1e-12;
        const double hi = std::max({hs, hm, hl}) + 1e-12;
        CHECK(out.data[i] >= lo);
        CHECK(out.data[i] <= hi);
    }
}

TEST_CASE("naive_reconstruct: noiseless static scene within 2% where well-exposed") {
    // ~0.7% luminance change per pixel: gentle enough that the half-pixel
    // offsets between the exposure grids stay below the 2% budget.
    Image hdr = testutil::make_log_ramp_hdr(64, 1088, 0.0012, 3.4);
    std::vector<Image> frames = {hdr};
    SimulationConfig cfg;
    cfg.sigma_s = 0.0;
    cfg.blur_frames = {1, 1, 1};
    cfg.radiance_scale = 1.0;
    SimulatedFrame sim = simulate_teq_frame(frames, 0, cfg, 17);

    Image recon = naive_reconstruct(sim.raw);
    Image gt_half = box_downsample2(sim.ground_truth);
    CHECK(recon.same_shape(gt_half));

    int checked = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 1; y < gt_half.height - 1; ++y)
            for (int x = 1; x < gt_half.width - 1; ++x) {
                const double truth = gt_half.at(c, y, x);
                bool well_exposed = false;
                for (Exposure e : kExposures) {
                    const double intensity =
                        std::pow(truth * cfg.exposure.exposure_gain(e), 1.0 / kGamma);
                    if (intensity >= 0.1 && intensity <= 0.9) well_exposed = true;
                }
                if (!well_exposed) continue;
                CHECK(testutil::rel_err(recon.at(c, y, x), truth) < 0.02);
                ++checked;
            }
    CHECK(checked > 100);
}
