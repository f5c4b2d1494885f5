#include "teq/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teq {

namespace {

// Mirror about the edge pixel (-1 -> 1, n -> n-2); preserves bayer parity.
inline int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * (n - 1) - i;
    return i;
}

} // namespace

Image demosaic_bilinear(const Image& bayer) {
    if (bayer.channels != 1)
        throw std::invalid_argument("demosaic: input must be single channel");
    if (bayer.height % 2 != 0 || bayer.width % 2 != 0)
        throw std::invalid_argument("demosaic: dimensions must be even");

    const int h = bayer.height, w = bayer.width;
    Image out(3, h, w);
    auto v = [&](int y, int x) { return bayer.at(0, reflect(y, h), reflect(x, w)); };
    auto cross = [&](int y, int x) {
        return 0.25 * (v(y - 1, x) + v(y + 1, x) + v(y, x - 1) + v(y, x + 1));
    };
    auto diag = [&](int y, int x) {
        return 0.25 * (v(y - 1, x - 1) + v(y - 1, x + 1) + v(y + 1, x - 1) + v(y + 1, x + 1));
    };
    auto horiz = [&](int y, int x) { return 0.5 * (v(y, x - 1) + v(y, x + 1)); };
    auto vert = [&](int y, int x) { return 0.5 * (v(y - 1, x) + v(y + 1, x)); };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool even_y = (y % 2 == 0), even_x = (x % 2 == 0);
            double r, g, b;
            if (even_y && even_x) { // R site
                r = v(y, x);
                g = cross(y, x);
                b = diag(y, x);
            } else if (even_y && !even_x) { // G site on R row
                r = horiz(y, x);
                g = v(y, x);
                b = vert(y, x);
            } else if (!even_y && even_x) { // G site on B row
                r = vert(y, x);
                g = v(y, x);
                b = horiz(y, x);
            } else { // B site
                r = diag(y, x);
                g = cross(y, x);
                b = v(y, x);
            }
            out.at(0, y, x) = r;
            out.at(1, y, x) = g;
            out.at(2, y, x) = b;
        }
    return out;
}

Image merge_hdr_trapezoid(const Image& rgb_s, const Image& rgb_m, const Image& rgb_l,
                          const ExposureConfig& cfg, double t_low, double t_high) {
    if (!rgb_s.same_shape(rgb_m) || !rgb_s.same_shape(rgb_l))
        throw std::invalid_argument("merge: exposure images must share a shape");

    const Image* imgs[3] = {&rgb_s, &rgb_m, &rgb_l};
    double tg[3];
    for (Exposure e : kExposures) tg[exposure_index(e)] = cfg.exposure_gain(e);

    Image out(rgb_s.channels, rgb_s.height, rgb_s.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        double wsum = 0.0, acc = 0.0;
        double intensity[3];
        for (int k = 0; k < 3; ++k) {
            intensity[k] = imgs[k]->data[i];
            const double wk = trapezoid_weight(intensity[k], t_low, t_high);
            wsum += wk;
            acc += wk * linearize(intensity[k]) / tg[k];
        }
        if (wsum > 0.0) {
            out.data[i] = acc / wsum;
            continue;
        }
        // All weights zero: take the least-clipped exposure. Ties go to the
        // shortest exposure when saturated, the longest when under-exposed.
        double best_d = 1e300;
        int best = 0;
        for (int k = 0; k < 3; ++k) {
            const double d = std::max(t_low - intensity[k], 0.0) +
                             std::max(intensity[k] - t_high, 0.0);
            if (d < best_d - 1e-15) {
                best_d = d;
                best = k;
            } else if (std::abs(d - best_d) <= 1e-15) {
                const bool saturated = intensity[k] >= t_high;
                if ((saturated && tg[k] < tg[best]) || (!saturated && tg[k] > tg[best]))
                    best = k;
            }
        }
        out.data[i] = linearize(intensity[best]) / tg[best];
    }
    return out;
}

Image naive_reconstruct(const TeqRawFrame& raw) {
    SubExposures subs = extract_sub_exposures(raw);
    Image rgb_s = demosaic_bilinear(subs.s);
    Image rgb_m = demosaic_bilinear(subs.m);
    Image rgb_l = demosaic_bilinear(subs.l);
    return merge_hdr_trapezoid(rgb_s, rgb_m, rgb_l, raw.config);
}

} // namespace teq
