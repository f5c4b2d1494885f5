#include "teq/sensor_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teq {

void TeqRawFrame::validate() const {
    if (mosaic.channels != 1)
        throw std::invalid_argument("raw: mosaic must be single channel");
    if (mosaic.height % 4 != 0 || mosaic.width % 4 != 0)
        throw std::invalid_argument("raw: dimensions must be multiples of 4");
    config.validate();
}

SubExposures extract_sub_exposures(const TeqRawFrame& raw) {
    raw.validate();
    const Image& mosaic = raw.mosaic;
    const int bh = mosaic.height / 2, bw = mosaic.width / 2;
    SubExposures out{Image(1, bh, bw), Image(1, bh, bw), Image(1, bh, bw)};

    // Walk the layout table per 2x2 color block; the M pair is averaged so
    // every sub-image keeps exactly one sample per block.
    for (int by = 0; by < bh; ++by) {
        for (int bx = 0; bx < bw; ++bx) {
            double m_sum = 0.0;
            int m_count = 0;
            for (int iy = 0; iy < 2; ++iy)
                for (int ix = 0; ix < 2; ++ix) {
                    const int y = by * 2 + iy, x = bx * 2 + ix;
                    const double v = mosaic.at(0, y, x);
                    switch (raw.layout.exposure_at(y, x)) {
                    case Exposure::S: out.s.at(0, by, bx) = v; break;
                    case Exposure::L: out.l.at(0, by, bx) = v; break;
                    case Exposure::M:
                        m_sum += v;
                        ++m_count;
                        break;
                    }
                }
            out.m.at(0, by, bx) = m_sum / m_count;
        }
    }
    return out;
}

double trapezoid_weight(double p, double t_low, double t_high) {
    if (!(0.0 <= t_low && t_low < t_high && t_high <= 1.0))
        throw std::invalid_argument("trapezoid: need 0 <= t_low < t_high <= 1");
    p = std::clamp(p, 0.0, 1.0);
    const double lo = t_low > 0.0 ? p / t_low : 1.0;
    const double hi = t_high < 1.0 ? (1.0 - p) / (1.0 - t_high) : 1.0;
    return std::clamp(std::min(lo, hi), 0.0, 1.0);
}

Image trapezoid_map(const Image& img, double t_low, double t_high) {
    Image out(img.channels, img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = trapezoid_weight(img.data[i], t_low, t_high);
    return out;
}

double bounded_flow_scalar(double norm_s, double norm_l) {
    const double m = std::abs(norm_l - norm_s) / (norm_l + norm_s + kFlowEpsilon);
    return std::clamp(m, 0.0, 1.0);
}

Image bounded_flow_map(const Image& sub_s, const Image& sub_l,
                       const ExposureConfig& cfg) {
    if (!sub_s.same_shape(sub_l))
        throw std::invalid_argument("bounded_flow_map: shape mismatch");
    Image out(sub_s.channels, sub_s.height, sub_s.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double ns = linearize(sub_s.data[i]) / cfg.exposure_gain(Exposure::S);
        const double nl = linearize(sub_l.data[i]) / cfg.exposure_gain(Exposure::L);
        out.data[i] = bounded_flow_scalar(ns, nl);
    }
    return out;
}

} // namespace teq
