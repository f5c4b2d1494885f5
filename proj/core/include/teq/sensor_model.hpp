#pragma once

#include <cstdint>

#include "teq/exposure.hpp"
#include "teq/image.hpp"
#include "teq/layout.hpp"

namespace teq {

/// Default trapezoid breakpoints: full confidence on [0.1, 0.9].
constexpr double kTrapezoidLow = 0.1;
constexpr double kTrapezoidHigh = 0.9;

/// Relative-difference guard in the bounded flow map.
constexpr double kFlowEpsilon = 1e-4;

/// One captured tri-exposure quad-bayer frame: a single-channel mosaic in
/// [0,1] plus the layout and exposure metadata needed to interpret it.
struct TeqRawFrame {
    Image mosaic; ///< 1 channel, dimensions multiples of 4
    TeqLayout layout = TeqLayout::standard();
    ExposureConfig config;
    int frame_index = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The three half-resolution RGGB sub-exposure mosaics gathered from a raw.
struct SubExposures {
    Image s, m, l; ///< each (H/2)x(W/2), 1 channel

    const Image& get(Exposure e) const {
        switch (e) {
        case Exposure::S: return s;
        case Exposure::M: return m;
        case Exposure::L: return l;
        }
        return s;
    }
};

/// Gathers the per-exposure bayer mosaics. S and L copy their unique pixel
/// per color block; the two M samples of a block are averaged.
SubExposures extract_sub_exposures(const TeqRawFrame& raw);

/// Piecewise-linear confidence in an intensity: ramps 0->1 on [0, t_low],
/// holds 1 on [t_low, t_high], ramps back to 0 at 1. Input is clamped to [0,1].
double trapezoid_weight(double p, double t_low = kTrapezoidLow,
                        double t_high = kTrapezoidHigh);

/// trapezoid_weight applied elementwise.
Image trapezoid_map(const Image& img, double t_low = kTrapezoidLow,
                    double t_high = kTrapezoidHigh);

/// Clamped relative difference of two exposure-normalized radiance estimates;
/// high values flag motion or saturation mismatch between S and L.
double bounded_flow_scalar(double norm_s, double norm_l);

/// Bounded flow map between the S and L sub-exposure mosaics (gamma domain
/// inputs; normalization by t*g happens inside).
Image bounded_flow_map(const Image& sub_s, const Image& sub_l,
                       const ExposureConfig& cfg);

} // namespace teq
