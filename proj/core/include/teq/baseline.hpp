#pragma once

#include "teq/image.hpp"
#include "teq/sensor_model.hpp"

namespace teq {

/// Bilinear CFA interpolation of a half-resolution RGGB mosaic. Missing
/// samples are averaged from the nearest same-color neighbours; borders are
/// handled by reflection. Dimensions must be even.
Image demosaic_bilinear(const Image& bayer);

/// Classical trapezoid-weighted radiance merge of the three demosaiced
/// exposures. Weights are evaluated on the gamma-domain intensities; pixels
/// with all-zero weight fall back to the least-clipped exposure.
Image merge_hdr_trapezoid(const Image& rgb_s, const Image& rgb_m, const Image& rgb_l,
                          const ExposureConfig& cfg,
                          double t_low = kTrapezoidLow, double t_high = kTrapezoidHigh);

/// Engineered-interpolation reconstruction: extract sub-exposures, demosaic
/// each, merge. Output is half the raw resolution, linear radiance.
Image naive_reconstruct(const TeqRawFrame& raw);

} // namespace teq
