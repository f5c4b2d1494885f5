#pragma once

#include <filesystem>

#include "teq/image.hpp"

namespace teq {

/// Reads a PFM file ("PF" = 3 channel, "Pf" = 1 channel). Only little-endian
/// files (negative scale) are accepted; |scale| is applied to the samples.
Image read_pfm(const std::filesystem::path& path);

/// Writes little-endian PFM (scale -1.0), bottom-to-top scanline order.
/// Samples are narrowed to float32. Image must have 1 or 3 channels.
void write_pfm(const std::filesystem::path& path, const Image& img);

} // namespace teq
