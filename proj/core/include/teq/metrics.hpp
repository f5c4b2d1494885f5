#pragma once

#include "teq/image.hpp"

namespace teq {

/// PSNR with peak signal 1; returns +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// PSNR of mu-law tone-mapped images after shared peak normalization (the
/// normalizer is the ground-truth peak).
double psnr_mu(const Image& pred, const Image& gt, double mu = 5000.0);

/// psnr_mu restricted to pixels where mask (1 channel) is nonzero; the mask
/// applies to every channel of the pixel.
double psnr_mu_masked(const Image& pred, const Image& gt, const Image& mask,
                      double mu = 5000.0);

} // namespace teq
