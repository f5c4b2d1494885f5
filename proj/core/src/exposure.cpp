#include "teq/exposure.hpp"

#include <cmath>
#include <stdexcept>

namespace teq {

void ExposureConfig::validate() const {
    if (!(t_s > 0.0)) throw std::invalid_argument("exposure: t_S must be > 0");
    if (!(ratio > 1.0)) throw std::invalid_argument("exposure: ratio must be > 1");
    if (!(gain_s > 0.0 && gain_m > 0.0 && gain_l > 0.0))
        throw std::invalid_argument("exposure: gains must be > 0");
    if (sigma_s < 0.0) throw std::invalid_argument("exposure: sigma_S must be >= 0");
}

double linearize(double intensity) { return std::pow(intensity, kGamma); }

double normalized_radiance(double intensity, const ExposureConfig& cfg, Exposure e) {
    return linearize(intensity) / cfg.exposure_gain(e);
}

} // namespace teq
