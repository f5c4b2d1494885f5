#pragma once

#include "teq/layout.hpp"

namespace teq {

/// Gamma exponent of the simulated response curve: I = (H*t*g)^(1/kGamma).
constexpr double kGamma = 2.2;

/// Exposure bookkeeping for the three sub-exposures. Adjacent exposure times
/// are one ratio apart: t_M = r*t_S, t_L = r^2*t_S.
struct ExposureConfig {
    double t_s = 0.25;   ///< base (short) exposure time, seconds
    double ratio = 4.0;  ///< ratio between adjacent exposures
    double gain_s = 1.0;
    double gain_m = 1.0;
    double gain_l = 1.0;
    double sigma_s = 0.0; ///< gaussian noise std-dev on the short-exposure LDR

    double exposure_time(Exposure e) const {
        switch (e) {
        case Exposure::S: return t_s;
        case Exposure::M: return t_s * ratio;
        case Exposure::L: return t_s * ratio * ratio;
        }
        return t_s;
    }
    double gain(Exposure e) const {
        switch (e) {
        case Exposure::S: return gain_s;
        case Exposure::M: return gain_m;
        case Exposure::L: return gain_l;
        }
        return gain_s;
    }
    /// t*g product used throughout radiance normalization.
    double exposure_gain(Exposure e) const { return exposure_time(e) * gain(e); }

    /// Noise std-dev per exposure: sigma_S, r*sigma_S, r^2*sigma_S.
    double sigma(Exposure e) const {
        switch (e) {
        case Exposure::S: return sigma_s;
        case Exposure::M: return sigma_s * ratio;
        case Exposure::L: return sigma_s * ratio * ratio;
        }
        return sigma_s;
    }

    /// Throws std::invalid_argument on t_S <= 0, ratio <= 1, gain <= 0 or
    /// sigma_S < 0.
    void validate() const;
};

/// Gamma-domain intensity -> linear: I^2.2.
double linearize(double intensity);

/// Linear radiance estimate normalized by exposure: linearize(I)/(t*g).
double normalized_radiance(double intensity, const ExposureConfig& cfg, Exposure e);

} // namespace teq
