#include "teq/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "teq/loss.hpp"

namespace teq {

namespace {

double mse_to_db(double mse) {
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

} // namespace

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return mse_to_db(acc / static_cast<double>(a.data.size()));
}

double psnr_mu(const Image& pred, const Image& gt, double mu) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("psnr_mu: shape mismatch");
    double peak = max_value(gt);
    if (peak <= 0.0) peak = 1.0;
    const double inv_log = 1.0 / std::log1p(mu);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double a = std::log1p(mu * pred.data[i] / peak) * inv_log;
        const double b = std::log1p(mu * gt.data[i] / peak) * inv_log;
        acc += (a - b) * (a - b);
    }
    return mse_to_db(acc / static_cast<double>(pred.data.size()));
}

double psnr_mu_masked(const Image& pred, const Image& gt, const Image& mask, double mu) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("psnr_mu: shape mismatch");
    if (mask.channels != 1 || mask.height != gt.height || mask.width != gt.width)
        throw std::invalid_argument("psnr_mu: mask must be (1,H,W)");
    double peak = max_value(gt);
    if (peak <= 0.0) peak = 1.0;
    const double inv_log = 1.0 / std::log1p(mu);
    double acc = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < gt.channels; ++c)
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x) {
                if (mask.at(0, y, x) <= 0.5) continue;
                const double a = std::log1p(mu * pred.at(c, y, x) / peak) * inv_log;
                const double b = std::log1p(mu * gt.at(c, y, x) / peak) * inv_log;
                acc += (a - b) * (a - b);
                ++count;
            }
    if (count == 0) throw std::invalid_argument("psnr_mu: empty mask");
    return mse_to_db(acc / static_cast<double>(count));
}

} // namespace teq
