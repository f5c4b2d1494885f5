#pragma once

#include <span>
#include <vector>

#include "teq/exposure.hpp"
#include "teq/image.hpp"
#include "teq/nn/layers.hpp"

namespace teq {

enum class LossMode { kTm, kLdr };

struct LossConfig {
    LossMode mode = LossMode::kLdr;
    double mu = 5000.0;
    double alpha = 0.6;            ///< weight of the low-resolution branch
    double mask_low = 0.05;        ///< well-exposed band on the simulated LDR
    double mask_high = 0.95;
    bool perceptual = false;       ///< enable the frozen-feature distance
    double lambda_p = 0.1;

    void validate() const;
};

/// T(H) = log(1 + mu*H) / log(1 + mu), elementwise on [0,1]-normalized input.
double mu_law_scalar(double h, double mu);
Image mu_law_image(const Image& h, double mu);

/// Unclipped LDR simulation (H*t*g)^(1/2.2); saturation is handled by masking.
Image simulate_ldr_image(const Image& h, double t, double g);

/// Binary mask, 1 where low <= I <= high. Computed on the ground-truth LDR
/// only, so it carries no gradient.
Image well_exposed_mask(const Image& gt_ldr, double low, double high);

/// Stacked per-sample images forming one (N,C,H,W) host-side batch.
struct HostBatch {
    nn::Shape shape;
    std::vector<nn::real> data;
};

HostBatch stack_images(std::span<const Image* const> images);
HostBatch stack_images(const Image& single);

/// Frozen random-feature network backing the perceptual distance. Weights are
/// fixed at construction from a deterministic seed and never trained.
class PerceptualNet {
public:
    explicit PerceptualNet(int in_channels = 3, std::uint64_t seed = 0x7e2c6a1f);

    /// Mean L1 distance between mid-level feature maps of pred and target.
    nn::Var distance(nn::Var pred, std::span<const nn::real> target) const;

private:
    mutable nn::ParamStore params_;
    nn::Conv2d c1_, c2_, c3_, c4_;

    nn::Var features_tap1(nn::Var x) const;
    nn::Var features_tap2(nn::Var x) const;
};

struct LossBreakdown {
    double total = 0.0;
    double l1_hr = 0.0;
    double perc_hr = 0.0;
    double l1_lr = 0.0;
    double perc_lr = 0.0;
};

/// LDR-reconstruction loss: sum over {S,M,L} of masked, count-normalized L1
/// between LDR renderings of prediction and truth (plus the optional
/// perceptual term). Exposures whose mask is empty are skipped.
nn::Var ldr_recon_loss(nn::Var pred, const HostBatch& gt, const ExposureConfig& exposure,
                       const LossConfig& cfg, const PerceptualNet* perceptual,
                       double* l1_out = nullptr, double* perc_out = nullptr);

/// Tone-mapping loss: L1 of mu-law images after shared per-sample peak
/// normalization (normalizer taken from the ground truth).
nn::Var tm_loss(nn::Var pred, const HostBatch& gt, const LossConfig& cfg,
                const PerceptualNet* perceptual, double* l1_out = nullptr,
                double* perc_out = nullptr);

/// Total training objective: branch(hr) + alpha * branch(lr), branch chosen
/// by cfg.mode. gt_lr must be the 2x box-downsampled gt_hr.
nn::Var total_loss(nn::Var h_hr, nn::Var h_lr, const HostBatch& gt_hr,
                   const HostBatch& gt_lr, const ExposureConfig& exposure,
                   const LossConfig& cfg, const PerceptualNet* perceptual,
                   LossBreakdown* breakdown = nullptr);

} // namespace teq
