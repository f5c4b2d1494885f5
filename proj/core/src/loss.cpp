#include "teq/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace teq {

using nn::Var;

void LossConfig::validate() const {
    if (!(mu > 0.0)) throw std::invalid_argument("loss: mu must be > 0");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("loss: alpha must be in [0,1]");
    if (!(0.0 <= mask_low && mask_low < mask_high && mask_high <= 1.0))
        throw std::invalid_argument("loss: need 0 <= mask_low < mask_high <= 1");
    if (lambda_p < 0.0) throw std::invalid_argument("loss: lambda_p must be >= 0");
}

double mu_law_scalar(double h, double mu) {
    return std::log1p(mu * h) / std::log1p(mu);
}

Image mu_law_image(const Image& h, double mu) {
    Image out(h.channels, h.height, h.width);
    const double inv = 1.0 / std::log1p(mu);
    for (std::size_t i = 0; i < h.data.size(); ++i)
        out.data[i] = std::log1p(mu * h.data[i]) * inv;
    return out;
}

Image simulate_ldr_image(const Image& h, double t, double g) {
    Image out(h.channels, h.height, h.width);
    const double tg = t * g;
    for (std::size_t i = 0; i < h.data.size(); ++i) {
        const double v = h.data[i] * tg;
        out.data[i] = v > 0.0 ? std::pow(v, 1.0 / kGamma) : 0.0;
    }
    return out;
}

Image well_exposed_mask(const Image& gt_ldr, double low, double high) {
    Image out(gt_ldr.channels, gt_ldr.height, gt_ldr.width);
    for (std::size_t i = 0; i < gt_ldr.data.size(); ++i)
        out.data[i] = (gt_ldr.data[i] >= low && gt_ldr.data[i] <= high) ? 1.0 : 0.0;
    return out;
}

HostBatch stack_images(std::span<const Image* const> images) {
    if (images.empty()) throw std::invalid_argument("stack: no images");
    const Image& first = *images[0];
    HostBatch b;
    b.shape = {static_cast<int>(images.size()), first.channels, first.height, first.width};
    b.data.reserve(b.shape.elems());
    for (const Image* img : images) {
        if (!img->same_shape(first))
            throw std::invalid_argument("stack: image shape mismatch");
        b.data.insert(b.data.end(), img->data.begin(), img->data.end());
    }
    return b;
}

HostBatch stack_images(const Image& single) {
    const Image* p = &single;
    return stack_images(std::span<const Image* const>(&p, 1));
}

PerceptualNet::PerceptualNet(int in_channels, std::uint64_t seed)
    : c1_(params_, "perc.conv1", in_channels, 16, 3, 2, 1, false),
      c2_(params_, "perc.conv2", 16, 32, 3, 1, 1, false),
      c3_(params_, "perc.conv3", 32, 32, 3, 2, 1, false),
      c4_(params_, "perc.conv4", 32, 64, 3, 1, 1, false) {
    params_.xavier_init(seed);
}

nn::Var PerceptualNet::features_tap1(Var x) const { return relu(c2_(relu(c1_(x)))); }

nn::Var PerceptualNet::features_tap2(Var x) const {
    return relu(c4_(relu(c3_(features_tap1(x)))));
}

nn::Var PerceptualNet::distance(Var pred, std::span<const nn::real> target) const {
    nn::Tape* tape = pred.tape();
    Var tgt = tape->constant(pred.shape(), target);

    Var p1 = features_tap1(pred);
    Var p2 = features_tap2(pred);
    Var t1 = features_tap1(tgt);
    Var t2 = features_tap2(tgt);

    std::vector<nn::real> ones1(p1.shape().elems(), 1.0);
    Var d1 = masked_l1(p1, t1.value(), ones1);
    std::vector<nn::real> ones2(p2.shape().elems(), 1.0);
    Var d2 = masked_l1(p2, t2.value(), ones2);
    return add(d1, d2);
}

namespace {

/// gt LDR rendering on the host side (matches simulate_ldr_image, batched).
std::vector<nn::real> render_gt_ldr(const HostBatch& gt, double tg) {
    std::vector<nn::real> out(gt.data.size());
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        const double v = gt.data[i] * tg;
        out[i] = v > 0.0 ? std::pow(v, 1.0 / kGamma) : 0.0;
    }
    return out;
}

} // namespace

nn::Var ldr_recon_loss(Var pred, const HostBatch& gt, const ExposureConfig& exposure,
                       const LossConfig& cfg, const PerceptualNet* perceptual,
                       double* l1_out, double* perc_out) {
    cfg.validate();
    if (!(pred.shape() == gt.shape))
        throw std::invalid_argument("ldr_recon_loss: prediction/truth shape mismatch");
    nn::Tape* tape = pred.tape();

    Var acc_l1, acc_perc;
    for (Exposure e : kExposures) {
        const double tg = exposure.exposure_gain(e);
        std::vector<nn::real> gt_ldr = render_gt_ldr(gt, tg);
        std::vector<nn::real> mask(gt_ldr.size());
        double msum = 0.0;
        for (std::size_t i = 0; i < gt_ldr.size(); ++i) {
            mask[i] = (gt_ldr[i] >= cfg.mask_low && gt_ldr[i] <= cfg.mask_high) ? 1.0 : 0.0;
            msum += mask[i];
        }
        if (!(msum > 0.0)) continue; // exposure sees no well-exposed pixel

        Var pred_ldr = pow_const(scale(pred, tg), 1.0 / kGamma);
        Var term = masked_l1(pred_ldr, gt_ldr, mask);
        acc_l1 = acc_l1.valid() ? add(acc_l1, term) : term;

        if (cfg.perceptual && perceptual && cfg.lambda_p > 0.0) {
            Var masked_pred = mul_data(pred_ldr, mask);
            std::vector<nn::real> masked_gt(gt_ldr.size());
            for (std::size_t i = 0; i < gt_ldr.size(); ++i)
                masked_gt[i] = gt_ldr[i] * mask[i];
            Var p = perceptual->distance(masked_pred, masked_gt);
            acc_perc = acc_perc.valid() ? add(acc_perc, p) : p;
        }
    }

    if (!acc_l1.valid()) acc_l1 = tape->constant_fill(nn::Shape{1, 1, 1, 1}, 0.0);
    if (l1_out) *l1_out = acc_l1.scalar();

    if (acc_perc.valid()) {
        if (perc_out) *perc_out = acc_perc.scalar();
        return add(acc_l1, scale(acc_perc, cfg.lambda_p));
    }
    if (perc_out) *perc_out = 0.0;
    return acc_l1;
}

nn::Var tm_loss(Var pred, const HostBatch& gt, const LossConfig& cfg,
                const PerceptualNet* perceptual, double* l1_out, double* perc_out) {
    cfg.validate();
    if (!(pred.shape() == gt.shape))
        throw std::invalid_argument("tm_loss: prediction/truth shape mismatch");

    // Shared per-sample peak normalization from the ground truth.
    const std::size_t per = gt.shape.elems() / gt.shape.n;
    std::vector<nn::real> inv_peak(gt.shape.n, 1.0);
    for (int n = 0; n < gt.shape.n; ++n) {
        double peak = 0.0;
        for (std::size_t i = 0; i < per; ++i) peak = std::max(peak, gt.data[n * per + i]);
        inv_peak[n] = peak > 0.0 ? 1.0 / peak : 1.0;
    }

    std::vector<nn::real> gt_tm(gt.data.size());
    const double inv_log = 1.0 / std::log1p(cfg.mu);
    for (int n = 0; n < gt.shape.n; ++n)
        for (std::size_t i = 0; i < per; ++i)
            gt_tm[n * per + i] = std::log1p(cfg.mu * gt.data[n * per + i] * inv_peak[n]) * inv_log;

    Var pred_tm = mu_law_op(scale_per_sample(pred, inv_peak), cfg.mu);
    std::vector<nn::real> ones(gt.data.size(), 1.0);
    Var l1 = masked_l1(pred_tm, gt_tm, ones);
    if (l1_out) *l1_out = l1.scalar();

    if (cfg.perceptual && perceptual && cfg.lambda_p > 0.0) {
        Var p = perceptual->distance(pred_tm, gt_tm);
        if (perc_out) *perc_out = p.scalar();
        return add(l1, scale(p, cfg.lambda_p));
    }
    if (perc_out) *perc_out = 0.0;
    return l1;
}

nn::Var total_loss(Var h_hr, Var h_lr, const HostBatch& gt_hr, const HostBatch& gt_lr,
                   const ExposureConfig& exposure, const LossConfig& cfg,
                   const PerceptualNet* perceptual, LossBreakdown* breakdown) {
    LossBreakdown bd;
    Var hr_term, lr_term;
    if (cfg.mode == LossMode::kLdr) {
        hr_term = ldr_recon_loss(h_hr, gt_hr, exposure, cfg, perceptual, &bd.l1_hr,
                                 &bd.perc_hr);
        lr_term = ldr_recon_loss(h_lr, gt_lr, exposure, cfg, perceptual, &bd.l1_lr,
                                 &bd.perc_lr);
    } else {
        hr_term = tm_loss(h_hr, gt_hr, cfg, perceptual, &bd.l1_hr, &bd.perc_hr);
        lr_term = tm_loss(h_lr, gt_lr, cfg, perceptual, &bd.l1_lr, &bd.perc_lr);
    }
    Var total = add(hr_term, scale(lr_term, cfg.alpha));
    bd.total = total.scalar();
    if (breakdown) *breakdown = bd;
    return total;
}

} // namespace teq
