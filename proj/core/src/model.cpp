#include "teq/model.hpp"

#include <stdexcept>

#include "json_io.hpp"

namespace teq {

using nn::Var;

std::string variant_name(Variant v) {
    switch (v) {
    case Variant::kBaseline: return "BASELINE";
    case Variant::kAtt: return "ATT";
    case Variant::kNsr: return "NSR";
    case Variant::kGsrSsr: return "GSR_SSR";
    case Variant::kGsrOr: return "GSR_OR";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "BASELINE") return Variant::kBaseline;
    if (name == "ATT") return Variant::kAtt;
    if (name == "NSR") return Variant::kNsr;
    if (name == "GSR_SSR") return Variant::kGsrSsr;
    if (name == "GSR_OR") return Variant::kGsrOr;
    throw std::invalid_argument("unknown variant: " + name);
}

ModelConfig ModelConfig::preset(Variant v, FrameMode f, int width) {
    ModelConfig c;
    c.variant = v;
    c.frames = f;
    c.base_width = width;
    switch (v) {
    case Variant::kBaseline:
        c.weight_estimation = false;
        c.attention = false;
        c.super_resolution = false;
        c.gate = false;
        break;
    case Variant::kAtt:
        c.super_resolution = false;
        c.gate = false;
        break;
    case Variant::kNsr:
        c.gate = false;
        c.sr_input = SrInput::kSubsampledStack;
        break;
    case Variant::kGsrSsr:
        c.sr_input = SrInput::kSubsampledStack;
        break;
    case Variant::kGsrOr:
        c.sr_input = SrInput::kOriginalRaw;
        break;
    }
    return c;
}

void ModelConfig::validate() const {
    if (base_width < 4 || base_width % 4 != 0)
        throw std::invalid_argument("model: base width must be a positive multiple of 4");
    if (drdb_blocks < 1 || drdb_growth < 1 || drdb_dilation < 1 || sr_resblocks < 1 ||
        hr_resblocks < 1)
        throw std::invalid_argument("model: block counts must be >= 1");
    ModelConfig ref = preset(variant, frames, base_width);
    if (weight_estimation != ref.weight_estimation || attention != ref.attention ||
        super_resolution != ref.super_resolution || gate != ref.gate)
        throw std::invalid_argument("model: flags inconsistent with variant " +
                                    variant_name(variant));
    if (super_resolution && variant != Variant::kGsrOr && sr_input != ref.sr_input)
        throw std::invalid_argument("model: SR input inconsistent with variant");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["variant"] = variant_name(variant);
    j["frames"] = frames == FrameMode::kMulti ? "multi" : "single";
    j["base_width"] = base_width;
    j["drdb_blocks"] = drdb_blocks;
    j["drdb_growth"] = drdb_growth;
    j["drdb_dilation"] = drdb_dilation;
    j["sr_resblocks"] = sr_resblocks;
    j["hr_resblocks"] = hr_resblocks;
    j["sr_input"] = sr_input == SrInput::kOriginalRaw ? "original-raw" : "subsampled-stack";
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Variant v = variant_from_name(j.value("variant", std::string("GSR_OR")));
    FrameMode f = j.value("frames", std::string("multi")) == "single" ? FrameMode::kSingle
                                                                      : FrameMode::kMulti;
    ModelConfig c = preset(v, f, j.value("base_width", 64));
    c.drdb_blocks = j.value("drdb_blocks", c.drdb_blocks);
    c.drdb_growth = j.value("drdb_growth", c.drdb_growth);
    c.drdb_dilation = j.value("drdb_dilation", c.drdb_dilation);
    c.sr_resblocks = j.value("sr_resblocks", c.sr_resblocks);
    c.hr_resblocks = j.value("hr_resblocks", c.hr_resblocks);
    if (v == Variant::kGsrOr && j.contains("sr_input"))
        c.sr_input = j["sr_input"] == "subsampled-stack" ? SrInput::kSubsampledStack
                                                         : SrInput::kOriginalRaw;
    c.validate();
    return c;
}

FrameInputs make_frame_inputs(const TeqRawFrame& raw) {
    raw.validate();
    SubExposures subs = extract_sub_exposures(raw);
    const int h = subs.s.height, w = subs.s.width;

    FrameInputs in;
    // Each exposure enters as [gamma mosaic, exposure-normalized linear mosaic].
    for (Exposure e : kExposures) {
        const Image& mosaic = subs.get(e);
        Image planes(2, h, w);
        const double tg = raw.config.exposure_gain(e);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = mosaic.at(0, y, x);
                planes.at(0, y, x) = v;
                planes.at(1, y, x) = linearize(v) / tg;
            }
        in.exposure_planes[exposure_index(e)] = std::move(planes);
    }

    Image weights(4, h, w);
    for (Exposure e : kExposures) {
        const Image& mosaic = subs.get(e);
        const int c = exposure_index(e);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                weights.at(c, y, x) = trapezoid_weight(mosaic.at(0, y, x));
    }
    Image flow = bounded_flow_map(subs.s, subs.l, raw.config);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) weights.at(3, y, x) = flow.at(0, y, x);
    in.weight_planes = std::move(weights);

    in.raw_plane = raw.mosaic;

    // 12-channel (color, exposure) stack at half resolution: each quarter-res
    // color plane repeated per 2x2 block.
    Image stack(12, h, w);
    for (Exposure e : kExposures) {
        const Image& mosaic = subs.get(e);
        for (int py = 0; py < 2; ++py)
            for (int px = 0; px < 2; ++px) {
                const int c = exposure_index(e) * 4 + py * 2 + px;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        stack.at(c, y, x) = mosaic.at(0, (y & ~1) + py, (x & ~1) + px);
            }
    }
    in.ssr_stack = std::move(stack);
    return in;
}

namespace {

constexpr int kExposureInputChannels = 2;
constexpr int kWeightInputChannels = 4;
constexpr int kSsrChannels = 12;

/// Stacks one plane type from every sample of the batch into (N,C,H,W).
Var stack_batch(nn::Tape& tape, std::span<const std::array<const FrameInputs*, 3>> batch,
                int frame, const Image FrameInputs::* plane) {
    const Image& first = (*batch[0][frame]).*plane;
    nn::Shape shape{static_cast<int>(batch.size()), first.channels, first.height,
                    first.width};
    if (tape.count_only()) return tape.constant_fill(shape, 0.0);
    std::vector<nn::real> data;
    data.reserve(shape.elems());
    for (const auto& sample : batch) {
        const Image& img = (*sample[frame]).*plane;
        if (img.channels != first.channels || img.height != first.height ||
            img.width != first.width)
            throw std::invalid_argument("forward: batch samples must share dimensions");
        data.insert(data.end(), img.data.begin(), img.data.end());
    }
    return tape.constant(shape, data);
}

Var stack_batch_exposure(nn::Tape& tape,
                         std::span<const std::array<const FrameInputs*, 3>> batch,
                         int frame, int exposure) {
    const Image& first = (*batch[0][frame]).exposure_planes[exposure];
    nn::Shape shape{static_cast<int>(batch.size()), first.channels, first.height,
                    first.width};
    if (tape.count_only()) return tape.constant_fill(shape, 0.0);
    std::vector<nn::real> data;
    data.reserve(shape.elems());
    for (const auto& sample : batch) {
        const Image& img = (*sample[frame]).exposure_planes[exposure];
        data.insert(data.end(), img.data.begin(), img.data.end());
    }
    return tape.constant(shape, data);
}

/// Quarter-resolution raw (4x4 box mean), used as the gate's intensity cue.
Var stack_batch_raw_quarter(nn::Tape& tape,
                            std::span<const std::array<const FrameInputs*, 3>> batch,
                            int frame) {
    const Image& first = (*batch[0][frame]).raw_plane;
    nn::Shape shape{static_cast<int>(batch.size()), 1, first.height / 4, first.width / 4};
    if (tape.count_only()) return tape.constant_fill(shape, 0.0);
    std::vector<nn::real> data;
    data.reserve(shape.elems());
    for (const auto& sample : batch) {
        Image q = box_downsample((*sample[frame]).raw_plane, 4);
        data.insert(data.end(), q.data.begin(), q.data.end());
    }
    return tape.constant(shape, data);
}

} // namespace

TeqNetwork::TeqNetwork(ModelConfig cfg) : config_(cfg) {
    cfg.validate();
    const int c = cfg.base_width;

    if (cfg.weight_estimation) {
        const char* names[3] = {"fusion.feat_s", "fusion.feat_m", "fusion.feat_l"};
        for (int e = 0; e < 3; ++e) {
            feat1_[e] = nn::Conv2d(params_, std::string(names[e]) + ".conv1",
                                   kExposureInputChannels, c);
            feat2_[e] = nn::Conv2d(params_, std::string(names[e]) + ".conv2", c, c);
        }
        wconv1_ = nn::Conv2d(params_, "fusion.weight.conv1", kWeightInputChannels, c);
        wconv2_ = nn::Conv2d(params_, "fusion.weight.conv2", c, 3);
    } else {
        direct1_ = nn::Conv2d(params_, "fusion.direct.conv1", 3 * kExposureInputChannels, c);
        direct2_ = nn::Conv2d(params_, "fusion.direct.conv2", c, c);
    }

    ext1_ = nn::Conv2d(params_, "denoise.extract.conv1", c, c);
    ext2_ = nn::Conv2d(params_, "denoise.extract.conv2", c, c);
    if (cfg.attention) {
        att1_ = nn::Conv2d(params_, "denoise.attention.conv1", 2 * c, c);
        att2_ = nn::Conv2d(params_, "denoise.attention.conv2", c, c);
    }
    fuse_in_ = nn::Conv2d(params_, "denoise.fuse_in", 3 * c, c);
    for (int i = 0; i < cfg.drdb_blocks; ++i)
        drdbs_.emplace_back(params_, "denoise.drdb" + std::to_string(i), c,
                            cfg.drdb_growth, 3, cfg.drdb_dilation);
    post_drdb_ = nn::Conv2d(params_, "denoise.post", c, c);
    out1_ = nn::Conv2d(params_, "denoise.out1", c, c);
    out2_ = nn::Conv2d(params_, "denoise.out2", c, c);

    lr1_ = nn::Conv2d(params_, "lr_recon.conv1", c, c);
    lr2_ = nn::Conv2d(params_, "lr_recon.conv2", c, c);
    lr3_ = nn::Conv2d(params_, "lr_recon.conv3", c, 3);

    if (cfg.super_resolution) {
        if (cfg.sr_input == SrInput::kOriginalRaw) {
            sr_down1_ = nn::Conv2d(params_, "sr.down1", 1, c, 3, 2);
            sr_down2_ = nn::Conv2d(params_, "sr.down2", c, c, 3, 2);
        } else {
            sr_down1_ = nn::Conv2d(params_, "sr.down1", kSsrChannels, c, 3, 2);
        }
        for (int i = 0; i < cfg.sr_resblocks; ++i)
            sr_blocks_.emplace_back(params_, "sr.block" + std::to_string(i), c);
        dn_down_ = nn::Conv2d(params_, "sr.dn_down", c, c, 3, 2);
        if (cfg.gate) {
            gate1_ = nn::Conv2d(params_, "gate.conv1", 2 * c + 1, c);
            gate2_ = nn::Conv2d(params_, "gate.conv2", c, c);
        }
        for (int i = 0; i < cfg.hr_resblocks; ++i)
            hr_blocks_.emplace_back(params_, "hr_recon.block" + std::to_string(i), c);
        hr_pre_ = nn::Conv2d(params_, "hr_recon.pre_shuffle", c, 4 * c);
        hr_mid_ = nn::Conv2d(params_, "hr_recon.mid_shuffle", c, 4 * c);
        hr_post_ = nn::Conv2d(params_, "hr_recon.post_shuffle", c, c);
        hr_out_ = nn::Conv2d(params_, "hr_recon.out", c, 3);
    }
}

Var TeqNetwork::fuse_frame(nn::Tape& tape, const std::array<Var, 3>& exposure_in,
                           Var weight_in, Var direct_in, const ForwardOverrides* overrides,
                           bool is_reference, ForwardTrace* trace) const {
    if (!config_.weight_estimation) {
        return direct2_(relu(direct1_(direct_in)));
    }
    std::array<Var, 3> feats;
    for (int e = 0; e < 3; ++e) feats[e] = feat2_[e](relu(feat1_[e](exposure_in[e])));

    Var weights;
    if (overrides && overrides->fusion_weights) {
        const nn::Shape ws{exposure_in[0].shape().n, 3, exposure_in[0].shape().h,
                           exposure_in[0].shape().w};
        std::vector<nn::real> wdata;
        if (!tape.count_only()) {
            wdata.resize(ws.elems());
            const std::size_t plane = static_cast<std::size_t>(ws.h) * ws.w;
            for (int n = 0; n < ws.n; ++n)
                for (int c = 0; c < 3; ++c)
                    std::fill_n(wdata.begin() + (static_cast<std::size_t>(n) * 3 + c) * plane,
                                plane, (*overrides->fusion_weights)[c]);
        }
        weights = tape.count_only() ? tape.constant_fill(ws, 0.0) : tape.constant(ws, wdata);
    } else {
        weights = softmax_channels(wconv2_(relu(wconv1_(weight_in))));
    }

    Var fused;
    for (int e = 0; e < 3; ++e) {
        Var term = mul_broadcast(feats[e], slice_channels(weights, e, 1));
        fused = e == 0 ? term : add(fused, term);
    }
    if (trace && is_reference) {
        trace->ref_features = feats;
        trace->ref_weights = weights;
    }
    return fused;
}

TeqNetwork::Output TeqNetwork::forward(
    nn::Tape& tape, std::span<const std::array<const FrameInputs*, 3>> batch,
    const ForwardOverrides* overrides, ForwardTrace* trace) const {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");

    // Frame selection: single-frame mode sees the reference three times and
    // shares one fused feature across the branches.
    const bool multi = config_.frames == FrameMode::kMulti;

    auto fuse_one = [&](int f, bool is_reference) {
        std::array<Var, 3> exposure_in;
        Var weight_in, direct_in;
        if (config_.weight_estimation) {
            for (int e = 0; e < 3; ++e)
                exposure_in[e] = stack_batch_exposure(tape, batch, f, e);
            weight_in = stack_batch(tape, batch, f, &FrameInputs::weight_planes);
        } else {
            std::array<Var, 3> planes;
            for (int e = 0; e < 3; ++e) planes[e] = stack_batch_exposure(tape, batch, f, e);
            direct_in = concat_channels(planes);
        }
        return fuse_frame(tape, exposure_in, weight_in, direct_in, overrides, is_reference,
                          trace);
    };

    std::array<Var, 3> fused;
    if (multi) {
        for (int j = 0; j < 3; ++j) fused[j] = fuse_one(j, j == 1);
    } else {
        Var f = fuse_one(1, true);
        fused = {f, f, f};
    }
    if (trace) trace->fused = fused;

    // Attention-based temporal denoising.
    std::array<Var, 3> refined;
    if (multi) {
        for (int j = 0; j < 3; ++j) refined[j] = ext2_(relu(ext1_(fused[j])));
    } else {
        Var r = ext2_(relu(ext1_(fused[1])));
        refined = {r, r, r};
    }
    if (trace) trace->refined = refined;

    std::array<Var, 2> attended; // Z_1, Z_3
    for (int k = 0; k < 2; ++k) {
        const int j = k == 0 ? 0 : 2;
        Var z;
        if (config_.attention) {
            Var a;
            if (overrides && overrides->attention_value) {
                a = tape.constant_fill(refined[j].shape(), *overrides->attention_value);
            } else {
                std::array<Var, 2> pair = {fused[j], fused[1]};
                a = sigmoid(att2_(relu(att1_(concat_channels(pair)))));
            }
            if (trace) trace->attention[k] = a;
            z = mul(a, refined[j]);
        } else {
            z = refined[j];
        }
        attended[k] = z;
    }
    if (trace) trace->attended = attended;

    std::array<Var, 3> stack = {attended[0], refined[1], attended[1]};
    Var y = relu(fuse_in_(concat_channels(stack)));
    for (const nn::Drdb& block : drdbs_) y = block(y);
    y = post_drdb_(y);
    y = add(y, refined[1]); // skip connection from the refined reference
    Var phi_dn = out2_(relu(out1_(y)));
    if (trace) trace->phi_dn = phi_dn;

    // Low-resolution reconstructor (half the raw resolution).
    Var h_lr = softplus(lr3_(relu(lr2_(relu(lr1_(phi_dn))))));

    if (!config_.super_resolution) {
        Var h_hr = upsample_nearest2_op(h_lr);
        return {h_hr, h_lr};
    }

    // Super-resolution feature from the reference frame.
    Var phi_sr;
    if (config_.sr_input == SrInput::kOriginalRaw) {
        Var raw = stack_batch(tape, batch, 1, &FrameInputs::raw_plane);
        phi_sr = sr_down2_(relu(sr_down1_(raw)));
    } else {
        Var ssr = stack_batch(tape, batch, 1, &FrameInputs::ssr_stack);
        phi_sr = sr_down1_(ssr);
    }
    for (const nn::ResBlock& block : sr_blocks_) phi_sr = block(phi_sr);
    if (trace) trace->phi_sr = phi_sr;

    Var dn_q = dn_down_(phi_dn);
    if (trace) trace->phi_dn_down = dn_q;

    Var phi_f;
    if (config_.gate) {
        Var g;
        if (overrides && overrides->gate_value) {
            g = tape.constant_fill(dn_q.shape(), *overrides->gate_value);
        } else {
            Var raw_q = stack_batch_raw_quarter(tape, batch, 1);
            std::array<Var, 3> gin = {phi_sr, dn_q, raw_q};
            g = sigmoid(gate2_(relu(gate1_(concat_channels(gin)))));
        }
        if (trace) trace->gate = g;
        phi_f = add(mul(g, dn_q), phi_sr);
    } else {
        phi_f = add(dn_q, phi_sr);
    }
    if (trace) trace->phi_f = phi_f;

    // High-resolution reconstructor: quarter -> half -> full.
    Var h = phi_f;
    for (const nn::ResBlock& block : hr_blocks_) h = block(h);
    h = pixel_shuffle2(hr_pre_(h));
    h = pixel_shuffle2(hr_mid_(h));
    h = relu(hr_post_(h));
    Var h_hr = softplus(hr_out_(h));
    return {h_hr, h_lr};
}

TeqNetwork::Output TeqNetwork::forward_one(nn::Tape& tape, const FrameInputs& prev,
                                           const FrameInputs& ref, const FrameInputs& next,
                                           const ForwardOverrides* overrides,
                                           ForwardTrace* trace) const {
    std::array<const FrameInputs*, 3> sample = {&prev, &ref, &next};
    return forward(tape, std::span(&sample, 1), overrides, trace);
}

TeqNetwork::Complexity TeqNetwork::complexity(int height, int width) const {
    if (height % 4 != 0 || width % 4 != 0)
        throw std::invalid_argument("complexity: dimensions must be multiples of 4");
    nn::Tape tape(true);

    // Shape-only stand-in inputs.
    FrameInputs dummy;
    const int h2 = height / 2, w2 = width / 2;
    for (auto& p : dummy.exposure_planes) p = Image(kExposureInputChannels, h2, w2);
    dummy.weight_planes = Image(kWeightInputChannels, h2, w2);
    dummy.raw_plane = Image(1, height, width);
    dummy.ssr_stack = Image(kSsrChannels, h2, w2);

    std::array<const FrameInputs*, 3> sample = {&dummy, &dummy, &dummy};
    forward(tape, std::span(&sample, 1));

    Complexity c;
    c.params = static_cast<std::int64_t>(params_.total_size());
    c.macs = tape.macs();
    return c;
}

} // namespace teq
