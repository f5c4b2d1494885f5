#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "teq/image.hpp"
#include "teq/nn/layers.hpp"
#include "teq/sensor_model.hpp"

namespace teq {

enum class Variant { kBaseline, kAtt, kNsr, kGsrSsr, kGsrOr };
enum class FrameMode { kSingle, kMulti };
enum class SrInput { kSubsampledStack, kOriginalRaw };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/// Architecture switches and channel widths. Presets keep the flags
/// consistent with the named variant; validate() enforces that.
struct ModelConfig {
    Variant variant = Variant::kGsrOr;
    FrameMode frames = FrameMode::kMulti;
    int base_width = 64;
    int drdb_blocks = 3;
    int drdb_growth = 32;
    int drdb_dilation = 2;
    int sr_resblocks = 8;
    int hr_resblocks = 8;
    bool weight_estimation = true; ///< fusion weight branch (off = direct estimation)
    bool attention = true;
    bool super_resolution = true;
    bool gate = true;
    SrInput sr_input = SrInput::kOriginalRaw;

    static ModelConfig preset(Variant v, FrameMode f = FrameMode::kMulti,
                              int width = 64);
    void validate() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

/// Network-facing planes derived from one raw frame by the sensor model.
struct FrameInputs {
    std::array<Image, 3> exposure_planes; ///< per exposure: (2, H/2, W/2)
    Image weight_planes;                  ///< (4, H/2, W/2): 3 trapezoids + flow
    Image raw_plane;                      ///< (1, H, W)
    Image ssr_stack;                      ///< (12, H/2, W/2)
};

FrameInputs make_frame_inputs(const TeqRawFrame& raw);

/// Test hooks that replace learned maps with constants while keeping the
/// downstream algebra intact.
struct ForwardOverrides {
    std::optional<std::array<double, 3>> fusion_weights; ///< w_S, w_M, w_L
    std::optional<double> attention_value;
    std::optional<double> gate_value;
};

/// Intermediate handles populated on demand for inspection in tests.
struct ForwardTrace {
    std::array<nn::Var, 3> ref_features;  ///< f_S, f_M, f_L of the reference frame
    nn::Var ref_weights;                  ///< (N,3,h,w) fusion weights (reference)
    std::array<nn::Var, 3> fused;         ///< F_1, F_r, F_3
    std::array<nn::Var, 3> refined;       ///< F-bar for frames 1, r, 3
    std::array<nn::Var, 2> attention;     ///< A_1, A_3
    std::array<nn::Var, 2> attended;      ///< Z_1, Z_3
    nn::Var phi_dn, phi_sr, phi_dn_down, gate, phi_f;
};

class TeqNetwork {
public:
    explicit TeqNetwork(ModelConfig cfg);

    struct Output {
        nn::Var hr; ///< (N, 3, H, W)
        nn::Var lr; ///< (N, 3, H/2, W/2)
    };

    /// Runs the pipeline on a batch of frame triplets (prev, reference, next).
    /// Single-frame configs feed the reference into all three slots upstream.
    Output forward(nn::Tape& tape, std::span<const std::array<const FrameInputs*, 3>> batch,
                   const ForwardOverrides* overrides = nullptr,
                   ForwardTrace* trace = nullptr) const;

    Output forward_one(nn::Tape& tape, const FrameInputs& prev, const FrameInputs& ref,
                       const FrameInputs& next, const ForwardOverrides* overrides = nullptr,
                       ForwardTrace* trace = nullptr) const;

    const ModelConfig& config() const { return config_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    void init_xavier(std::uint64_t seed) { params_.xavier_init(seed); }

    struct Complexity {
        std::int64_t params = 0;
        std::uint64_t macs = 0; ///< fused multiply-add count for one frame triplet
    };
    /// Static counts for a raw input of the given size (counts, no arithmetic).
    Complexity complexity(int height, int width) const;

private:
    ModelConfig config_;
    nn::ParamStore params_;

    // HDR fusion
    std::array<nn::Conv2d, 3> feat1_, feat2_; ///< per-exposure extractors
    nn::Conv2d wconv1_, wconv2_;              ///< weight branch
    nn::Conv2d direct1_, direct2_;            ///< BASELINE direct estimation
    // temporal denoising
    nn::Conv2d ext1_, ext2_;   ///< shared refinement (F -> F-bar)
    nn::Conv2d att1_, att2_;   ///< shared attention (2 convs + sigmoid)
    nn::Conv2d fuse_in_;
    std::vector<nn::Drdb> drdbs_;
    nn::Conv2d post_drdb_, out1_, out2_;
    // low-resolution reconstructor
    nn::Conv2d lr1_, lr2_, lr3_;
    // super-resolution
    nn::Conv2d sr_down1_, sr_down2_; ///< OR: 1->C s2, C->C s2; SSR: 12->C s2 (down2 unused)
    std::vector<nn::ResBlock> sr_blocks_;
    nn::Conv2d dn_down_;
    nn::Conv2d gate1_, gate2_;
    // high-resolution reconstructor
    std::vector<nn::ResBlock> hr_blocks_;
    nn::Conv2d hr_pre_, hr_mid_, hr_post_, hr_out_;

    nn::Var fuse_frame(nn::Tape& tape, const std::array<nn::Var, 3>& exposure_in,
                       nn::Var weight_in, nn::Var direct_in,
                       const ForwardOverrides* overrides, bool is_reference,
                       ForwardTrace* trace) const;
};

} // namespace teq
