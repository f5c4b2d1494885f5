#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "teq/checkpoint.hpp"
#include "teq/dataset.hpp"
#include "teq/loss.hpp"
#include "teq/model.hpp"

namespace teq {

struct TrainConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path output_dir;
    ModelConfig model = ModelConfig::preset(Variant::kGsrOr);
    LossConfig loss;
    int iterations = 2000;
    int batch_size = 12;
    int patch_size = 256;
    int patch_stride = 120;
    double learning_rate = 1e-4;
    int checkpoint_every = 500;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig load(const std::filesystem::path& path);
};

/// Raised when the loss goes non-finite; carries the diagnostic dump.
class NanLossError : public std::runtime_error {
public:
    NanLossError(int iteration, std::vector<std::string> samples, LossBreakdown bd);
    int iteration;
    std::vector<std::string> samples;
    LossBreakdown breakdown;
    std::string to_json() const;
};

struct TrainResult {
    std::vector<LossBreakdown> curve;
    std::filesystem::path final_checkpoint;
    std::filesystem::path loss_log;
};

/// Full training run: deterministic given (config, seed). Writes checkpoints,
/// the loss log CSV and a run log under output_dir.
TrainResult train(const TrainConfig& cfg);

/// Runs the network on one raw triplet; outputs linear-radiance images.
struct NetOutputs {
    Image hr; ///< full raw resolution
    Image lr; ///< half resolution
};
NetOutputs run_network(const TeqNetwork& network, const std::array<TeqRawFrame, 3>& raws);

/// Copies one sample of a (N,C,H,W) value into an Image.
Image var_to_image(const nn::Var& v, int sample = 0);

struct EvalOptions {
    std::string method = "naive"; ///< "naive" or "checkpoint"
    std::filesystem::path checkpoint;
    double mu = 5000.0;
};

struct FrameScore {
    std::string scene;
    int frame = 0;
    std::string method;
    double psnr = 0.0;
    double psnr_mu = 0.0;
};

struct EvalReport {
    std::vector<FrameScore> frames;
    std::map<std::string, std::array<double, 2>> scene_means; ///< psnr, psnr_mu
    double mean_psnr = 0.0;
    double mean_psnr_mu = 0.0;
    /// Cross-method comparison convention; fixed in every report.
    std::string comparison =
        "half-resolution: network H_hr box-downsampled 2x, naive native, "
        "ground truth box-downsampled 2x; psnr_mu normalizer = ground-truth peak";

    std::string to_json() const;
    std::string to_csv() const;
};

EvalReport evaluate(const Manifest& manifest, const EvalOptions& options);

struct AblationEntry {
    std::string label;
    ModelConfig model;
    LossConfig loss;
};

/// "architecture": the five variants (multi, LDR). "loss": GSR_OR x
/// {single,multi} x {TM,LDR}. "full": the whole cross product.
std::vector<AblationEntry> ablation_preset(const std::string& name, int width = 64);

struct AblationRow {
    std::string label;
    double psnr = 0.0;
    double psnr_mu = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::string to_json() const;
    std::string table() const;
};

/// Trains and evaluates every entry under a shared seed and dataset.
AblationReport run_ablation(const TrainConfig& base, const std::vector<AblationEntry>& entries);

} // namespace teq
