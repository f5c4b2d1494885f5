// teq: simulate tri-exposure quad-bayer raws from HDR footage, train and run
// the reconstruction network, and evaluate against the naive baseline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "teq/baseline.hpp"
#include "teq/checkpoint.hpp"
#include "teq/dataset.hpp"
#include "teq/metrics.hpp"
#include "teq/model.hpp"
#include "teq/pfm.hpp"
#include "teq/simulator.hpp"
#include "teq/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << "\n";
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty() || out_path == "-")
        std::cout << text << "\n";
    else
        write_text_file(out_path, text);
}

teq::TeqRawFrame load_raw(const fs::path& raw_path, std::optional<fs::path> sidecar_path) {
    fs::path sc = sidecar_path.value_or(fs::path(raw_path).replace_extension(".json"));
    teq::RawSidecar sidecar = teq::RawSidecar::load(sc);
    teq::TeqRawFrame raw;
    raw.mosaic = teq::read_pfm(raw_path);
    raw.layout = sidecar.layout;
    raw.config = sidecar.exposure;
    raw.frame_index = sidecar.frame_index;
    raw.seed = sidecar.seed;
    raw.validate();
    return raw;
}

int run(int argc, char** argv) {
    CLI::App app{"tri-exposure quad-bayer HDR video simulation and reconstruction"};
    app.require_subcommand(1);

    // --- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "render TEQ raw datasets from HDR footage");
    std::string sim_input, sim_output, sim_config;
    std::optional<std::uint64_t> sim_seed;
    std::optional<double> sim_sigma;
    std::optional<int> sim_bit_depth;
    sim->add_option("--input", sim_input, "directory of PFM scenes")->required();
    sim->add_option("--output", sim_output, "output dataset directory")->required();
    sim->add_option("--config", sim_config, "SimulationConfig JSON file");
    sim->add_option("--seed", sim_seed, "override the simulation seed");
    sim->add_option("--sigma", sim_sigma, "fix sigma_S instead of sampling the range");
    sim->add_option("--bit-depth", sim_bit_depth, "ADC bit depth (8..16)");

    // --- train -------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a reconstruction model");
    std::string tr_config, tr_manifest, tr_output, tr_variant, tr_frames, tr_loss_mode;
    std::optional<std::uint64_t> tr_seed;
    std::optional<int> tr_iterations, tr_batch, tr_width, tr_patch, tr_stride;
    std::optional<double> tr_lr;
    tr->add_option("--config", tr_config, "TrainConfig JSON file");
    tr->add_option("--manifest", tr_manifest, "dataset manifest path");
    tr->add_option("--output", tr_output, "run output directory");
    tr->add_option("--iterations", tr_iterations, "training iterations");
    tr->add_option("--batch", tr_batch, "batch size");
    tr->add_option("--lr", tr_lr, "Adam learning rate");
    tr->add_option("--seed", tr_seed, "training seed");
    tr->add_option("--variant", tr_variant, "BASELINE|ATT|NSR|GSR_SSR|GSR_OR");
    tr->add_option("--frames", tr_frames, "single|multi");
    tr->add_option("--loss-mode", tr_loss_mode, "TM|LDR");
    tr->add_option("--width", tr_width, "base channel width");
    tr->add_option("--patch", tr_patch, "patch size");
    tr->add_option("--stride", tr_stride, "patch stride");

    // --- reconstruct -------------------------------------------------------
    auto* rc = app.add_subcommand("reconstruct", "reconstruct HDR from raw frames");
    std::vector<std::string> rc_raws;
    std::string rc_method = "naive", rc_checkpoint, rc_out, rc_out_lr;
    std::optional<std::uint64_t> rc_seed;
    rc->add_option("--raw", rc_raws, "raw PFM (1 or 3, ordered prev/ref/next)")
        ->required()
        ->expected(1, 3);
    rc->add_option("--method", rc_method, "naive|checkpoint");
    rc->add_option("--checkpoint", rc_checkpoint, "model checkpoint");
    rc->add_option("--out", rc_out, "output HDR PFM")->required();
    rc->add_option("--out-lr", rc_out_lr, "also write the low-resolution output");
    rc->add_option("--seed", rc_seed, "unused; accepted for interface uniformity");

    // --- evaluate ----------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "score reconstructions against ground truth");
    std::string ev_manifest, ev_method = "naive", ev_checkpoint, ev_out, ev_csv;
    std::optional<std::uint64_t> ev_seed;
    std::optional<double> ev_mu;
    ev->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    ev->add_option("--method", ev_method, "naive|checkpoint");
    ev->add_option("--checkpoint", ev_checkpoint, "model checkpoint");
    ev->add_option("--out", ev_out, "report JSON path (default stdout)");
    ev->add_option("--csv", ev_csv, "also write CSV rows");
    ev->add_option("--mu", ev_mu, "mu for PSNR-mu");
    ev->add_option("--seed", ev_seed, "unused; accepted for interface uniformity");

    // --- ablate ------------------------------------------------------------
    auto* ab = app.add_subcommand("ablate", "train/evaluate a configuration matrix");
    std::string ab_config, ab_preset = "architecture", ab_out;
    std::optional<std::uint64_t> ab_seed;
    std::optional<int> ab_iterations, ab_width;
    ab->add_option("--config", ab_config, "base TrainConfig JSON file")->required();
    ab->add_option("--preset", ab_preset, "architecture|loss|full");
    ab->add_option("--iterations", ab_iterations, "override iterations per entry");
    ab->add_option("--width", ab_width, "base channel width for all entries");
    ab->add_option("--seed", ab_seed, "shared seed");
    ab->add_option("--out", ab_out, "report JSON path (default stdout)");

    // --- complexity --------------------------------------------------------
    auto* cx = app.add_subcommand("complexity", "report parameter and multiply-add counts");
    std::string cx_variant = "GSR_OR", cx_frames = "multi", cx_config, cx_out;
    int cx_size = 256, cx_width = 64;
    cx->add_option("--variant", cx_variant, "BASELINE|ATT|NSR|GSR_SSR|GSR_OR");
    cx->add_option("--frames", cx_frames, "single|multi");
    cx->add_option("--width", cx_width, "base channel width");
    cx->add_option("--size", cx_size, "input size (square raw)");
    cx->add_option("--config", cx_config, "ModelConfig JSON file");
    cx->add_option("--out", cx_out, "output JSON path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (*sim) {
        teq::SimulationConfig cfg;
        if (!sim_config.empty()) cfg = teq::SimulationConfig::load(sim_config);
        if (sim_seed) cfg.seed = *sim_seed;
        if (sim_sigma) cfg.sigma_s = *sim_sigma;
        if (sim_bit_depth) cfg.bit_depth = *sim_bit_depth;
        cfg.validate();
        teq::Manifest manifest = teq::build_dataset(sim_input, sim_output, cfg);
        std::cout << "wrote " << manifest.triplets.size() << " triplets under "
                  << sim_output << "\n";
        return 0;
    }

    if (*tr) {
        teq::TrainConfig cfg;
        if (!tr_config.empty()) cfg = teq::TrainConfig::load(tr_config);
        if (!tr_manifest.empty()) cfg.manifest_path = tr_manifest;
        if (!tr_output.empty()) cfg.output_dir = tr_output;
        if (tr_iterations) cfg.iterations = *tr_iterations;
        if (tr_batch) cfg.batch_size = *tr_batch;
        if (tr_lr) cfg.learning_rate = *tr_lr;
        if (tr_seed) cfg.seed = *tr_seed;
        if (tr_patch) cfg.patch_size = *tr_patch;
        if (tr_stride) cfg.patch_stride = *tr_stride;
        if (!tr_variant.empty() || !tr_frames.empty() || tr_width) {
            teq::Variant v =
                tr_variant.empty() ? cfg.model.variant : teq::variant_from_name(tr_variant);
            teq::FrameMode f = cfg.model.frames;
            if (!tr_frames.empty())
                f = tr_frames == "single" ? teq::FrameMode::kSingle : teq::FrameMode::kMulti;
            const int width = tr_width ? *tr_width : cfg.model.base_width;
            teq::ModelConfig model = teq::ModelConfig::preset(v, f, width);
            model.drdb_blocks = cfg.model.drdb_blocks;
            model.drdb_growth = cfg.model.drdb_growth;
            model.drdb_dilation = cfg.model.drdb_dilation;
            model.sr_resblocks = cfg.model.sr_resblocks;
            model.hr_resblocks = cfg.model.hr_resblocks;
            cfg.model = model;
        }
        if (!tr_loss_mode.empty())
            cfg.loss.mode = tr_loss_mode == "TM" ? teq::LossMode::kTm : teq::LossMode::kLdr;
        teq::TrainResult result = teq::train(cfg);
        std::cout << "final loss " << result.curve.back().total << ", checkpoint "
                  << result.final_checkpoint.string() << "\n";
        return 0;
    }

    if (*rc) {
        std::array<teq::TeqRawFrame, 3> raws;
        if (rc_raws.size() == 1) {
            raws[1] = load_raw(rc_raws[0], std::nullopt);
            raws[0] = raws[1];
            raws[2] = raws[1];
        } else if (rc_raws.size() == 3) {
            for (int i = 0; i < 3; ++i) raws[i] = load_raw(rc_raws[i], std::nullopt);
        } else {
            throw std::invalid_argument("reconstruct: pass one raw or three");
        }

        if (rc_method == "naive") {
            teq::Image out = teq::naive_reconstruct(raws[1]);
            teq::write_pfm(rc_out, out);
        } else if (rc_method == "checkpoint") {
            if (rc_checkpoint.empty())
                throw std::invalid_argument("reconstruct: --checkpoint required");
            auto network = teq::load_checkpoint(rc_checkpoint);
            teq::NetOutputs out = teq::run_network(*network, raws);
            teq::write_pfm(rc_out, out.hr);
            if (!rc_out_lr.empty()) teq::write_pfm(rc_out_lr, out.lr);
        } else {
            throw std::invalid_argument("reconstruct: unknown method " + rc_method);
        }
        std::cout << "wrote " << rc_out << "\n";
        return 0;
    }

    if (*ev) {
        teq::Manifest manifest = teq::Manifest::load(ev_manifest);
        teq::EvalOptions opt;
        opt.method = ev_method;
        opt.checkpoint = ev_checkpoint;
        if (ev_mu) opt.mu = *ev_mu;
        teq::EvalReport report = teq::evaluate(manifest, opt);
        emit(report.to_json(), ev_out);
        if (!ev_csv.empty()) write_text_file(ev_csv, report.to_csv());
        return 0;
    }

    if (*ab) {
        teq::TrainConfig base = teq::TrainConfig::load(ab_config);
        if (ab_iterations) base.iterations = *ab_iterations;
        if (ab_seed) base.seed = *ab_seed;
        const int width = ab_width ? *ab_width : base.model.base_width;
        auto entries = teq::ablation_preset(ab_preset, width);
        teq::AblationReport report = teq::run_ablation(base, entries);
        std::cerr << report.table();
        emit(report.to_json(), ab_out);
        return 0;
    }

    if (*cx) {
        teq::ModelConfig cfg;
        if (!cx_config.empty()) {
            std::ifstream in(cx_config);
            if (!in) throw std::runtime_error("cannot open " + cx_config);
            std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
            cfg = teq::ModelConfig::from_json(text);
        } else {
            teq::FrameMode f =
                cx_frames == "single" ? teq::FrameMode::kSingle : teq::FrameMode::kMulti;
            cfg = teq::ModelConfig::preset(teq::variant_from_name(cx_variant), f, cx_width);
        }
        teq::TeqNetwork network(cfg);
        auto c = network.complexity(cx_size, cx_size);
        json j;
        j["variant"] = teq::variant_name(cfg.variant);
        j["input"] = {cx_size, cx_size};
        j["params"] = c.params;
        // Fused multiply-add counted once under "flops"; "madds" counts the
        // multiply and the add separately.
        j["flops"] = c.macs;
        j["madds"] = 2 * c.macs;
        j["convention"] = "convolution layers only; flops = fused multiply-adds";
        emit(j.dump(2), cx_out);
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const teq::NanLossError& e) {
        std::cerr << e.to_json() << "\n";
        return 3;
    } catch (const std::exception& e) {
        json err;
        err["error"] = {{"type", "runtime"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
