#include "teq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json_io.hpp"
#include "teq/baseline.hpp"
#include "teq/metrics.hpp"
#include "teq/rng.hpp"

namespace teq {

using nlohmann::json;

namespace {

json loss_config_to_json(const LossConfig& c) {
    return json{{"mode", c.mode == LossMode::kLdr ? "LDR" : "TM"},
                {"mu", c.mu},
                {"alpha", c.alpha},
                {"mask_low", c.mask_low},
                {"mask_high", c.mask_high},
                {"perceptual", c.perceptual},
                {"lambda_p", c.lambda_p}};
}

LossConfig loss_config_from_json(const json& j) {
    LossConfig c;
    if (j.contains("mode")) c.mode = j["mode"] == "TM" ? LossMode::kTm : LossMode::kLdr;
    c.mu = j.value("mu", c.mu);
    c.alpha = j.value("alpha", c.alpha);
    c.mask_low = j.value("mask_low", c.mask_low);
    c.mask_high = j.value("mask_high", c.mask_high);
    c.perceptual = j.value("perceptual", c.perceptual);
    c.lambda_p = j.value("lambda_p", c.lambda_p);
    c.validate();
    return c;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// JSON has no infinity; report it as the string "inf".
json db_to_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

} // namespace

void TrainConfig::validate() const {
    model.validate();
    loss.validate();
    if (iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (patch_size < 16 || patch_size % 4 != 0)
        throw std::invalid_argument("train: patch size must be a multiple of 4, >= 16");
    if (patch_stride < 1) throw std::invalid_argument("train: stride must be >= 1");
    if (checkpoint_every < 1) throw std::invalid_argument("train: cadence must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train: lr must be > 0");
}

std::string TrainConfig::to_json() const {
    json j;
    j["manifest"] = manifest_path.string();
    j["output_dir"] = output_dir.string();
    j["model"] = json::parse(model.to_json());
    j["loss"] = loss_config_to_json(loss);
    j["iterations"] = iterations;
    j["batch_size"] = batch_size;
    j["patch_size"] = patch_size;
    j["patch_stride"] = patch_stride;
    j["learning_rate"] = learning_rate;
    j["checkpoint_every"] = checkpoint_every;
    j["seed"] = seed;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    if (j.contains("manifest")) c.manifest_path = j["manifest"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
    if (j.contains("loss")) c.loss = loss_config_from_json(j["loss"]);
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.patch_stride = j.value("patch_stride", c.patch_stride);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.seed = j.value("seed", c.seed);
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("train config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

NanLossError::NanLossError(int it, std::vector<std::string> s, LossBreakdown bd)
    : std::runtime_error("training loss went non-finite at iteration " + std::to_string(it)),
      iteration(it), samples(std::move(s)), breakdown(bd) {}

std::string NanLossError::to_json() const {
    json j;
    j["error"] = {{"type", "nan_loss"},
                  {"iteration", iteration},
                  {"batch", samples},
                  {"components",
                   {{"total", breakdown.total},
                    {"l1_hr", breakdown.l1_hr},
                    {"perceptual_hr", breakdown.perc_hr},
                    {"l1_lr", breakdown.l1_lr},
                    {"perceptual_lr", breakdown.perc_lr}}}};
    return j.dump(2);
}

Image var_to_image(const nn::Var& v, int sample) {
    const nn::Shape s = v.shape();
    Image img(s.c, s.h, s.w);
    const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
    std::copy_n(v.value().begin() + sample * per, per, img.data.begin());
    return img;
}

NetOutputs run_network(const TeqNetwork& network, const std::array<TeqRawFrame, 3>& raws) {
    FrameInputs prev = make_frame_inputs(raws[0]);
    FrameInputs ref = make_frame_inputs(raws[1]);
    FrameInputs next = make_frame_inputs(raws[2]);
    nn::Tape tape;
    TeqNetwork::Output out = network.forward_one(tape, prev, ref, next);
    return {var_to_image(out.hr), var_to_image(out.lr)};
}

namespace {

struct PatchSample {
    int triplet = 0;
    int y = 0;
    int x = 0;
    std::string id() const {
        return "t" + std::to_string(triplet) + "@" + std::to_string(y) + "," +
               std::to_string(x);
    }
};

} // namespace

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    Manifest manifest = Manifest::load(cfg.manifest_path);
    if (manifest.triplets.empty()) throw std::runtime_error("train: empty manifest");
    std::filesystem::create_directories(cfg.output_dir);

    // Desk-scale datasets: load everything once. Frames must share dimensions
    // so one patch grid covers every triplet.
    std::vector<Triplet> triplets;
    triplets.reserve(manifest.triplets.size());
    for (const auto& rec : manifest.triplets) triplets.push_back(load_triplet(manifest, rec));
    const Image& first_mosaic = triplets[0].raws[0].mosaic;
    for (const Triplet& t : triplets)
        if (!t.raws[0].mosaic.same_shape(first_mosaic))
            throw std::runtime_error("train: all frames must share dimensions");

    const int patch_eff = std::min({cfg.patch_size, first_mosaic.height, first_mosaic.width});
    std::vector<PatchSample> samples;
    for (std::size_t t = 0; t < triplets.size(); ++t)
        for (const PatchCoord& pc : extract_patch_coords(
                 first_mosaic.height, first_mosaic.width, patch_eff, cfg.patch_stride))
            samples.push_back({static_cast<int>(t), pc.y, pc.x});

    TeqNetwork network(cfg.model);
    network.init_xavier(derive_seed(cfg.seed, "xavier", 0));
    nn::Adam adam(network.params(), cfg.learning_rate);
    std::optional<PerceptualNet> perceptual;
    if (cfg.loss.perceptual) perceptual.emplace();

    std::ofstream config_echo(cfg.output_dir / "train_config.json");
    config_echo << cfg.to_json() << "\n";
    config_echo.close();

    std::ofstream log(cfg.output_dir / "loss_log.csv");
    log << "iteration,total,l1_hr,perceptual_hr,l1_lr,perceptual_lr\n";

    // Deterministic sample stream: one permutation per epoch.
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size(); // force shuffle on first use
    std::uint64_t epoch = 0;

    TrainResult result;
    result.curve.reserve(cfg.iterations);
    const ExposureConfig exposure = triplets[0].raws[1].config;

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<PatchSample> batch;
        std::vector<std::string> batch_ids;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch++));
                for (std::size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1],
                              order[static_cast<std::size_t>(shuffle_rng.uniform() * i)]);
                cursor = 0;
            }
            batch.push_back(samples[order[cursor++]]);
            batch_ids.push_back(batch.back().id());
        }

        // Assemble batch inputs and ground truth crops.
        std::vector<std::array<FrameInputs, 3>> inputs(batch.size());
        std::vector<Image> gts_hr, gts_lr;
        gts_hr.reserve(batch.size());
        gts_lr.reserve(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b) {
            const Triplet& trip = triplets[batch[b].triplet];
            for (int f = 0; f < 3; ++f) {
                TeqRawFrame patch_raw = trip.raws[f];
                patch_raw.mosaic =
                    crop(trip.raws[f].mosaic, batch[b].y, batch[b].x, patch_eff, patch_eff);
                inputs[b][f] = make_frame_inputs(patch_raw);
            }
            Image gt = crop(trip.ground_truth, batch[b].y, batch[b].x, patch_eff, patch_eff);
            gts_lr.push_back(box_downsample2(gt));
            gts_hr.push_back(std::move(gt));
        }
        std::vector<std::array<const FrameInputs*, 3>> batch_ptrs(batch.size());
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (int f = 0; f < 3; ++f) batch_ptrs[b][f] = &inputs[b][f];
        std::vector<const Image*> hr_ptrs, lr_ptrs;
        for (const Image& img : gts_hr) hr_ptrs.push_back(&img);
        for (const Image& img : gts_lr) lr_ptrs.push_back(&img);
        HostBatch gt_hr = stack_images(hr_ptrs);
        HostBatch gt_lr = stack_images(lr_ptrs);

        nn::Tape tape;
        TeqNetwork::Output out = network.forward(tape, batch_ptrs);
        LossBreakdown bd;
        nn::Var loss = total_loss(out.hr, out.lr, gt_hr, gt_lr, exposure, cfg.loss,
                                  perceptual ? &*perceptual : nullptr, &bd);

        if (!std::isfinite(bd.total)) {
            NanLossError err(iter, batch_ids, bd);
            std::ofstream dump(cfg.output_dir / "nan_dump.json");
            dump << err.to_json() << "\n";
            throw err;
        }

        network.params().zero_grad();
        tape.backward(loss);
        adam.step();

        result.curve.push_back(bd);
        log << iter << "," << fmt_double(bd.total) << "," << fmt_double(bd.l1_hr) << ","
            << fmt_double(bd.perc_hr) << "," << fmt_double(bd.l1_lr) << ","
            << fmt_double(bd.perc_lr) << "\n";

        if ((iter + 1) % cfg.checkpoint_every == 0 && iter + 1 < cfg.iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt_%06d.ckpt", iter + 1);
            save_checkpoint(cfg.output_dir / name, network);
        }
    }

    result.final_checkpoint = cfg.output_dir / "final.ckpt";
    save_checkpoint(result.final_checkpoint, network);
    result.loss_log = cfg.output_dir / "loss_log.csv";

    json run_log;
    run_log["seed"] = cfg.seed;
    run_log["iterations"] = cfg.iterations;
    run_log["samples"] = samples.size();
#ifdef _OPENMP
    run_log["threads"] = omp_get_max_threads();
#else
    run_log["threads"] = 1;
#endif
    // Parallel loops are gather-only (one writer per element), so thread
    // count does not change results.
    run_log["nondeterminism_sources"] = json::array();
    std::ofstream rl(cfg.output_dir / "run_log.json");
    rl << run_log.dump(2) << "\n";

    return result;
}

EvalReport evaluate(const Manifest& manifest, const EvalOptions& options) {
    if (manifest.triplets.empty()) throw std::runtime_error("evaluate: empty manifest");
    std::unique_ptr<TeqNetwork> network;
    if (options.method == "checkpoint") {
        network = load_checkpoint(options.checkpoint);
    } else if (options.method != "naive") {
        throw std::invalid_argument("evaluate: unknown method " + options.method);
    }

    EvalReport report;
    std::map<std::string, std::array<double, 3>> scene_acc; // psnr, psnr_mu, count
    for (const auto& rec : manifest.triplets) {
        Triplet trip = load_triplet(manifest, rec);
        Image gt_half = box_downsample2(trip.ground_truth);
        Image recon_half;
        if (network) {
            NetOutputs out = run_network(*network, trip.raws);
            recon_half = box_downsample2(out.hr);
        } else {
            recon_half = naive_reconstruct(trip.raws[1]);
        }
        FrameScore score;
        score.scene = rec.scene;
        score.frame = rec.center_frame;
        score.method = options.method == "checkpoint" ? "network" : "naive";
        score.psnr = psnr(recon_half, gt_half);
        score.psnr_mu = psnr_mu(recon_half, gt_half, options.mu);
        auto& acc = scene_acc[rec.scene];
        acc[0] += score.psnr;
        acc[1] += score.psnr_mu;
        acc[2] += 1.0;
        report.frames.push_back(std::move(score));
    }

    double sum_psnr = 0.0, sum_mu = 0.0;
    for (const auto& f : report.frames) {
        sum_psnr += f.psnr;
        sum_mu += f.psnr_mu;
    }
    report.mean_psnr = sum_psnr / static_cast<double>(report.frames.size());
    report.mean_psnr_mu = sum_mu / static_cast<double>(report.frames.size());
    for (const auto& [scene, acc] : scene_acc)
        report.scene_means[scene] = {acc[0] / acc[2], acc[1] / acc[2]};
    return report;
}

std::string EvalReport::to_json() const {
    json j;
    j["comparison"] = comparison;
    json frames_json = json::array();
    for (const auto& f : frames)
        frames_json.push_back(json{{"scene", f.scene},
                                   {"frame", f.frame},
                                   {"method", f.method},
                                   {"psnr", db_to_json(f.psnr)},
                                   {"psnr_mu", db_to_json(f.psnr_mu)}});
    j["frames"] = std::move(frames_json);
    json scenes = json::object();
    for (const auto& [scene, means] : scene_means)
        scenes[scene] = {{"psnr", db_to_json(means[0])}, {"psnr_mu", db_to_json(means[1])}};
    j["scenes"] = std::move(scenes);
    j["mean_psnr"] = db_to_json(mean_psnr);
    j["mean_psnr_mu"] = db_to_json(mean_psnr_mu);
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "scene,frame,method,psnr,psnr_mu\n";
    for (const auto& f : frames) {
        out << f.scene << "," << f.frame << "," << f.method << ",";
        if (std::isinf(f.psnr)) out << "inf";
        else out << fmt_double(f.psnr);
        out << ",";
        if (std::isinf(f.psnr_mu)) out << "inf";
        else out << fmt_double(f.psnr_mu);
        out << "\n";
    }
    return out.str();
}

std::vector<AblationEntry> ablation_preset(const std::string& name, int width) {
    std::vector<AblationEntry> entries;
    LossConfig ldr;
    ldr.mode = LossMode::kLdr;
    LossConfig tm;
    tm.mode = LossMode::kTm;

    auto add_variants = [&](FrameMode fm, const LossConfig& loss, const std::string& tag,
                            std::initializer_list<Variant> variants) {
        for (Variant v : variants) {
            std::string label = variant_name(v);
            if (!tag.empty()) label += "/" + tag;
            entries.push_back({label, ModelConfig::preset(v, fm, width), loss});
        }
    };

    if (name == "architecture") {
        add_variants(FrameMode::kMulti, ldr, "",
                     {Variant::kBaseline, Variant::kAtt, Variant::kNsr, Variant::kGsrSsr,
                      Variant::kGsrOr});
    } else if (name == "loss") {
        entries.push_back({"Single+TM", ModelConfig::preset(Variant::kGsrOr, FrameMode::kSingle, width), tm});
        entries.push_back({"Multi+TM", ModelConfig::preset(Variant::kGsrOr, FrameMode::kMulti, width), tm});
        entries.push_back({"Single+LDR", ModelConfig::preset(Variant::kGsrOr, FrameMode::kSingle, width), ldr});
        entries.push_back({"Multi+LDR", ModelConfig::preset(Variant::kGsrOr, FrameMode::kMulti, width), ldr});
    } else if (name == "full") {
        for (Variant v : {Variant::kBaseline, Variant::kAtt, Variant::kNsr,
                          Variant::kGsrSsr, Variant::kGsrOr})
            for (FrameMode fm : {FrameMode::kSingle, FrameMode::kMulti})
                for (const LossConfig* loss : {&tm, &ldr}) {
                    std::string label = variant_name(v);
                    label += fm == FrameMode::kSingle ? "/Single" : "/Multi";
                    label += loss->mode == LossMode::kTm ? "+TM" : "+LDR";
                    entries.push_back({label, ModelConfig::preset(v, fm, width), *loss});
                }
    } else {
        throw std::invalid_argument("ablation: unknown preset " + name);
    }
    return entries;
}

AblationReport run_ablation(const TrainConfig& base, const std::vector<AblationEntry>& entries) {
    AblationReport report;
    for (const auto& entry : entries) {
        TrainConfig cfg = base;
        cfg.model = entry.model;
        cfg.loss = entry.loss;
        std::string dir_name = entry.label;
        std::replace(dir_name.begin(), dir_name.end(), '/', '_');
        std::replace(dir_name.begin(), dir_name.end(), '+', '_');
        cfg.output_dir = base.output_dir / dir_name;
        TrainResult res = train(cfg);

        Manifest manifest = Manifest::load(cfg.manifest_path);
        EvalOptions opt;
        opt.method = "checkpoint";
        opt.checkpoint = res.final_checkpoint;
        EvalReport eval = evaluate(manifest, opt);
        report.rows.push_back({entry.label, eval.mean_psnr, eval.mean_psnr_mu});
    }
    return report;
}

std::string AblationReport::to_json() const {
    json j = json::array();
    for (const auto& row : rows)
        j.push_back(json{{"label", row.label},
                         {"psnr", db_to_json(row.psnr)},
                         {"psnr_mu", db_to_json(row.psnr_mu)}});
    return j.dump(2);
}

std::string AblationReport::table() const {
    std::ostringstream out;
    out << "configuration          PSNR     PSNR-mu\n";
    for (const auto& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-20s %8.3f %8.3f\n", row.label.c_str(),
                      row.psnr, row.psnr_mu);
        out << line;
    }
    return out.str();
}

} // namespace teq
