#include <benchmark/benchmark.h>

#include "teq/baseline.hpp"
#include "teq/loss.hpp"
#include "teq/model.hpp"
#include "teq/nn/layers.hpp"
#include "teq/rng.hpp"
#include "teq/sensor_model.hpp"
#include "teq/simulator.hpp"

namespace {

using namespace teq;

Image random_image(int c, int h, int w, std::uint64_t seed, double lo, double hi) {
    Image img(c, h, w);
    Rng rng(seed);
    for (double& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

TeqRawFrame random_raw(int size, std::uint64_t seed) {
    TeqRawFrame raw;
    raw.mosaic = random_image(1, size, size, seed, 0.0, 1.0);
    return raw;
}

void BM_ExtractSubExposures(benchmark::State& state) {
    TeqRawFrame raw = random_raw(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        SubExposures subs = extract_sub_exposures(raw);
        benchmark::DoNotOptimize(subs.m.data.data());
    }
    state.SetItemsProcessed(state.iterations() * raw.mosaic.size());
}
BENCHMARK(BM_ExtractSubExposures)->Arg(512)->Arg(1080);

void BM_NaiveReconstruct(benchmark::State& state) {
    TeqRawFrame raw = random_raw(static_cast<int>(state.range(0)), 2);
    for (auto _ : state) {
        Image out = naive_reconstruct(raw);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * raw.mosaic.size());
}
BENCHMARK(BM_NaiveReconstruct)->Arg(256)->Arg(512);

void BM_SimulateFrame(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    std::vector<Image> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(random_image(3, size, size, 10 + i, 0.0, 2.0));
    SimulationConfig cfg;
    cfg.blur_frames = {1, 2, 3};
    cfg.radiance_scale = 1.0;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        SimulatedFrame sim = simulate_teq_frame(frames, 1, cfg, seed++);
        benchmark::DoNotOptimize(sim.raw.mosaic.data.data());
    }
}
BENCHMARK(BM_SimulateFrame)->Arg(256);

void BM_MuLaw(benchmark::State& state) {
    Image img = random_image(3, 512, 512, 3, 0.0, 1.0);
    for (auto _ : state) {
        Image out = mu_law_image(img, 5000.0);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * img.size());
}
BENCHMARK(BM_MuLaw);

void BM_Conv2dForward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const int hw = static_cast<int>(state.range(1));
    nn::ParamStore store;
    nn::Conv2d conv(store, "conv", c, c);
    store.xavier_init(4);
    Rng rng(5);
    std::vector<nn::real> data(static_cast<std::size_t>(c) * hw * hw);
    for (auto& v : data) v = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        nn::Tape tape;
        nn::Var x = tape.constant(nn::Shape{1, c, hw, hw}, data);
        nn::Var y = conv(x);
        benchmark::DoNotOptimize(y.value().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::size_t>(c) * c * 9 * hw *
                            hw);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 64})->Args({64, 64})->Args({64, 128});

void BM_NetworkForward(benchmark::State& state) {
    ModelConfig cfg = ModelConfig::preset(Variant::kGsrOr, FrameMode::kMulti,
                                          static_cast<int>(state.range(0)));
    cfg.drdb_blocks = 2;
    cfg.drdb_growth = cfg.base_width / 2;
    TeqNetwork net(cfg);
    net.init_xavier(6);

    const int size = static_cast<int>(state.range(1));
    std::array<FrameInputs, 3> inputs;
    for (int i = 0; i < 3; ++i) inputs[i] = make_frame_inputs(random_raw(size, 20 + i));
    for (auto _ : state) {
        nn::Tape tape;
        auto out = net.forward_one(tape, inputs[0], inputs[1], inputs[2]);
        benchmark::DoNotOptimize(out.hr.value().data());
    }
}
BENCHMARK(BM_NetworkForward)->Args({16, 64})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
