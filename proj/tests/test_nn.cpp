#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "teq/nn/layers.hpp"
#include "teq/nn/tensor.hpp"
#include "teq/rng.hpp"
#include "test_util.hpp"

using namespace teq;
using namespace teq::nn;

namespace {

std::vector<real> random_vec(std::size_t n, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    Rng rng(seed);
    std::vector<real> v(n);
    for (real& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Plain 7-loop convolution oracle, independent of the tape implementation.
std::vector<real> conv_oracle(const std::vector<real>& x, Shape xs,
                              const std::vector<real>& w, Shape ws,
                              const std::vector<real>& b, const Conv2dSpec& spec,
                              Shape& out_shape) {
    const int s = spec.stride, p = spec.pad, d = spec.dilation;
    const int oh = (xs.h + 2 * p - ((ws.h - 1) * d + 1)) / s + 1;
    const int ow = (xs.w + 2 * p - ((ws.w - 1) * d + 1)) / s + 1;
    out_shape = {xs.n, ws.n, oh, ow};
    std::vector<real> out(out_shape.elems(), 0.0);
    for (int n = 0; n < xs.n; ++n)
        for (int oc = 0; oc < ws.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    real acc = b[oc];
                    for (int ic = 0; ic < xs.c; ++ic)
                        for (int ky = 0; ky < ws.h; ++ky)
                            for (int kx = 0; kx < ws.w; ++kx) {
                                const int iy = oy * s - p + ky * d;
                                const int ix = ox * s - p + kx * d;
                                if (iy < 0 || iy >= xs.h || ix < 0 || ix >= xs.w) continue;
                                acc += w[((static_cast<std::size_t>(oc) * xs.c + ic) * ws.h +
                                          ky) * ws.w + kx] *
                                       x[((static_cast<std::size_t>(n) * xs.c + ic) * xs.h +
                                          iy) * xs.w + ix];
                            }
                    out[((static_cast<std::size_t>(n) * ws.n + oc) * oh + oy) * ow + ox] = acc;
                }
    return out;
}

using GraphFn = std::function<Var(Tape&, Var)>;

double eval_scalar(Parameter& x, const GraphFn& f, const std::vector<real>& target) {
    Tape tape;
    Var xv = tape.leaf(x);
    Var y = f(tape, xv);
    std::vector<real> ones(y.shape().elems(), 1.0);
    return masked_l1(y, target, ones).scalar();
}

/// Central finite differences of masked_l1(f(x), target) against the
/// analytic gradient, on every element of x.
void check_gradient(Shape xshape, const GraphFn& f, std::uint64_t seed,
                    double tol = 1e-6) {
    Parameter x("x", xshape);
    x.value = random_vec(xshape.elems(), seed, -0.9, 1.1);

    Tape tape;
    Var xv = tape.leaf(x);
    Var y = f(tape, xv);
    std::vector<real> target = random_vec(y.shape().elems(), seed ^ 0xabcd, -0.5, 0.5);
    std::vector<real> ones(y.shape().elems(), 1.0);
    Var loss = masked_l1(y, target, ones);
    tape.backward(loss);
    const std::vector<real> analytic = x.grad;

    const double h = 1e-6;
    for (std::size_t i = 0; i < x.value.size(); ++i) {
        const double keep = x.value[i];
        x.value[i] = keep + h;
        const double up = eval_scalar(x, f, target);
        x.value[i] = keep - h;
        const double dn = eval_scalar(x, f, target);
        x.value[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(fd - analytic[i]) < tol * std::max(1.0, std::abs(fd)));
    }
}

} // namespace

TEST_CASE("conv2d forward matches the loop oracle (stride/dilation variants)") {
    struct Case {
        Shape xs, ws;
        Conv2dSpec spec;
    };
    const Case cases[] = {
        {{2, 3, 6, 7}, {4, 3, 3, 3}, {1, 1, 1}},
        {{1, 2, 8, 8}, {3, 2, 3, 3}, {2, 1, 1}},
        {{1, 2, 8, 8}, {2, 2, 3, 3}, {1, 2, 2}},
        {{1, 4, 5, 5}, {2, 4, 1, 1}, {1, 0, 1}},
    };
    int id = 0;
    for (const Case& c : cases) {
        auto xv = random_vec(c.xs.elems(), 100 + id);
        auto wv = random_vec(c.ws.elems(), 200 + id);
        auto bv = random_vec(static_cast<std::size_t>(c.ws.n), 300 + id);
        ++id;

        Tape tape;
        Var x = tape.constant(c.xs, xv);
        Var w = tape.constant(c.ws, wv);
        Var b = tape.constant(Shape{1, c.ws.n, 1, 1}, bv);
        Var y = conv2d(x, w, b, c.spec);

        Shape want_shape;
        auto want = conv_oracle(xv, c.xs, wv, c.ws, bv, c.spec, want_shape);
        REQUIRE(y.shape() == want_shape);
        for (std::size_t i = 0; i < want.size(); ++i)
            CHECK(y.value()[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d gradients (input, weight, bias) match finite differences") {
    const Shape xs{1, 2, 5, 5}, ws{3, 2, 3, 3};
    Parameter w("w", ws);
    w.value = random_vec(ws.elems(), 41);
    Parameter b("b", Shape{1, 3, 1, 1});
    b.value = random_vec(3, 42);

    // d/dx with w, b fixed
    check_gradient(xs, [&](Tape& t, Var x) {
        return conv2d(x, t.leaf(w, false), t.leaf(b, false), {1, 1, 1});
    }, 7);

    // d/dw with x fixed
    auto xdata = random_vec(xs.elems(), 43);
    check_gradient(ws, [&](Tape& t, Var wv) {
        return conv2d(t.constant(xs, xdata), wv, t.leaf(b, false), {2, 1, 1});
    }, 8);

    // d/db
    check_gradient(Shape{1, 3, 1, 1}, [&](Tape& t, Var bv) {
        return conv2d(t.constant(xs, xdata), t.leaf(w, false), bv, {1, 1, 2});
    }, 9);
}

TEST_CASE("elementwise op gradients match finite differences") {
    const Shape s{2, 3, 4, 4};
    check_gradient(s, [](Tape&, Var x) { return relu(x); }, 11);
    check_gradient(s, [](Tape&, Var x) { return sigmoid(x); }, 12);
    check_gradient(s, [](Tape&, Var x) { return softplus(x); }, 13);
    check_gradient(s, [](Tape&, Var x) { return scale(x, -1.7); }, 14);
    check_gradient(s, [](Tape&, Var x) { return softmax_channels(x); }, 15);
    check_gradient(s, [](Tape&, Var x) { return mul(x, sigmoid(x)); }, 16);
    check_gradient(s, [](Tape&, Var x) { return add(scale(x, 2.0), sigmoid(x)); }, 17);
    check_gradient(Shape{1, 4, 4, 4}, [](Tape&, Var x) { return pixel_shuffle2(x); }, 18);
    check_gradient(s, [](Tape&, Var x) { return upsample_nearest2_op(x); }, 19);
    check_gradient(s, [](Tape&, Var x) {
        return mul_broadcast(x, slice_channels(sigmoid(x), 1, 1));
    }, 20);
    check_gradient(s, [](Tape&, Var x) {
        std::array<Var, 2> parts = {relu(x), sigmoid(x)};
        return concat_channels(parts);
    }, 21);
    // Strictly positive inputs for the power laws.
    check_gradient(s, [](Tape&, Var x) {
        return pow_const(add(sigmoid(x), sigmoid(x)), 1.0 / 2.2);
    }, 22);
    check_gradient(s, [](Tape&, Var x) { return mu_law_op(sigmoid(x), 5000.0); }, 23);
    std::vector<real> factors = {0.5, 2.0};
    check_gradient(s, [factors](Tape&, Var x) {
        return scale_per_sample(x, factors);
    }, 24);
}

TEST_CASE("softmax_channels: channels sum to one and match a manual softmax") {
    const Shape s{1, 3, 5, 5};
    auto data = random_vec(s.elems(), 77, -3.0, 3.0);
    Tape tape;
    Var y = softmax_channels(tape.constant(s, data));
    const std::size_t plane = 25;
    for (std::size_t i = 0; i < plane; ++i) {
        double sum = 0.0, manual = 0.0;
        for (int c = 0; c < 3; ++c) manual += std::exp(data[i + c * plane]);
        for (int c = 0; c < 3; ++c) {
            const double got = y.value()[i + c * plane];
            sum += got;
            CHECK(got ==
                  doctest::Approx(std::exp(data[i + c * plane]) / manual).epsilon(1e-12));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("pixel_shuffle2 follows the depth-to-space indexing") {
    const Shape s{1, 8, 2, 3};
    auto data = random_vec(s.elems(), 5);
    Tape tape;
    Var y = pixel_shuffle2(tape.constant(s, data));
    REQUIRE(y.shape() == Shape{1, 2, 4, 6});
    for (int c = 0; c < 2; ++c)
        for (int yy = 0; yy < 4; ++yy)
            for (int xx = 0; xx < 6; ++xx) {
                const int src_c = c * 4 + (yy % 2) * 2 + (xx % 2);
                const double want =
                    data[(static_cast<std::size_t>(src_c) * 2 + yy / 2) * 3 + xx / 2];
                CHECK(y.value()[(static_cast<std::size_t>(c) * 4 + yy) * 6 + xx] ==
                      doctest::Approx(want));
            }
}

TEST_CASE("masked_l1: value and empty-mask rejection") {
    Tape tape;
    const Shape s{1, 1, 2, 2};
    Var x = tape.constant(s, std::vector<real>{1.0, 2.0, 3.0, 4.0});
    std::vector<real> target = {0.0, 2.5, 3.0, 0.0};
    std::vector<real> mask = {1.0, 1.0, 1.0, 0.0};
    Var loss = masked_l1(x, target, mask);
    CHECK(loss.scalar() == doctest::Approx((1.0 + 0.5 + 0.0) / 3.0));
    std::vector<real> empty(4, 0.0);
    CHECK_THROWS_AS(masked_l1(x, target, empty), std::invalid_argument);
}

TEST_CASE("count-only tape reports conv MACs without touching data") {
    Tape tape(true);
    Var x = tape.constant_fill(Shape{1, 4, 8, 8}, 0.0);
    Parameter w("w", Shape{8, 4, 3, 3}, 36, 72), b("b", Shape{1, 8, 1, 1});
    Var y = conv2d(x, tape.leaf(w), tape.leaf(b), {1, 1, 1});
    CHECK(y.shape() == Shape{1, 8, 8, 8});
    CHECK(tape.macs() == 8ULL * 8 * 8 * 4 * 3 * 3);
    CHECK(y.value().empty());
}

TEST_CASE("ParamStore: xavier init is deterministic and range-bounded") {
    ParamStore a, b;
    auto& wa = a.create("w", Shape{8, 4, 3, 3}, 36, 72);
    auto& ba = a.create("b", Shape{1, 8, 1, 1}, 0, 0);
    auto& wb = b.create("w", Shape{8, 4, 3, 3}, 36, 72);
    b.create("b", Shape{1, 8, 1, 1}, 0, 0);
    a.xavier_init(31337);
    b.xavier_init(31337);
    CHECK(wa.value == wb.value);
    const double bound = std::sqrt(6.0 / (36 + 72));
    for (real v : wa.value) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
    for (real v : ba.value) CHECK(v == 0.0);
    CHECK_THROWS_AS(a.create("w", Shape{1, 1, 1, 1}, 0, 0), std::invalid_argument);
}

TEST_CASE("Adam: single step matches the hand-computed update") {
    ParamStore store;
    auto& p = store.create("p", Shape{1, 1, 1, 2}, 1, 1);
    p.value = {1.0, -2.0};
    p.grad = {0.5, -0.25};
    const double lr = 1e-2;
    Adam adam(store, lr);
    adam.step();
    // First step: mhat = g, vhat = g^2, update = lr * g / (|g| + eps).
    for (int i = 0; i < 2; ++i) {
        const double g = i == 0 ? 0.5 : -0.25;
        const double want = (i == 0 ? 1.0 : -2.0) - lr * g / (std::abs(g) + 1e-8);
        CHECK(p.value[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("ResBlock and Drdb keep shapes and add a residual path") {
    ParamStore store;
    ResBlock block(store, "rb", 8);
    Drdb drdb(store, "drdb", 8, 4, 3, 2);
    store.xavier_init(5);

    Tape tape;
    Var x = tape.constant(Shape{1, 8, 6, 6}, random_vec(8 * 36, 6));
    Var y = block(x);
    CHECK(y.shape() == x.shape());
    Var z = drdb(x);
    CHECK(z.shape() == x.shape());

    // Zeroed weights: both blocks collapse to the identity.
    for (auto& p : store.all()) std::fill(p->value.begin(), p->value.end(), 0.0);
    Tape tape2;
    Var x2 = tape2.constant(Shape{1, 8, 6, 6}, random_vec(8 * 36, 6));
    CHECK(block(x2).value() == x2.value());
    CHECK(drdb(x2).value() == x2.value());
}
