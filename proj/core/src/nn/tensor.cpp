#include "teq/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace teq::nn {

real* Node::grad_data() {
    if (grad.empty()) grad.assign(shape.elems(), 0.0);
    return grad.data();
}

Node* Tape::make_node(Shape shape, bool requires_grad) {
    auto node = std::make_unique<Node>();
    node->shape = shape;
    node->requires_grad = requires_grad;
    if (!count_only_) node->value.resize(shape.elems(), 0.0);
    Node* raw = node.get();
    nodes_.push_back(std::move(node));
    return raw;
}

Var Tape::constant(Shape shape, std::span<const real> data) {
    Node* n = make_node(shape, false);
    if (!count_only_) {
        if (data.size() != shape.elems())
            throw std::invalid_argument("tape: constant data size mismatch");
        std::copy(data.begin(), data.end(), n->value.begin());
    }
    return {this, n};
}

Var Tape::constant_fill(Shape shape, real fill) {
    Node* n = make_node(shape, false);
    if (!count_only_) std::fill(n->value.begin(), n->value.end(), fill);
    return {this, n};
}

Var Tape::leaf(Parameter& p, bool trainable) {
    Node* n = make_node(p.shape, trainable);
    if (!count_only_) n->value = p.value;
    if (trainable) {
        Parameter* param = &p;
        n->param = param;
        n->backward = [param](Node& self) {
            const real* g = self.grad.data();
            for (std::size_t i = 0; i < param->grad.size(); ++i) param->grad[i] += g[i];
        };
    }
    return {this, n};
}

void Tape::backward(Var loss) {
    if (count_only_) throw std::logic_error("tape: backward in count-only mode");
    if (loss.shape().elems() != 1)
        throw std::invalid_argument("tape: backward needs a scalar loss");
    loss.node()->grad_data()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node* n = it->get();
        if (!n->requires_grad || !n->backward || n->grad.empty()) continue;
        n->backward(*n);
    }
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!(a.shape() == b.shape()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

} // namespace

// --- convolution ------------------------------------------------------------

Var conv2d(Var x, Var w, Var b, const Conv2dSpec& spec) {
    Tape* tape = x.tape();
    const Shape xs = x.shape(), ws = w.shape();
    const int n_batch = xs.n, cin = xs.c, h = xs.h, wd = xs.w;
    const int cout = ws.n, kh = ws.h, kw = ws.w;
    if (ws.c != cin) throw std::invalid_argument("conv2d: channel mismatch");
    if (b.shape().elems() != static_cast<std::size_t>(cout))
        throw std::invalid_argument("conv2d: bias size mismatch");
    const int s = spec.stride, p = spec.pad, d = spec.dilation;
    const int eff_kh = (kh - 1) * d + 1, eff_kw = (kw - 1) * d + 1;
    const int oh = (h + 2 * p - eff_kh) / s + 1;
    const int ow = (wd + 2 * p - eff_kw) / s + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: empty output");

    const Shape os{n_batch, cout, oh, ow};
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    Node* out = tape->make_node(os, rg);
    tape->add_macs(os.elems() * static_cast<std::uint64_t>(cin) * kh * kw);
    if (tape->count_only()) return {tape, out};

    const real* xv = x.node()->val();
    const real* wv = w.node()->val();
    const real* bv = b.node()->val();
    real* ov = out->val();

    const std::int64_t planes = static_cast<std::int64_t>(n_batch) * cout;
#pragma omp parallel for schedule(static)
    for (std::int64_t plane = 0; plane < planes; ++plane) {
        const int n = static_cast<int>(plane / cout);
        const int oc = static_cast<int>(plane % cout);
        const real* wbase = wv + static_cast<std::size_t>(oc) * cin * kh * kw;
        real* obase = ov + static_cast<std::size_t>(plane) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const int iy0 = oy * s - p;
            for (int ox = 0; ox < ow; ++ox) {
                const int ix0 = ox * s - p;
                real acc = bv[oc];
                for (int ic = 0; ic < cin; ++ic) {
                    const real* xplane =
                        xv + (static_cast<std::size_t>(n) * cin + ic) * h * wd;
                    const real* wrow = wbase + static_cast<std::size_t>(ic) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = iy0 + ky * d;
                        if (iy < 0 || iy >= h) continue;
                        const real* xrow = xplane + static_cast<std::size_t>(iy) * wd;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ix0 + kx * d;
                            if (ix < 0 || ix >= wd) continue;
                            acc += wrow[ky * kw + kx] * xrow[ix];
                        }
                    }
                }
                obase[oy * ow + ox] = acc;
            }
        }
    }

    if (rg) {
        Node* xn = x.node();
        Node* wn = w.node();
        Node* bn = b.node();
        out->backward = [xn, wn, bn, spec, xs, ws, os](Node& self) {
            const real* gy = self.grad.data();
            const int n_batch = xs.n, cin = xs.c, h = xs.h, wd = xs.w;
            const int cout = ws.n, kh = ws.h, kw = ws.w;
            const int oh = os.h, ow = os.w;
            const int s = spec.stride, p = spec.pad, d = spec.dilation;
            const real* xv = xn->val();
            const real* wv = wn->val();

            if (bn->requires_grad) {
                real* gb = bn->grad_data();
                for (int oc = 0; oc < cout; ++oc) {
                    real acc = 0.0;
                    for (int n = 0; n < n_batch; ++n) {
                        const real* g =
                            gy + (static_cast<std::size_t>(n) * cout + oc) * oh * ow;
                        for (int i = 0; i < oh * ow; ++i) acc += g[i];
                    }
                    gb[oc] += acc;
                }
            }

            if (wn->requires_grad) {
                real* gw = wn->grad_data();
                const std::int64_t pairs = static_cast<std::int64_t>(cout) * cin;
#pragma omp parallel for schedule(static)
                for (std::int64_t pair = 0; pair < pairs; ++pair) {
                    const int oc = static_cast<int>(pair / cin);
                    const int ic = static_cast<int>(pair % cin);
                    real* gwrow = gw + (static_cast<std::size_t>(oc) * cin + ic) * kh * kw;
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            real acc = 0.0;
                            for (int n = 0; n < n_batch; ++n) {
                                const real* g =
                                    gy + (static_cast<std::size_t>(n) * cout + oc) * oh * ow;
                                const real* xplane =
                                    xv + (static_cast<std::size_t>(n) * cin + ic) * h * wd;
                                for (int oy = 0; oy < oh; ++oy) {
                                    const int iy = oy * s - p + ky * d;
                                    if (iy < 0 || iy >= h) continue;
                                    const real* xrow =
                                        xplane + static_cast<std::size_t>(iy) * wd;
                                    const real* grow = g + static_cast<std::size_t>(oy) * ow;
                                    for (int ox = 0; ox < ow; ++ox) {
                                        const int ix = ox * s - p + kx * d;
                                        if (ix < 0 || ix >= wd) continue;
                                        acc += grow[ox] * xrow[ix];
                                    }
                                }
                            }
                            gwrow[ky * kw + kx] += acc;
                        }
                }
            }

            if (xn->requires_grad) {
                real* gx = xn->grad_data();
                const std::int64_t planes = static_cast<std::int64_t>(n_batch) * cin;
#pragma omp parallel for schedule(static)
                for (std::int64_t plane = 0; plane < planes; ++plane) {
                    const int n = static_cast<int>(plane / cin);
                    const int ic = static_cast<int>(plane % cin);
                    real* gxplane = gx + static_cast<std::size_t>(plane) * h * wd;
                    for (int iy = 0; iy < h; ++iy)
                        for (int ix = 0; ix < wd; ++ix) {
                            real acc = 0.0;
                            for (int ky = 0; ky < kh; ++ky) {
                                const int oy_num = iy + p - ky * d;
                                if (oy_num < 0 || oy_num % s != 0) continue;
                                const int oy = oy_num / s;
                                if (oy >= oh) continue;
                                for (int kx = 0; kx < kw; ++kx) {
                                    const int ox_num = ix + p - kx * d;
                                    if (ox_num < 0 || ox_num % s != 0) continue;
                                    const int ox = ox_num / s;
                                    if (ox >= ow) continue;
                                    for (int oc = 0; oc < cout; ++oc) {
                                        const real wgt =
                                            wv[((static_cast<std::size_t>(oc) * cin + ic) * kh +
                                                ky) * kw + kx];
                                        const real g =
                                            gy[((static_cast<std::size_t>(n) * cout + oc) * oh +
                                                oy) * ow + ox];
                                        acc += wgt * g;
                                    }
                                }
                            }
                            gxplane[static_cast<std::size_t>(iy) * wd + ix] += acc;
                        }
                }
            }
        };
    }
    return {tape, out};
}

// --- elementwise ------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(Var x, Fwd fwd, Bwd bwd_factor) {
    Tape* tape = x.tape();
    Node* out = tape->make_node(x.shape(), x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    real* ov = out->val();
    const std::size_t n = x.shape().elems();
    for (std::size_t i = 0; i < n; ++i) ov[i] = fwd(xv[i]);
    if (out->requires_grad) {
        Node* xn = x.node();
        out->backward = [xn, bwd_factor](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            const real* xv = xn->val();
            const real* yv = self.val();
            for (std::size_t i = 0; i < self.shape.elems(); ++i)
                gx[i] += gy[i] * bwd_factor(xv[i], yv[i]);
        };
    }
    return {tape, out};
}

} // namespace

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tape* tape = a.tape();
    const bool rg = a.requires_grad() || b.requires_grad();
    Node* out = tape->make_node(a.shape(), rg);
    if (tape->count_only()) return {tape, out};
    const real* av = a.node()->val();
    const real* bv = b.node()->val();
    real* ov = out->val();
    for (std::size_t i = 0; i < a.shape().elems(); ++i) ov[i] = av[i] + bv[i];
    if (rg) {
        Node* an = a.node();
        Node* bn = b.node();
        out->backward = [an, bn](Node& self) {
            const real* gy = self.grad.data();
            const std::size_t n = self.shape.elems();
            if (an->requires_grad) {
                real* g = an->grad_data();
                for (std::size_t i = 0; i < n; ++i) g[i] += gy[i];
            }
            if (bn->requires_grad) {
                real* g = bn->grad_data();
                for (std::size_t i = 0; i < n; ++i) g[i] += gy[i];
            }
        };
    }
    return {tape, out};
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tape* tape = a.tape();
    const bool rg = a.requires_grad() || b.requires_grad();
    Node* out = tape->make_node(a.shape(), rg);
    if (tape->count_only()) return {tape, out};
    const real* av = a.node()->val();
    const real* bv = b.node()->val();
    real* ov = out->val();
    for (std::size_t i = 0; i < a.shape().elems(); ++i) ov[i] = av[i] - bv[i];
    if (rg) {
        Node* an = a.node();
        Node* bn = b.node();
        out->backward = [an, bn](Node& self) {
            const real* gy = self.grad.data();
            const std::size_t n = self.shape.elems();
            if (an->requires_grad) {
                real* g = an->grad_data();
                for (std::size_t i = 0; i < n; ++i) g[i] += gy[i];
            }
            if (bn->requires_grad) {
                real* g = bn->grad_data();
                for (std::size_t i = 0; i < n; ++i) g[i] -= gy[i];
            }
        };
    }
    return {tape, out};
}

Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Tape* tape = a.tape();
    const bool rg = a.requires_grad() || b.requires_grad();
    Node* out = tape->make_node(a.shape(), rg);
    if (tape->count_only()) return {tape, out};
    const real* av = a.node()->val();
    const real* bv = b.node()->val();
    real* ov = out->val();
    for (std::size_t i = 0; i < a.shape().elems(); ++i) ov[i] = av[i] * bv[i];
    if (rg) {
        Node* an = a.node();
        Node* bn = b.node();
        out->backward = [an, bn](Node& self) {
            const real* gy = self.grad.data();
            const std::size_t n = self.shape.elems();
            if (an->requires_grad) {
                real* g = an->grad_data();
                const real* bv = bn->val();
                for (std::size_t i = 0; i < n; ++i) g[i] += gy[i] * bv[i];
            }
            if (bn->requires_grad) {
                real* g = bn->grad_data();
                const real* av = an->val();
                for (std::size_t i = 0; i < n; ++i) g[i] += gy[i] * av[i];
            }
        };
    }
    return {tape, out};
}

Var mul_broadcast(Var x, Var m) {
    const Shape xs = x.shape(), ms = m.shape();
    if (ms.n != xs.n || ms.c != 1 || ms.h != xs.h || ms.w != xs.w)
        throw std::invalid_argument("mul_broadcast: map must be (N,1,H,W)");
    Tape* tape = x.tape();
    const bool rg = x.requires_grad() || m.requires_grad();
    Node* out = tape->make_node(xs, rg);
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    const real* mv = m.node()->val();
    real* ov = out->val();
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const real* mp = mv + static_cast<std::size_t>(n) * plane;
            const real* xp = xv + (static_cast<std::size_t>(n) * xs.c + c) * plane;
            real* op = ov + (static_cast<std::size_t>(n) * xs.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) op[i] = xp[i] * mp[i];
        }
    if (rg) {
        Node* xn = x.node();
        Node* mn = m.node();
        out->backward = [xn, mn, xs](Node& self) {
            const real* gy = self.grad.data();
            const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
            if (xn->requires_grad) {
                real* gx = xn->grad_data();
                const real* mv = mn->val();
                for (int n = 0; n < xs.n; ++n)
                    for (int c = 0; c < xs.c; ++c) {
                        const real* mp = mv + static_cast<std::size_t>(n) * plane;
                        const std::size_t off =
                            (static_cast<std::size_t>(n) * xs.c + c) * plane;
                        for (std::size_t i = 0; i < plane; ++i)
                            gx[off + i] += gy[off + i] * mp[i];
                    }
            }
            if (mn->requires_grad) {
                real* gm = mn->grad_data();
                const real* xv = xn->val();
                for (int n = 0; n < xs.n; ++n) {
                    real* gmp = gm + static_cast<std::size_t>(n) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        real acc = 0.0;
                        for (int c = 0; c < xs.c; ++c) {
                            const std::size_t off =
                                (static_cast<std::size_t>(n) * xs.c + c) * plane;
                            acc += gy[off + i] * xv[off + i];
                        }
                        gmp[i] += acc;
                    }
                }
            }
        };
    }
    return {tape, out};
}

Var mul_data(Var x, std::span<const real> data) {
    Tape* tape = x.tape();
    Node* out = tape->make_node(x.shape(), x.requires_grad());
    if (tape->count_only()) return {tape, out};
    if (data.size() != x.shape().elems())
        throw std::invalid_argument("mul_data: size mismatch");
    const real* xv = x.node()->val();
    real* ov = out->val();
    for (std::size_t i = 0; i < data.size(); ++i) ov[i] = xv[i] * data[i];
    if (out->requires_grad) {
        Node* xn = x.node();
        std::vector<real> held(data.begin(), data.end());
        out->backward = [xn, held = std::move(held)](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            for (std::size_t i = 0; i < held.size(); ++i) gx[i] += gy[i] * held[i];
        };
    }
    return {tape, out};
}

Var scale(Var x, real s) {
    return unary_op(
        x, [s](real v) { return v * s; }, [s](real, real) { return s; });
}

Var scale_per_sample(Var x, std::span<const real> factors) {
    const Shape xs = x.shape();
    if (factors.size() != static_cast<std::size_t>(xs.n))
        throw std::invalid_argument("scale_per_sample: need one factor per sample");
    Tape* tape = x.tape();
    Node* out = tape->make_node(xs, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    real* ov = out->val();
    const std::size_t per = xs.elems() / xs.n;
    for (int n = 0; n < xs.n; ++n)
        for (std::size_t i = 0; i < per; ++i)
            ov[n * per + i] = xv[n * per + i] * factors[n];
    if (out->requires_grad) {
        Node* xn = x.node();
        std::vector<real> held(factors.begin(), factors.end());
        out->backward = [xn, held = std::move(held), per](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            for (std::size_t n = 0; n < held.size(); ++n)
                for (std::size_t i = 0; i < per; ++i)
                    gx[n * per + i] += gy[n * per + i] * held[n];
        };
    }
    return {tape, out};
}

Var concat_channels(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    Tape* tape = parts[0].tape();
    const Shape first = parts[0].shape();
    int total_c = 0;
    bool rg = false;
    for (const Var& p : parts) {
        const Shape s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w)
            throw std::invalid_argument("concat: spatial shape mismatch");
        total_c += s.c;
        rg = rg || p.requires_grad();
    }
    const Shape os{first.n, total_c, first.h, first.w};
    Node* out = tape->make_node(os, rg);
    if (tape->count_only()) return {tape, out};

    const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
    real* ov = out->val();
    int c0 = 0;
    for (const Var& p : parts) {
        const Shape s = p.shape();
        const real* pv = p.node()->val();
        for (int n = 0; n < s.n; ++n)
            std::memcpy(ov + (static_cast<std::size_t>(n) * total_c + c0) * plane,
                        pv + static_cast<std::size_t>(n) * s.c * plane,
                        static_cast<std::size_t>(s.c) * plane * sizeof(real));
        c0 += s.c;
    }
    if (rg) {
        std::vector<Node*> nodes;
        std::vector<int> widths;
        for (const Var& p : parts) {
            nodes.push_back(p.node());
            widths.push_back(p.shape().c);
        }
        out->backward = [nodes, widths, os, plane](Node& self) {
            const real* gy = self.grad.data();
            int c0 = 0;
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                Node* part = nodes[k];
                const int pc = widths[k];
                if (part->requires_grad) {
                    real* gp = part->grad_data();
                    for (int n = 0; n < os.n; ++n) {
                        const real* src =
                            gy + (static_cast<std::size_t>(n) * os.c + c0) * plane;
                        real* dst = gp + static_cast<std::size_t>(n) * pc * plane;
                        for (std::size_t i = 0; i < static_cast<std::size_t>(pc) * plane; ++i)
                            dst[i] += src[i];
                    }
                }
                c0 += pc;
            }
        };
    }
    return {tape, out};
}

Var slice_channels(Var x, int first, int count) {
    const Shape xs = x.shape();
    if (first < 0 || count < 1 || first + count > xs.c)
        throw std::invalid_argument("slice_channels: range out of bounds");
    Tape* tape = x.tape();
    const Shape os{xs.n, count, xs.h, xs.w};
    Node* out = tape->make_node(os, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    const real* xv = x.node()->val();
    real* ov = out->val();
    for (int n = 0; n < xs.n; ++n)
        std::memcpy(ov + static_cast<std::size_t>(n) * count * plane,
                    xv + (static_cast<std::size_t>(n) * xs.c + first) * plane,
                    static_cast<std::size_t>(count) * plane * sizeof(real));
    if (out->requires_grad) {
        Node* xn = x.node();
        out->backward = [xn, xs, first, count, plane](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            for (int n = 0; n < xs.n; ++n) {
                real* dst = gx + (static_cast<std::size_t>(n) * xs.c + first) * plane;
                const real* src = gy + static_cast<std::size_t>(n) * count * plane;
                for (std::size_t i = 0; i < static_cast<std::size_t>(count) * plane; ++i)
                    dst[i] += src[i];
            }
        };
    }
    return {tape, out};
}

Var relu(Var x) {
    return unary_op(
        x, [](real v) { return v > 0.0 ? v : 0.0; },
        [](real v, real) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
    return unary_op(
        x, [](real v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](real, real y) { return y * (1.0 - y); });
}

Var softplus(Var x) {
    return unary_op(
        x,
        [](real v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
        [](real v, real) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var pow_const(Var x, real p) {
    return unary_op(
        x, [p](real v) { return v > 0.0 ? std::pow(v, p) : 0.0; },
        [p](real v, real) { return v > 0.0 ? p * std::pow(v, p - 1.0) : 0.0; });
}

Var mu_law_op(Var x, real mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("mu_law: mu must be > 0");
    const real inv_log = 1.0 / std::log1p(mu);
    return unary_op(
        x, [mu, inv_log](real v) { return std::log1p(mu * v) * inv_log; },
        [mu, inv_log](real v, real) { return mu * inv_log / (1.0 + mu * v); });
}

Var softmax_channels(Var x) {
    const Shape xs = x.shape();
    Tape* tape = x.tape();
    Node* out = tape->make_node(xs, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    real* ov = out->val();
    const std::size_t plane = static_cast<std::size_t>(xs.h) * xs.w;
    for (int n = 0; n < xs.n; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            const std::size_t base = static_cast<std::size_t>(n) * xs.c * plane + i;
            real mx = xv[base];
            for (int c = 1; c < xs.c; ++c) mx = std::max(mx, xv[base + c * plane]);
            real sum = 0.0;
            for (int c = 0; c < xs.c; ++c) {
                const real e = std::exp(xv[base + c * plane] - mx);
                ov[base + c * plane] = e;
                sum += e;
            }
            const real inv = 1.0 / sum;
            for (int c = 0; c < xs.c; ++c) ov[base + c * plane] *= inv;
        }
    if (out->requires_grad) {
        Node* xn = x.node();
        out->backward = [xn, xs, plane](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            const real* yv = self.val();
            for (int n = 0; n < xs.n; ++n)
                for (std::size_t i = 0; i < plane; ++i) {
                    const std::size_t base = static_cast<std::size_t>(n) * xs.c * plane + i;
                    real dot = 0.0;
                    for (int c = 0; c < xs.c; ++c)
                        dot += gy[base + c * plane] * yv[base + c * plane];
                    for (int c = 0; c < xs.c; ++c)
                        gx[base + c * plane] +=
                            yv[base + c * plane] * (gy[base + c * plane] - dot);
                }
        };
    }
    return {tape, out};
}

Var pixel_shuffle2(Var x) {
    const Shape xs = x.shape();
    if (xs.c % 4 != 0) throw std::invalid_argument("pixel_shuffle2: channels must divide 4");
    const Shape os{xs.n, xs.c / 4, xs.h * 2, xs.w * 2};
    Tape* tape = x.tape();
    Node* out = tape->make_node(os, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    real* ov = out->val();
    auto xi = [&](int n, int c, int y, int w) {
        return ((static_cast<std::size_t>(n) * xs.c + c) * xs.h + y) * xs.w + w;
    };
    auto oi = [&](int n, int c, int y, int w) {
        return ((static_cast<std::size_t>(n) * os.c + c) * os.h + y) * os.w + w;
    };
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < os.c; ++c)
            for (int y = 0; y < xs.h; ++y)
                for (int w = 0; w < xs.w; ++w)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            ov[oi(n, c, 2 * y + dy, 2 * w + dx)] =
                                xv[xi(n, c * 4 + dy * 2 + dx, y, w)];
    if (out->requires_grad) {
        Node* xn = x.node();
        out->backward = [xn, xs, os](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            auto xi = [&](int n, int c, int y, int w) {
                return ((static_cast<std::size_t>(n) * xs.c + c) * xs.h + y) * xs.w + w;
            };
            auto oi = [&](int n, int c, int y, int w) {
                return ((static_cast<std::size_t>(n) * os.c + c) * os.h + y) * os.w + w;
            };
            for (int n = 0; n < xs.n; ++n)
                for (int c = 0; c < os.c; ++c)
                    for (int y = 0; y < xs.h; ++y)
                        for (int w = 0; w < xs.w; ++w)
                            for (int dy = 0; dy < 2; ++dy)
                                for (int dx = 0; dx < 2; ++dx)
                                    gx[xi(n, c * 4 + dy * 2 + dx, y, w)] +=
                                        gy[oi(n, c, 2 * y + dy, 2 * w + dx)];
        };
    }
    return {tape, out};
}

Var upsample_nearest2_op(Var x) {
    const Shape xs = x.shape();
    const Shape os{xs.n, xs.c, xs.h * 2, xs.w * 2};
    Tape* tape = x.tape();
    Node* out = tape->make_node(os, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const real* xv = x.node()->val();
    real* ov = out->val();
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const real* xp = xv + (static_cast<std::size_t>(n) * xs.c + c) * xs.h * xs.w;
            real* op = ov + (static_cast<std::size_t>(n) * os.c + c) * os.h * os.w;
            for (int y = 0; y < os.h; ++y)
                for (int w = 0; w < os.w; ++w)
                    op[static_cast<std::size_t>(y) * os.w + w] =
                        xp[static_cast<std::size_t>(y / 2) * xs.w + w / 2];
        }
    if (out->requires_grad) {
        Node* xn = x.node();
        out->backward = [xn, xs, os](Node& self) {
            real* gx = xn->grad_data();
            const real* gy = self.grad.data();
            for (int n = 0; n < xs.n; ++n)
                for (int c = 0; c < xs.c; ++c) {
                    real* gxp =
                        gx + (static_cast<std::size_t>(n) * xs.c + c) * xs.h * xs.w;
                    const real* gyp =
                        gy + (static_cast<std::size_t>(n) * os.c + c) * os.h * os.w;
                    for (int y = 0; y < os.h; ++y)
                        for (int w = 0; w < os.w; ++w)
                            gxp[static_cast<std::size_t>(y / 2) * xs.w + w / 2] +=
                                gyp[static_cast<std::size_t>(y) * os.w + w];
                }
        };
    }
    return {tape, out};
}

Var masked_l1(Var x, std::span<const real> target, std::span<const real> mask) {
    Tape* tape = x.tape();
    Node* out = tape->make_node(Shape{1, 1, 1, 1}, x.requires_grad());
    if (tape->count_only()) return {tape, out};
    const std::size_t n = x.shape().elems();
    if (target.size() != n || mask.size() != n)
        throw std::invalid_argument("masked_l1: size mismatch");
    real msum = 0.0;
    for (real m : mask) msum += m;
    if (!(msum > 0.0)) throw std::invalid_argument("masked_l1: empty mask");
    const real* xv = x.node()->val();
    real acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += mask[i] * std::abs(xv[i] - target[i]);
    out->val()[0] = acc / msum;
    if (out->requires_grad) {
        Node* xn = x.node();
        std::vector<real> t(target.begin(), target.end());
        std::vector<real> m(mask.begin(), mask.end());
        out->backward = [xn, t = std::move(t), m = std::move(m), msum](Node& self) {
            real* gx = xn->grad_data();
            const real gy = self.grad[0];
            const real* xv = xn->val();
            const real inv = gy / msum;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const real diff = xv[i] - t[i];
                const real sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                gx[i] += inv * m[i] * sgn;
            }
        };
    }
    return {tape, out};
}

} // namespace teq::nn
