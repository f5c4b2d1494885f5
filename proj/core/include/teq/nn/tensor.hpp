#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace teq::nn {

using real = double;

/// NCHW shape; parameters reuse the fields as (out, in, kh, kw).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    std::size_t elems() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
};

/// Trainable tensor owned by a ParamStore. Gradients accumulate across a
/// backward pass and are cleared by zero_grad().
struct Parameter {
    std::string name;
    Shape shape;
    std::vector<real> value;
    std::vector<real> grad;
    int fan_in = 0;  ///< 0 marks bias-like parameters (zero-initialized)
    int fan_out = 0;

    explicit Parameter(std::string n, Shape s, int fi = 0, int fo = 0)
        : name(std::move(n)), shape(s), value(s.elems(), 0.0), grad(s.elems(), 0.0),
          fan_in(fi), fan_out(fo) {}
};

class Tape;

struct Node {
    Shape shape;
    std::vector<real> value;
    std::vector<real> grad;
    bool requires_grad = false;
    Parameter* param = nullptr; ///< set on trainable leaves
    std::function<void(Node&)> backward;

    real* grad_data();
    const real* val() const { return value.data(); }
    real* val() { return value.data(); }
};

/// Handle to a node on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, Node* node) : tape_(tape), node_(node) {}

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    const std::vector<real>& value() const { return node_->value; }
    std::vector<real>& mutable_value() { return node_->value; }
    const std::vector<real>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    real scalar() const { return node_->value.at(0); }

    Tape* tape() const { return tape_; }
    Node* node() const { return node_; }

private:
    Tape* tape_ = nullptr;
    Node* node_ = nullptr;
};

/// Define-by-run reverse-mode tape. Ops compute values eagerly at creation;
/// backward() walks nodes in reverse creation order (a topological order by
/// construction). In count-only mode ops propagate shapes and accumulate MAC
/// counts without touching data — used by the complexity reporter.
class Tape {
public:
    Tape() = default;
    explicit Tape(bool count_only) : count_only_(count_only) {}

    Var constant(Shape shape, std::span<const real> data);
    Var constant_fill(Shape shape, real fill);
    /// Leaf for a parameter; trainable leaves receive gradients.
    Var leaf(Parameter& p, bool trainable = true);

    void backward(Var loss);

    bool count_only() const { return count_only_; }
    std::uint64_t macs() const { return macs_; }
    void add_macs(std::uint64_t m) { macs_ += m; }

    Node* make_node(Shape shape, bool requires_grad);
    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<std::unique_ptr<Node>> nodes_;
    bool count_only_ = false;
    std::uint64_t macs_ = 0;
};

struct Conv2dSpec {
    int stride = 1;
    int pad = 1;
    int dilation = 1;
};

// --- operations -----------------------------------------------------------

/// 2-D convolution; x (N,Cin,H,W), w (Cout,Cin,KH,KW), b (1,Cout,1,1).
Var conv2d(Var x, Var w, Var b, const Conv2dSpec& spec);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x (N,C,H,W) * m (N,1,H,W), m broadcast over channels.
Var mul_broadcast(Var x, Var m);
/// Elementwise product with a constant array (no gradient into the data).
Var mul_data(Var x, std::span<const real> data);
Var scale(Var x, real s);
/// Multiplies every element of sample n by factors[n].
Var scale_per_sample(Var x, std::span<const real> factors);

Var concat_channels(std::span<const Var> parts);
Var slice_channels(Var x, int first, int count);

Var relu(Var x);
Var sigmoid(Var x);
Var softplus(Var x);
/// Softmax across the channel dimension, per (n, y, x).
Var softmax_channels(Var x);
/// x^p for x > 0, 0 otherwise.
Var pow_const(Var x, real p);
/// log(1 + mu*x) / log(1 + mu).
Var mu_law_op(Var x, real mu);

/// Depth-to-space: (N, 4C, H, W) -> (N, C, 2H, 2W).
Var pixel_shuffle2(Var x);
Var upsample_nearest2_op(Var x);

/// sum(mask * |x - target|) / sum(mask) as a scalar node. mask sum must be
/// positive; target and mask carry no gradient.
Var masked_l1(Var x, std::span<const real> target, std::span<const real> mask);

} // namespace teq::nn
