#include "teq/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "teq/rng.hpp"

namespace teq::nn {

Parameter& ParamStore::create(const std::string& name, Shape shape, int fan_in,
                              int fan_out) {
    if (by_name_.contains(name))
        throw std::invalid_argument("param store: duplicate name " + name);
    params_.push_back(std::make_unique<Parameter>(name, shape, fan_in, fan_out));
    Parameter* p = params_.back().get();
    by_name_[name] = p;
    return *p;
}

Parameter* ParamStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void ParamStore::xavier_init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : params_) {
        if (p->fan_in <= 0) {
            std::fill(p->value.begin(), p->value.end(), 0.0);
            continue;
        }
        const double a = std::sqrt(6.0 / (p->fan_in + p->fan_out));
        for (real& v : p->value) v = rng.uniform(-a, a);
    }
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch,
               int ksize, int stride, int dilation, bool trainable)
    : trainable_(trainable) {
    const int fan_in = in_ch * ksize * ksize;
    const int fan_out = out_ch * ksize * ksize;
    w_ = &store.create(name + ".w", Shape{out_ch, in_ch, ksize, ksize}, fan_in, fan_out);
    b_ = &store.create(name + ".b", Shape{1, out_ch, 1, 1}, 0, 0);
    spec_.stride = stride;
    spec_.dilation = dilation;
    spec_.pad = dilation * (ksize - 1) / 2;
}

Var Conv2d::operator()(Var x) const {
    Tape* tape = x.tape();
    Var w = tape->leaf(*w_, trainable_);
    Var b = tape->leaf(*b_, trainable_);
    return conv2d(x, w, b, spec_);
}

std::int64_t Conv2d::param_count() const {
    return static_cast<std::int64_t>(w_->value.size() + b_->value.size());
}

ResBlock::ResBlock(ParamStore& store, const std::string& name, int channels)
    : c1_(store, name + ".conv1", channels, channels),
      c2_(store, name + ".conv2", channels, channels) {}

Var ResBlock::operator()(Var x) const { return add(x, c2_(relu(c1_(x)))); }

Drdb::Drdb(ParamStore& store, const std::string& name, int channels, int growth,
           int layers, int dilation) {
    int width = channels;
    for (int i = 0; i < layers; ++i) {
        convs_.emplace_back(store, name + ".dense" + std::to_string(i), width, growth, 3,
                            1, dilation);
        width += growth;
    }
    fuse_ = Conv2d(store, name + ".fuse", width, channels, 1);
}

Var Drdb::operator()(Var x) const {
    std::vector<Var> stack{x};
    Var cur = x;
    for (const Conv2d& conv : convs_) {
        Var grown = relu(conv(cur));
        stack.push_back(grown);
        cur = concat_channels(stack);
    }
    return add(x, fuse_(cur));
}

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : store_.all()) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(beta1_, step_count_);
    const double bc2 = 1.0 - std::pow(beta2_, step_count_);
    const auto& params = store_.all();
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

} // namespace teq::nn
