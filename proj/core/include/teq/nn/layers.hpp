#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "teq/nn/tensor.hpp"

namespace teq::nn {

/// Owns all trainable parameters of a model, in registration order.
class ParamStore {
public:
    Parameter& create(const std::string& name, Shape shape, int fan_in, int fan_out);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;

    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
    std::size_t total_size() const;
    void zero_grad();

    /// Glorot-uniform weights, zero biases; deterministic in registration order.
    void xavier_init(std::uint64_t seed);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

/// 3x3 (or kxk) convolution layer; padding preserves size at stride 1.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch,
           int ksize = 3, int stride = 1, int dilation = 1, bool trainable = true);

    Var operator()(Var x) const;
    std::int64_t param_count() const;

private:
    Parameter* w_ = nullptr;
    Parameter* b_ = nullptr;
    Conv2dSpec spec_;
    bool trainable_ = true;
};

/// conv-relu-conv with identity skip (no normalization).
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(ParamStore& store, const std::string& name, int channels);
    Var operator()(Var x) const;

private:
    Conv2d c1_, c2_;
};

/// Dilated residual dense block: densely connected dilated 3x3 convolutions,
/// 1x1 local fusion, local residual.
class Drdb {
public:
    Drdb() = default;
    Drdb(ParamStore& store, const std::string& name, int channels, int growth,
         int layers = 3, int dilation = 2);
    Var operator()(Var x) const;

private:
    std::vector<Conv2d> convs_;
    Conv2d fuse_;
};

/// Adam with bias correction; state is aligned with the store's order.
class Adam {
public:
    explicit Adam(ParamStore& store, double lr = 1e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void step();
    double learning_rate() const { return lr_; }

private:
    ParamStore& store_;
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<std::vector<real>> m_, v_;
};

} // namespace teq::nn
