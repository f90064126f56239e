#pragma once

#include "sqa/autodiff.hpp"
#include "sqa/common.hpp"

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace sqa {

using Tape = ad::Tape<real>;
using Var = ad::Var<real>;
using Gradients = ad::GradientSink<real>;
using Rng = std::mt19937_64;

struct Tensor {
    std::string name;
    Matrix value;
};

/// Owns every trainable tensor. A tensor's slot is its position here.
class ParamStore {
public:
    int add(std::string name, Matrix value);
    int slot(const std::string& name) const;  // throws std::out_of_range
    bool contains(const std::string& name) const { return lookup_.count(name) != 0; }

    Tensor& operator[](int slot) { return tensors_[static_cast<std::size_t>(slot)]; }
    const Tensor& operator[](int slot) const { return tensors_[static_cast<std::size_t>(slot)]; }
    std::size_t size() const { return tensors_.size(); }
    std::size_t num_scalars() const;

    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::vector<Tensor>& tensors() { return tensors_; }

    Gradients zero_gradients() const;
    /// Same, but `sparse_slot` is left empty so gathered rows collect sparsely.
    Gradients zero_gradients(int sparse_slot) const;

    /// Binds a parameter as a tape leaf.
    Var leaf(Tape& tape, int slot) const { return tape.parameter(tensors_[static_cast<std::size_t>(slot)].value, slot); }

    bool all_finite() const;

private:
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, int> lookup_;
};

/// Replaces tanh/relu by the identity. Used only by the gradient check's
/// linear variant.
struct Activations {
    bool linear = false;
    Var tanh(Var x) const { return linear ? x : ad::tanh(x); }
    Var relu(Var x) const { return linear ? x : ad::relu(x); }
};

/// y = x W + b, rows of x are items.
struct Linear {
    int weight = -1;
    int bias = -1;

    static Linear create(ParamStore& params, const std::string& name, int in, int out, real init_std, Rng& rng);
    Var operator()(Tape& tape, const ParamStore& params, Var x) const;
    int in_features(const ParamStore& params) const { return static_cast<int>(params[weight].value.rows()); }
    int out_features(const ParamStore& params) const { return static_cast<int>(params[weight].value.cols()); }
};

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, real stddev, Rng& rng);

}  // namespace sqa
