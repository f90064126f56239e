#include "sqa/nn.hpp"

#include <stdexcept>

namespace sqa {

int ParamStore::add(std::string name, Matrix value) {
    if (lookup_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    const int slot = static_cast<int>(tensors_.size());
    lookup_.emplace(name, slot);
    tensors_.push_back({std::move(name), std::move(value)});
    return slot;
}

int ParamStore::slot(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
}

std::size_t ParamStore::num_scalars() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
}

Gradients ParamStore::zero_gradients() const {
    Gradients g;
    g.reserve(tensors_.size());
    for (const auto& t : tensors_) g.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    return g;
}

Gradients ParamStore::zero_gradients(int sparse_slot) const {
    Gradients g = zero_gradients();
    g[static_cast<std::size_t>(sparse_slot)].resize(0, 0);
    return g;
}

bool ParamStore::all_finite() const {
    for (const auto& t : tensors_)
        if (!t.value.allFinite()) return false;
    return true;
}

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, real stddev, Rng& rng) {
    std::normal_distribution<real> dist(0.0, stddev);
    Matrix m(rows, cols);
    // Row-major fill keeps the draw order independent of Eigen's storage.
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

Linear Linear::create(ParamStore& params, const std::string& name, int in, int out, real init_std, Rng& rng) {
    Linear l;
    l.weight = params.add(name + ".weight", random_normal(in, out, init_std, rng));
    l.bias = params.add(name + ".bias", Matrix::Zero(1, out));
    return l;
}

Var Linear::operator()(Tape& tape, const ParamStore& params, Var x) const {
    return ad::add_row(ad::matmul(x, params.leaf(tape, weight)), params.leaf(tape, bias));
}

}  // namespace sqa
