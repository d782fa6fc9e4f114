#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sdci/tensor.hpp"

namespace sdci {

// Named, insertion-ordered parameter registry. Order is part of the contract:
// optimizer slots and checkpoint records follow it.
template <typename T>
class ParameterStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        if (find(name) != nullptr) throw ContractError("duplicate parameter: " + name);
        t.enable_grad();
        items_.emplace_back(name, std::move(t));
        return items_.back().second;
    }

    Tensor<T>& get(const std::string& name) {
        Tensor<T>* t = find(name);
        if (!t) throw ContractError("unknown parameter: " + name);
        return *t;
    }

    const Tensor<T>& get(const std::string& name) const {
        return const_cast<ParameterStore*>(this)->get(name);
    }

    bool has(const std::string& name) const {
        return const_cast<ParameterStore*>(this)->find(name) != nullptr;
    }

    std::size_t count() const { return items_.size(); }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    void zero_grad() {
        for (auto& [name, t] : items_) t.zero_grad();
    }

private:
    Tensor<T>* find(const std::string& name) {
        for (auto& [n, t] : items_)
            if (n == name) return &t;
        return nullptr;
    }

    std::vector<std::pair<std::string, Tensor<T>>> items_;
};

// y = x W + b, W: [in, out]. Xavier-uniform init.
template <typename T>
class Linear {
public:
    Linear() = default;

    Linear(ParameterStore<T>& params, const std::string& prefix, std::size_t in, std::size_t out,
           RngStream& rng) {
        Tensor<T> w({in, out});
        T limit = std::sqrt(T(6) / static_cast<T>(in + out));
        for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-double(limit), double(limit)));
        // tensors are shallow handles, so these share storage with the registry
        weight_ = params.add(prefix + ".weight", std::move(w));
        bias_ = params.add(prefix + ".bias", Tensor<T>::zeros({out}));
    }

    Tensor<T> operator()(const Tensor<T>& x) const {
        return add_rowvec(matmul(x, weight_), bias_);
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }

private:
    Tensor<T> weight_, bias_;
};

template <typename T>
class BatchNorm {
public:
    BatchNorm() = default;

    BatchNorm(ParameterStore<T>& params, const std::string& prefix, std::size_t width) {
        gamma_ = params.add(prefix + ".scale", Tensor<T>::ones({width}));
        beta_ = params.add(prefix + ".shift", Tensor<T>::zeros({width}));
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return batch_norm(x, gamma_, beta_); }

private:
    Tensor<T> gamma_, beta_;
};

// fc -> ELU -> fc -> ELU, with optional batch norm on the output
// (the normalization keeps deep encoder stacks trainable; decoders skip it)
template <typename T>
class Mlp2 {
public:
    Mlp2() = default;

    Mlp2(ParameterStore<T>& params, const std::string& prefix, std::size_t in, std::size_t hidden,
         std::size_t out, RngStream& rng, bool norm)
        : fc1_(params, prefix + ".fc1", in, hidden, rng),
          fc2_(params, prefix + ".fc2", hidden, out, rng),
          use_norm_(norm) {
        if (norm) bn_ = BatchNorm<T>(params, prefix + ".norm", out);
    }

    Tensor<T> operator()(const Tensor<T>& x) const {
        Tensor<T> h = elu(fc2_(elu(fc1_(x))));
        return use_norm_ ? bn_(h) : h;
    }

private:
    Linear<T> fc1_, fc2_;
    BatchNorm<T> bn_;
    bool use_norm_ = false;
};

} // namespace sdci
