#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sdci/nn.hpp"

namespace sdci {

// Adam with per-name-prefix learning-rate groups (encoder./decoder. in
// practice) and bias correction. The trainer owns the schedule and passes a
// multiplicative decay through lr_scale.
template <typename T>
class Adam {
public:
    struct Group {
        std::string prefix;
        T lr;
    };

    struct Slot {
        std::vector<T> m, v;
    };

    Adam(ParameterStore<T>& params, std::vector<Group> groups, T beta1 = T(0.9),
         T beta2 = T(0.999), T eps = T(1e-8))
        : params_(&params), groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& [name, t] : params) {
            if (!t.requires_grad())
                throw ContractError("optimizer given parameter without grad: " + name);
            lr_.push_back(group_lr(name));
            slots_.push_back({std::vector<T>(t.size(), T(0)), std::vector<T>(t.size(), T(0))});
        }
    }

    // One update from the gradients currently held by the parameters.
    // Gradients are zeroed afterwards so steps never mix.
    void step() {
        ++t_;
        T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
        T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
        std::size_t p = 0;
        for (auto& [name, param] : *params_) {
            Slot& s = slots_[p];
            T lr = lr_[p] * lr_scale_;
            auto g = param.grad();
            auto w = param.data();
            for (std::size_t i = 0; i < w.size(); ++i) {
                s.m[i] = beta1_ * s.m[i] + (T(1) - beta1_) * g[i];
                s.v[i] = beta2_ * s.v[i] + (T(1) - beta2_) * g[i] * g[i];
                T mhat = s.m[i] / c1;
                T vhat = s.v[i] / c2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
            param.zero_grad();
            ++p;
        }
    }

    void set_lr_scale(T s) { lr_scale_ = s; }
    T lr_scale() const { return lr_scale_; }

    std::uint64_t step_count() const { return t_; }
    void set_step_count(std::uint64_t t) { t_ = t; }

    std::vector<Slot>& slots() { return slots_; }
    const std::vector<Slot>& slots() const { return slots_; }

private:
    T group_lr(const std::string& name) const {
        for (const auto& g : groups_)
            if (name.rfind(g.prefix, 0) == 0) return g.lr;
        throw ContractError("parameter matches no optimizer group: " + name);
    }

    ParameterStore<T>* params_;
    std::vector<Group> groups_;
    T beta1_, beta2_, eps_;
    T lr_scale_ = T(1);
    std::uint64_t t_ = 0;
    std::vector<T> lr_;
    std::vector<Slot> slots_;
};

} // namespace sdci
