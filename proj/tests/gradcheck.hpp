#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "sdci/tensor.hpp"

// Central finite differences against the tape, elementwise over every listed
// tensor. Tolerance is on the relative error with a unit floor.
inline void check_grads_fd(const std::function<sdci::Tensor<double>()>& loss_fn,
                           const std::vector<sdci::Tensor<double>>& params,
                           double tol = 1e-5, double h = 1e-6) {
    using namespace sdci;
    for (auto& p : params) {
        const_cast<Tensor<double>&>(p).enable_grad();
        const_cast<Tensor<double>&>(p).zero_grad();
    }
    Tape<double> tape;
    {
        Tape<double>::Scope scope(tape);
        Tensor<double> loss = loss_fn();
        tape.backward(loss);
    }
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = const_cast<Tensor<double>&>(params[pi]);
        for (std::size_t i = 0; i < p.size(); ++i) {
            double keep = p.data()[i];
            p.data()[i] = keep + h;
            double up = loss_fn().item();
            p.data()[i] = keep - h;
            double down = loss_fn().item();
            p.data()[i] = keep;
            double fd = (up - down) / (2 * h);
            double an = p.grad()[i];
            double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
            INFO("param ", pi, " element ", i, ": fd=", fd, " analytic=", an);
            CHECK(rel < tol);
        }
    }
}
