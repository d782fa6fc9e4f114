#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "sdci/model.hpp"
#include "sdci/tensor.hpp"

namespace sdci {

// Gaussian negative log-likelihood with fixed variance: mean over the batch,
// sum over everything else. pred/target rows may pack several objects per
// sample, so the batch size is passed explicitly.
template <typename T>
Tensor<T> gaussian_nll(const Tensor<T>& pred, const Tensor<T>& target, double sigma2,
                       std::size_t n_batch) {
    if (pred.shape() != target.shape())
        throw ContractError("gaussian_nll: prediction " + shape_str(pred.shape()) +
                            " vs target " + shape_str(target.shape()));
    if (!(sigma2 > 0)) throw ContractError("gaussian_nll: variance must be positive");
    if (n_batch == 0) throw ContractError("gaussian_nll: empty batch");
    Tensor<T> d = sub(pred, target);
    Tensor<T> ss = sum_all(mul(d, d));
    T quad = static_cast<T>(0.5 / (sigma2 * double(n_batch)));
    double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    T shift = static_cast<T>(log_norm * double(pred.size()) / double(n_batch));
    return add_scalar(scale(ss, quad), shift);
}

// KL(q || uniform) for categorical rows, evaluated in probability space.
// Rows with hard zeros are fine (0 log 0 -> 0). Returns a plain value; the
// differentiable training path goes through kl_categorical_uniform_from_logits.
template <typename T>
double kl_categorical_uniform(const Tensor<T>& probs, std::size_t n_batch) {
    if (n_batch == 0) throw ContractError("kl: empty batch");
    std::size_t C = probs.cols();
    if (C < 2) throw ContractError("kl: need at least 2 categories");
    double total = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) {
            double q = double(probs.data()[r * C + c]);
            if (q > 0.0) total += q * std::log(q * double(C));
        }
    return total / double(n_batch);
}

// Same quantity computed from raw posterior logits at temperature tau, on the
// tape: sum_rows sum_c q (log q + log C) / n_batch.
template <typename T>
Tensor<T> kl_categorical_uniform_from_logits(const Tensor<T>& logits, double tau,
                                             std::size_t n_batch) {
    if (n_batch == 0) throw ContractError("kl: empty batch");
    std::size_t C = logits.cols();
    Tensor<T> logq = log_softmax_rows(logits, static_cast<T>(tau));
    Tensor<T> q = exp_t(logq);
    Tensor<T> inner = mul(q, add_scalar(logq, static_cast<T>(std::log(double(C)))));
    return scale(sum_all(inner), static_cast<T>(1.0 / double(n_batch)));
}

// Cross-entropy of integer labels under softmax(logits), mean over the batch,
// summed over rows (objects, steps).
template <typename T>
Tensor<T> categorical_nll(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels,
                          std::size_t n_batch) {
    if (labels.size() != logits.rows())
        throw ContractError("categorical_nll: labels do not match logit rows");
    if (n_batch == 0) throw ContractError("categorical_nll: empty batch");
    Tensor<T> onehot = onehot_rows<T>(labels, logits.cols());
    Tensor<T> logp = log_softmax_rows(logits, T(1));
    return scale(sum_all(mul(logp, onehot)), static_cast<T>(-1.0 / double(n_batch)));
}

template <typename T>
struct LossBreakdown {
    Tensor<T> nll_p, nll_s, kl, total;
};

// Assembles the full training objective from a forward pass:
// total = nll_p + lambda_state * nll_s + kl.
template <typename T>
LossBreakdown<T> negative_elbo(const ModelOutput<T>& out, const Batch<T>& batch, double sigma2,
                               double lambda_state, double tau) {
    LossBreakdown<T> loss;
    Tensor<T> ss;
    for (std::size_t t = 0; t + 1 < batch.T_frames; ++t) {
        Tensor<T> d = sub(out.preds[t], batch.frames[t + 1]);
        Tensor<T> q = sum_all(mul(d, d));
        ss = ss.defined() ? add(ss, q) : q;
    }
    std::size_t elems = batch.rows() * batch.D * (batch.T_frames - 1);
    double log_norm = 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    loss.nll_p = add_scalar(scale(ss, static_cast<T>(0.5 / (sigma2 * double(batch.B)))),
                            static_cast<T>(log_norm * double(elems) / double(batch.B)));

    std::size_t rows = out.edge_logits.rows() * (out.edge_logits.cols() / batch.n_edge_types);
    Tensor<T> flat = reshape_copy(out.edge_logits, {rows, batch.n_edge_types});
    loss.kl = kl_categorical_uniform_from_logits(flat, tau, batch.B);

    loss.total = add(loss.nll_p, loss.kl);
    if (!out.state_logits.empty() && lambda_state != 0.0) {
        Tensor<T> acc;
        for (std::size_t t = 0; t + 1 < batch.T_frames; ++t) {
            Tensor<T> part = categorical_nll(out.state_logits[t], batch.state_labels[t + 1],
                                             batch.B);
            acc = acc.defined() ? add(acc, part) : part;
        }
        loss.nll_s = acc;
        loss.total = add(loss.total, scale(loss.nll_s, static_cast<T>(lambda_state)));
    } else {
        loss.nll_s = Tensor<T>::scalar(T(0));
    }
    return loss;
}

} // namespace sdci
