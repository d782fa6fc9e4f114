#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sdci/metrics.hpp"
#include "sdci/model.hpp"

namespace sdci {

// Argmax summary graphs for every sample in the batch.
template <typename T>
std::vector<GraphPrediction> predicted_graphs(const Tensor<T>& logits, const Batch<T>& batch,
                                              std::size_t K_model) {
    std::size_t n_e = batch.n_edge_types, E = batch.edges(), N = batch.N;
    std::vector<GraphPrediction> out(batch.B);
    for (std::size_t b = 0; b < batch.B; ++b) {
        GraphPrediction& g = out[b];
        g.K = K_model;
        g.N = N;
        g.n_edge_types = n_e;
        g.types.assign(K_model * N * N, 0);
        std::size_t pair = 0;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                std::size_t row = b * E + pair;
                for (std::size_t k = 0; k < K_model; ++k) {
                    const T* block = logits.data().data() + row * K_model * n_e + k * n_e;
                    std::size_t arg = 0;
                    for (std::size_t e = 1; e < n_e; ++e)
                        if (block[e] > block[arg]) arg = e;
                    g.at(k, i, j) = static_cast<std::uint8_t>(arg);
                }
                ++pair;
            }
    }
    return out;
}

// Mean squared prediction error for one sample of a rolled-out batch.
template <typename T>
double rollout_mse(const ModelOutput<T>& out, const Batch<T>& batch, std::size_t b) {
    double total = 0;
    std::size_t count = 0;
    for (std::size_t t = 0; t + 1 < batch.T_frames; ++t)
        for (std::size_t i = 0; i < batch.N; ++i)
            for (std::size_t d = 0; d < batch.D; ++d) {
                std::size_t idx = (b * batch.N + i) * batch.D + d;
                double diff = double(out.preds[t].data()[idx]) -
                              double(batch.frames[t + 1].data()[idx]);
                total += diff * diff;
                ++count;
            }
    return total / double(count);
}

struct SplitEvaluation {
    SummaryStat edge_acc, mse, state_acc;
    std::vector<double> per_sample_edge_acc, per_sample_mse;
    std::optional<double> world_distance;    // fixed-linear decoder only
    std::vector<std::size_t> state_perm;     // hidden regime: truth -> model labels
    double state_accuracy_raw = 0.0;         // hidden regime: before relabeling
};

// Deterministic evaluation of a sample list: argmax posterior (no sampling),
// teacher-forced rollout for the reconstruction error, hidden-state alignment
// searched globally over the whole list.
template <typename T>
SplitEvaluation evaluate_samples(SdciModel<T>& model,
                                 const std::vector<const TimeSeriesSample*>& samples,
                                 std::size_t tf_period, std::size_t eval_batch = 128) {
    if (samples.empty()) throw ValueError("nothing to evaluate");
    const ModelShape& shape = model.shape();
    SplitEvaluation ev;
    std::vector<GraphPrediction> graphs;
    std::vector<std::uint8_t> pred_states, true_states;

    for (std::size_t start = 0; start < samples.size(); start += eval_batch) {
        std::size_t stop = std::min(samples.size(), start + eval_batch);
        std::vector<const TimeSeriesSample*> chunk(samples.begin() + start,
                                                   samples.begin() + stop);
        Batch<T> batch = build_batch<T>(chunk, shape.states_in_input);
        Tensor<T> logits = model.encode(batch);
        auto assignments = model.assignments_from_argmax(logits);
        ModelOutput<T> out;
        out.edge_logits = logits;
        model.rollout(batch, assignments, tf_period, out);

        auto batch_graphs = predicted_graphs(logits, batch, shape.K_model);
        graphs.insert(graphs.end(), batch_graphs.begin(), batch_graphs.end());
        for (std::size_t b = 0; b < batch.B; ++b)
            ev.per_sample_mse.push_back(rollout_mse(out, batch, b));

        if (shape.regime == Regime::hidden && shape.K_model > 1) {
            // state beliefs on the true frames, every frame scored
            for (std::size_t t = 0; t < batch.T_frames; ++t) {
                Tensor<T> dist = model.infer_hidden_states(batch.frames[t]);
                for (std::size_t r = 0; r < batch.rows(); ++r) {
                    const T* row = dist.data().data() + r * shape.K_model;
                    std::size_t arg = 0;
                    for (std::size_t k = 1; k < shape.K_model; ++k)
                        if (row[k] > row[arg]) arg = k;
                    pred_states.push_back(static_cast<std::uint8_t>(arg));
                    true_states.push_back(batch.state_labels[t][r]);
                }
            }
        }
    }

    if (!pred_states.empty()) {
        StateAlignment align = align_states(pred_states, true_states, shape.K_model);
        ev.state_perm = align.perm;
        ev.state_acc = {align.accuracy, 0.0, pred_states.size()};
        std::size_t raw_hits = 0;
        for (std::size_t i = 0; i < pred_states.size(); ++i)
            raw_hits += pred_states[i] == true_states[i];
        ev.state_accuracy_raw = double(raw_hits) / double(pred_states.size());
        for (std::size_t b = 0; b < samples.size(); ++b)
            ev.per_sample_edge_acc.push_back(
                edge_accuracy(graphs[b], samples[b]->graph, align.perm));
    } else {
        for (std::size_t b = 0; b < samples.size(); ++b)
            ev.per_sample_edge_acc.push_back(edge_accuracy(graphs[b], samples[b]->graph));
    }

    ev.edge_acc = summarize(ev.per_sample_edge_acc);
    ev.mse = summarize(ev.per_sample_mse);
    return ev;
}

// World-parameter recovery for fixed-linear models, against a known world.
template <typename T>
double recovered_world_distance(SdciModel<T>& model, const LinearWorld& world) {
    auto& dec = model.fixed_decoder();
    std::vector<double> beta_hat;
    for (T b : dec.beta_values()) beta_hat.push_back(double(b));
    return world_param_distance(double(dec.alpha_value()), beta_hat, world);
}

} // namespace sdci
