#pragma once

#include <cstdint>
#include <vector>

#include "sdci/graph.hpp"

namespace sdci {

// Argmax summary graph read off the edge posterior for one sample.
struct GraphPrediction {
    std::size_t K = 0, N = 0, n_edge_types = 0;
    std::vector<std::uint8_t> types; // [K][N][N], diagonal zero

    std::uint8_t at(std::size_t k, std::size_t i, std::size_t j) const {
        return types[(k * N + i) * N + j];
    }
    std::uint8_t& at(std::size_t k, std::size_t i, std::size_t j) {
        return types[(k * N + i) * N + j];
    }
};

// Share of correctly typed ordered pairs over all true states. A single-state
// prediction against a multi-state truth is scored by broadcasting it across
// every true state. Diagonals never count.
double edge_accuracy(const GraphPrediction& pred, const StateGraph& truth);

// Same, with model state perm[k] standing in for true state k.
double edge_accuracy(const GraphPrediction& pred, const StateGraph& truth,
                     const std::vector<std::size_t>& perm);

struct StateAlignment {
    std::vector<std::size_t> perm; // perm[k] = model label representing true label k
    double accuracy = 0.0;         // fraction matched under that permutation
};

// Best global relabeling of predicted states against the truth, searched over
// all K! permutations. Refused beyond 6 states.
StateAlignment align_states(const std::vector<std::uint8_t>& predicted,
                            const std::vector<std::uint8_t>& truth, std::size_t K);

// Mean absolute difference between recovered and true world parameters
// (alpha and each beta_e, e >= 1).
double world_param_distance(double alpha_hat, const std::vector<double>& beta_hat,
                            const LinearWorld& world);

struct SummaryStat {
    double mean = 0.0, stderr_ = 0.0;
    std::size_t n = 0;
};

// Sample mean with its standard error (sd / sqrt(n), n-1 denominator).
SummaryStat summarize(const std::vector<double>& values);

} // namespace sdci
