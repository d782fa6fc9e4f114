#include "sdci/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdci/errors.hpp"

namespace sdci {

namespace {

double scored_pairs(const GraphPrediction& pred, const StateGraph& truth,
                    const std::vector<std::size_t>& model_state_for) {
    if (pred.N != truth.N) throw ContractError("edge accuracy: object counts differ");
    if (pred.n_edge_types != truth.n_edge_types)
        throw ContractError("edge accuracy: edge type counts differ");
    std::size_t N = truth.N;
    std::size_t hits = 0, slots = 0;
    for (std::size_t k = 0; k < truth.K; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                hits += pred.at(model_state_for[k], i, j) == truth.at(k, i, j);
                ++slots;
            }
    return double(hits) / double(slots);
}

} // namespace

double edge_accuracy(const GraphPrediction& pred, const StateGraph& truth) {
    std::vector<std::size_t> ident(truth.K);
    if (pred.K == 1) {
        // broadcast: the single predicted graph answers for every true state
        std::fill(ident.begin(), ident.end(), 0);
    } else if (pred.K == truth.K) {
        std::iota(ident.begin(), ident.end(), 0);
    } else {
        throw ContractError("edge accuracy: prediction must have 1 state or match the truth");
    }
    return scored_pairs(pred, truth, ident);
}

double edge_accuracy(const GraphPrediction& pred, const StateGraph& truth,
                     const std::vector<std::size_t>& perm) {
    if (perm.size() != truth.K) throw ContractError("edge accuracy: permutation size");
    for (std::size_t m : perm)
        if (m >= pred.K) throw ContractError("edge accuracy: permutation out of range");
    return scored_pairs(pred, truth, perm);
}

StateAlignment align_states(const std::vector<std::uint8_t>& predicted,
                            const std::vector<std::uint8_t>& truth, std::size_t K) {
    if (predicted.size() != truth.size())
        throw ContractError("state alignment: label sequences differ in length");
    if (predicted.empty()) throw ContractError("state alignment: no labels");
    if (K == 0) throw ContractError("state alignment: need at least one state");
    if (K > 6) throw ValueError("state alignment beyond 6 states is refused (K! search)");

    // confusion[m][t]: model said m where the truth was t
    std::vector<std::size_t> confusion(K * K, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] >= K || truth[i] >= K)
            throw ContractError("state alignment: label out of range");
        ++confusion[predicted[i] * K + truth[i]];
    }

    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    StateAlignment best;
    best.perm = perm;
    do {
        std::size_t hits = 0;
        for (std::size_t t = 0; t < K; ++t) hits += confusion[perm[t] * K + t];
        double acc = double(hits) / double(truth.size());
        if (acc > best.accuracy) {
            best.accuracy = acc;
            best.perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double world_param_distance(double alpha_hat, const std::vector<double>& beta_hat,
                            const LinearWorld& world) {
    if (beta_hat.size() + 1 != world.beta.size())
        throw ContractError("world distance: beta count does not match the world");
    double total = std::abs(alpha_hat - world.alpha);
    for (std::size_t e = 0; e < beta_hat.size(); ++e)
        total += std::abs(beta_hat[e] - world.beta[e + 1]);
    return total / double(1 + beta_hat.size());
}

SummaryStat summarize(const std::vector<double>& values) {
    SummaryStat s;
    s.n = values.size();
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(s.n);
    if (s.n < 2) return s;
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(ss / double(s.n - 1)) / std::sqrt(double(s.n));
    return s;
}

} // namespace sdci
