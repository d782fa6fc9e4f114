#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdci/errors.hpp"

namespace sdci {

// How the per-object categorical state relates to the observations.
enum class Regime {
    observed_independent, // states follow an exogenous schedule, visible to the model
    observed_dependent,   // states driven by events in the trajectory (wall hits), supervised
    hidden,               // states are a deterministic function of position, never shown
};

inline std::string regime_name(Regime r) {
    switch (r) {
        case Regime::observed_independent: return "observed_independent";
        case Regime::observed_dependent: return "observed_dependent";
        case Regime::hidden: return "hidden";
    }
    throw ValueError("bad regime value");
}

inline Regime regime_from_name(const std::string& s) {
    if (s == "observed_independent") return Regime::observed_independent;
    if (s == "observed_dependent") return Regime::observed_dependent;
    if (s == "hidden") return Regime::hidden;
    throw ValueError("unknown regime: " + s);
}

// Per-state causal summary graph. g[k][i][j] is the edge type of the directed
// influence i -> j when object i is in state k; type 0 means no influence.
struct StateGraph {
    std::size_t K = 0, N = 0, n_edge_types = 0;
    std::vector<std::uint8_t> g; // [K][N][N]

    StateGraph() = default;
    StateGraph(std::size_t K_, std::size_t N_, std::size_t n_edge_types_)
        : K(K_), N(N_), n_edge_types(n_edge_types_), g(K_ * N_ * N_, 0) {}

    std::uint8_t& at(std::size_t k, std::size_t i, std::size_t j) {
        return g[(k * N + i) * N + j];
    }
    std::uint8_t at(std::size_t k, std::size_t i, std::size_t j) const {
        return g[(k * N + i) * N + j];
    }

    // edge type of i -> j given the state of the source object i
    std::uint8_t query(std::size_t i, std::size_t j, std::uint8_t s_i) const {
        return at(s_i, i, j);
    }

    void validate() const {
        if (g.size() != K * N * N) throw ContractError("state graph storage size mismatch");
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < N; ++i) {
                if (at(k, i, i) != 0) throw ContractError("state graph has a self-edge");
                for (std::size_t j = 0; j < N; ++j)
                    if (at(k, i, j) >= n_edge_types)
                        throw ContractError("state graph entry exceeds edge-type count");
            }
    }

    bool operator==(const StateGraph&) const = default;
};

// Generator constants for the linear (first-order autoregressive) scenario.
struct LinearWorld {
    double alpha = 1.0;
    std::vector<double> beta; // beta[0] must stay 0 (no-edge type)

    void validate() const {
        if (beta.empty() || beta[0] != 0.0)
            throw ContractError("linear world requires beta[0] == 0");
    }
};

// Generator constants for the 2-D spring-particle scenario.
struct SpringWorld {
    std::vector<double> delta; // spring constants per edge type, delta[0] must stay 0
    double box = 5.0;          // half-width of the square arena
    double dt = 0.001;         // integrator micro-step
    std::size_t subsample = 100;

    void validate() const {
        if (delta.empty() || delta[0] != 0.0)
            throw ContractError("spring world requires delta[0] == 0");
        if (!(dt > 0.0)) throw ContractError("spring world requires dt > 0");
        if (subsample < 1) throw ContractError("spring world requires subsample >= 1");
    }
};

// One simulated trajectory. D = 1 for the linear scenario; D = 4 for springs
// (2-D position then 2-D velocity). Values are kept in double precision here;
// the dataset container stores them as 32-bit floats.
struct TimeSeriesSample {
    std::size_t T = 0, N = 0, D = 0;
    std::vector<double> p;        // [T][N][D]
    std::vector<std::uint8_t> s;  // [T][N]
    StateGraph graph;
    Regime regime = Regime::observed_independent;
    bool diverged = false;

    double& pos(std::size_t t, std::size_t i, std::size_t d) { return p[(t * N + i) * D + d]; }
    double pos(std::size_t t, std::size_t i, std::size_t d) const { return p[(t * N + i) * D + d]; }
    std::uint8_t& state(std::size_t t, std::size_t i) { return s[t * N + i]; }
    std::uint8_t state(std::size_t t, std::size_t i) const { return s[t * N + i]; }
};

} // namespace sdci
