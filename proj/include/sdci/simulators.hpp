#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sdci/graph.hpp"
#include "sdci/rng.hpp"

namespace sdci {

// How observed-independent state schedules evolve over frames.
enum class StateProcess {
    iid,    // fresh uniform state per object per frame (linear scenario default)
    cyclic, // all objects advance (t / period) mod K in lockstep (springs default)
};

StateGraph sample_state_graph(std::size_t N, std::size_t K, std::size_t n_edge_types,
                              double edge_prob, RngStream& rng);

struct StabilityVerdict {
    Eigen::MatrixXd A; // p^{t+1} = A p^t for the given per-object states
    double spectral_radius = 0.0;
    bool strictly_stable = false;
};

StabilityVerdict var_transition_matrix(const StateGraph& graph, const LinearWorld& world,
                                       const std::vector<std::uint8_t>& states);

// Deterministic autoregressive rollout. p0 may be empty (drawn standard
// normal). Values past the overflow guard mark the sample diverged but the
// rollout still completes (the generator does not filter unstable draws).
TimeSeriesSample linear_rollout(const StateGraph& graph, const LinearWorld& world,
                                std::vector<double> p0, std::size_t T, Regime regime,
                                RngStream& rng, StateProcess process = StateProcess::iid,
                                std::size_t cycle_period = 10);

// One leapfrog micro-step (half-kick, drift, wall reflection, recompute
// forces, half-kick). pos/vel are [N][2]; collisions[i] counts the wall
// reflections particle i underwent during this step.
void spring_step(std::vector<double>& pos, std::vector<double>& vel, const StateGraph& graph,
                 const SpringWorld& world, const std::vector<std::uint8_t>& states,
                 std::vector<std::uint8_t>* collisions = nullptr);

// Kinetic plus pair-potential energy; the potential term assumes the graph is
// symmetric (directed springs are non-conservative, so only symmetric
// topologies have a conserved energy to report).
double spring_energy(const std::vector<double>& pos, const std::vector<double>& vel,
                     const StateGraph& graph, const SpringWorld& world,
                     const std::vector<std::uint8_t>& states);

struct SpringInit {
    std::vector<double> pos; // [N][2]
    std::vector<double> vel; // [N][2]
};

SpringInit sample_spring_init(std::size_t N, RngStream& rng, double pos_std = 0.5,
                              double speed = 0.5);

// Frames are recorded every world.subsample micro-steps; frame 0 is the
// initial condition. States follow the regime: cyclic schedule, wall-event
// toggling, or the hidden location rule (state 1 iff x < 0).
TimeSeriesSample spring_rollout(const StateGraph& graph, const SpringWorld& world, SpringInit init,
                                std::size_t T, Regime regime, std::size_t cycle_period = 10);

} // namespace sdci
