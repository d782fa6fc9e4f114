#include "sdci/simulators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace sdci {

namespace {
constexpr double kOverflowGuard = 1e6;
}

StateGraph sample_state_graph(std::size_t N, std::size_t K, std::size_t n_edge_types,
                              double edge_prob, RngStream& rng) {
    if (N < 2) throw ValueError("graph sampling needs at least 2 objects");
    if (K < 1) throw ValueError("graph sampling needs at least 1 state");
    if (n_edge_types < 2) throw ValueError("graph sampling needs at least 2 edge types");
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw ValueError("edge_prob must lie in [0, 1]");
    StateGraph graph(K, N, n_edge_types);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                if (rng.uniform() < edge_prob) {
                    std::uint8_t type =
                        n_edge_types == 2
                            ? std::uint8_t{1}
                            : static_cast<std::uint8_t>(
                                  rng.uniform_int(1, static_cast<std::int64_t>(n_edge_types) - 1));
                    graph.at(k, i, j) = type;
                }
            }
    return graph;
}

StabilityVerdict var_transition_matrix(const StateGraph& graph, const LinearWorld& world,
                                       const std::vector<std::uint8_t>& states) {
    world.validate();
    std::size_t N = graph.N;
    if (states.size() != N) throw ValueError("state assignment size must equal object count");
    StabilityVerdict out;
    out.A = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        out.A(i, i) = world.alpha;
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            std::uint8_t k = graph.query(j, i, states[j]); // source j's state picks the edge
            out.A(i, j) = world.beta.at(k);
        }
    }
    Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(out.A, false).eigenvalues();
    out.spectral_radius = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        out.spectral_radius = std::max(out.spectral_radius, std::abs(ev(i)));
    out.strictly_stable = out.spectral_radius < 1.0;
    return out;
}

TimeSeriesSample linear_rollout(const StateGraph& graph, const LinearWorld& world,
                                std::vector<double> p0, std::size_t T, Regime regime,
                                RngStream& rng, StateProcess process, std::size_t cycle_period) {
    world.validate();
    graph.validate();
    if (T < 2) throw ValueError("rollout needs T >= 2");
    if (regime == Regime::observed_dependent)
        throw ValueError("the linear scenario has no event-driven regime");
    std::size_t N = graph.N, K = graph.K;
    if (p0.empty()) {
        p0.resize(N);
        for (auto& v : p0) v = rng.normal();
    }
    if (p0.size() != N) throw ValueError("initial values must have one entry per object");
    for (double v : p0)
        if (!std::isfinite(v)) throw ValueError("initial values must be finite");

    TimeSeriesSample sample;
    sample.T = T;
    sample.N = N;
    sample.D = 1;
    sample.p.resize(T * N);
    sample.s.resize(T * N);
    sample.graph = graph;
    sample.regime = regime;

    std::vector<double> cur = p0, next(N);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            sample.pos(t, i, 0) = cur[i];
            if (std::abs(cur[i]) > kOverflowGuard) sample.diverged = true;
            std::uint8_t st;
            if (regime == Regime::hidden) {
                st = cur[i] < 0.0 ? 1 : 0;
            } else if (process == StateProcess::cyclic) {
                st = static_cast<std::uint8_t>((t / cycle_period) % K);
            } else {
                st = K == 1 ? 0
                            : static_cast<std::uint8_t>(
                                  rng.uniform_int(0, static_cast<std::int64_t>(K) - 1));
            }
            sample.state(t, i) = st;
        }
        if (t + 1 == T) break;
        for (std::size_t i = 0; i < N; ++i) {
            double acc = world.alpha * cur[i];
            for (std::size_t j = 0; j < N; ++j) {
                if (i == j) continue;
                std::uint8_t k = graph.query(j, i, sample.state(t, j));
                acc += world.beta[k] * cur[j];
            }
            next[i] = acc;
        }
        cur.swap(next);
    }
    return sample;
}

namespace {

// r''_i = sum_j f_ij, f_ij = -delta_k (r_i - r_j), k chosen by the source j's state
void spring_forces(const std::vector<double>& pos, const StateGraph& graph,
                   const SpringWorld& world, const std::vector<std::uint8_t>& states,
                   std::vector<double>& acc) {
    std::size_t N = graph.N;
    acc.assign(N * 2, 0.0);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            if (i == j) continue;
            std::uint8_t k = graph.query(j, i, states[j]);
            double d = world.delta[k];
            if (d == 0.0) continue;
            acc[i * 2 + 0] -= d * (pos[i * 2 + 0] - pos[j * 2 + 0]);
            acc[i * 2 + 1] -= d * (pos[i * 2 + 1] - pos[j * 2 + 1]);
        }
}

// mirror a coordinate back into [-B, B]; each mirror is one wall event
void reflect(double& x, double& v, double B, std::uint8_t& events) {
    while (x > B || x < -B) {
        if (x > B)
            x = 2.0 * B - x;
        else
            x = -2.0 * B - x;
        v = -v;
        if (events < 255) ++events;
    }
}

} // namespace

void spring_step(std::vector<double>& pos, std::vector<double>& vel, const StateGraph& graph,
                 const SpringWorld& world, const std::vector<std::uint8_t>& states,
                 std::vector<std::uint8_t>* collisions) {
    world.validate();
    std::size_t N = graph.N;
    if (pos.size() != N * 2 || vel.size() != N * 2)
        throw ValueError("spring state must be [N][2] positions and velocities");
    static thread_local std::vector<double> acc;
    spring_forces(pos, graph, world, states, acc);
    double h = world.dt;
    for (std::size_t i = 0; i < N * 2; ++i) vel[i] += 0.5 * h * acc[i];
    if (collisions) collisions->assign(N, 0);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t d = 0; d < 2; ++d) {
            double& x = pos[i * 2 + d];
            double& v = vel[i * 2 + d];
            x += h * v;
            std::uint8_t events = 0;
            reflect(x, v, world.box, events);
            if (collisions && events) (*collisions)[i] += events;
        }
    spring_forces(pos, graph, world, states, acc);
    for (std::size_t i = 0; i < N * 2; ++i) vel[i] += 0.5 * h * acc[i];
}

double spring_energy(const std::vector<double>& pos, const std::vector<double>& vel,
                     const StateGraph& graph, const SpringWorld& world,
                     const std::vector<std::uint8_t>& states) {
    std::size_t N = graph.N;
    double e = 0.0;
    for (std::size_t i = 0; i < N * 2; ++i) e += 0.5 * vel[i] * vel[i];
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) {
            std::uint8_t k = graph.query(j, i, states[j]);
            double d = world.delta[k];
            if (d == 0.0) continue;
            double dx = pos[i * 2 + 0] - pos[j * 2 + 0];
            double dy = pos[i * 2 + 1] - pos[j * 2 + 1];
            e += 0.5 * d * (dx * dx + dy * dy);
        }
    return e;
}

SpringInit sample_spring_init(std::size_t N, RngStream& rng, double pos_std, double speed) {
    SpringInit init;
    init.pos.resize(N * 2);
    init.vel.resize(N * 2);
    for (auto& v : init.pos) v = rng.normal() * pos_std;
    for (std::size_t i = 0; i < N; ++i) {
        double theta = rng.uniform() * 2.0 * std::numbers::pi;
        init.vel[i * 2 + 0] = speed * std::cos(theta);
        init.vel[i * 2 + 1] = speed * std::sin(theta);
    }
    return init;
}

TimeSeriesSample spring_rollout(const StateGraph& graph, const SpringWorld& world, SpringInit init,
                                std::size_t T, Regime regime, std::size_t cycle_period) {
    world.validate();
    graph.validate();
    if (T < 2) throw ValueError("rollout needs T >= 2");
    std::size_t N = graph.N, K = graph.K;
    if (init.pos.size() != N * 2 || init.vel.size() != N * 2)
        throw ValueError("spring init must be [N][2] positions and velocities");

    TimeSeriesSample sample;
    sample.T = T;
    sample.N = N;
    sample.D = 4;
    sample.p.resize(T * N * 4);
    sample.s.resize(T * N);
    sample.graph = graph;
    sample.regime = regime;

    std::vector<double> pos = std::move(init.pos), vel = std::move(init.vel);
    std::vector<std::uint8_t> states(N, 0), hits;
    auto frame_states = [&](std::size_t t) {
        if (regime == Regime::observed_independent)
            for (auto& s : states) s = static_cast<std::uint8_t>((t / cycle_period) % K);
        else if (regime == Regime::hidden)
            for (std::size_t i = 0; i < N; ++i) states[i] = pos[i * 2] < 0.0 ? 1 : 0;
        // observed_dependent: states persist and toggle on wall events below
    };
    auto record = [&](std::size_t t) {
        for (std::size_t i = 0; i < N; ++i) {
            sample.pos(t, i, 0) = pos[i * 2 + 0];
            sample.pos(t, i, 1) = pos[i * 2 + 1];
            sample.pos(t, i, 2) = vel[i * 2 + 0];
            sample.pos(t, i, 3) = vel[i * 2 + 1];
            sample.state(t, i) = states[i];
        }
    };

    frame_states(0);
    record(0);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t m = 0; m < world.subsample; ++m) {
            spring_step(pos, vel, graph, world, states,
                        regime == Regime::observed_dependent ? &hits : nullptr);
            if (regime == Regime::observed_dependent)
                for (std::size_t i = 0; i < N; ++i)
                    if (hits[i]) states[i] = static_cast<std::uint8_t>((states[i] + hits[i]) % K);
        }
        frame_states(t);
        record(t);
    }
    return sample;
}

} // namespace sdci
