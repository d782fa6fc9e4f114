#include "sdci/dataset.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "sdci/simulators.hpp"
#include "sdci/tensor_io.hpp"

namespace sdci {

using nlohmann::json;

namespace {

std::size_t worker_count(std::size_t jobs) {
    std::size_t n = 1;
    if (const char* env = std::getenv("SDCI_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = static_cast<std::size_t>(v);
    }
    return std::min(n, jobs);
}

StateProcess process_of(const DataConfig& d) {
    return d.state_process == "cyclic" ? StateProcess::cyclic : StateProcess::iid;
}

TimeSeriesSample make_sample(const ExperimentConfig& cfg, const std::string& split,
                             std::size_t index) {
    RngStream rng = RngStream::derive(cfg.seed, "data/" + split, index);
    const DataConfig& d = cfg.data;
    StateGraph graph =
        sample_state_graph(d.n_objects, d.n_states, d.n_edge_types, d.edge_prob, rng);
    if (cfg.scenario == "linear") {
        LinearWorld world{d.alpha, d.beta};
        return linear_rollout(graph, world, {}, d.n_frames, cfg.regime, rng, process_of(d),
                              d.cycle_period);
    }
    SpringWorld world{d.delta, d.box, d.dt, d.subsample};
    SpringInit init = sample_spring_init(d.n_objects, rng);
    return spring_rollout(graph, world, std::move(init), d.n_frames, cfg.regime, d.cycle_period);
}

void finalize_sample(TimeSeriesSample& s, double norm_scale) {
    for (auto& v : s.p) v = static_cast<double>(static_cast<float>(v / norm_scale));
}

std::vector<TimeSeriesSample> make_split(const ExperimentConfig& cfg, const std::string& split,
                                         std::size_t count, double norm_scale) {
    std::vector<TimeSeriesSample> out;
    out.reserve(count);
    if (cfg.data.exclude_diverged) {
        // sequential: keep drawing further indices until enough clean samples
        std::size_t index = 0;
        while (out.size() < count) {
            TimeSeriesSample s = make_sample(cfg, split, index++);
            if (!s.diverged) {
                finalize_sample(s, norm_scale);
                out.push_back(std::move(s));
            }
            if (index > count * 100 + 1000)
                throw ValueError("exclude_diverged: nearly all samples diverge for this config");
        }
        return out;
    }
    out.resize(count);
    std::size_t workers = worker_count(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            out[i] = make_sample(cfg, split, i);
            finalize_sample(out[i], norm_scale);
        }
        return out;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) {
                out[i] = make_sample(cfg, split, i);
                finalize_sample(out[i], norm_scale);
            }
        });
    for (auto& t : pool) t.join();
    return out;
}

json world_json(const ExperimentConfig& cfg) {
    if (cfg.scenario == "linear")
        return json{{"alpha", cfg.data.alpha}, {"beta", cfg.data.beta}};
    return json{{"delta", cfg.data.delta},
                {"box", cfg.data.box},
                {"dt", cfg.data.dt},
                {"subsample", cfg.data.subsample}};
}

void write_split(const std::string& path, const std::vector<TimeSeriesSample>& samples) {
    if (samples.empty()) throw ValueError("cannot write an empty split");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    std::size_t S = samples.size();
    std::size_t T = samples[0].T, N = samples[0].N, D = samples[0].D;
    std::size_t K = samples[0].graph.K;

    std::vector<float> p;
    p.reserve(S * T * N * D);
    std::vector<std::uint8_t> s, g, diverged;
    for (const auto& sample : samples) {
        if (sample.T != T || sample.N != N || sample.D != D || sample.graph.K != K)
            throw ContractError("samples in one split must share shapes");
        for (double v : sample.p) p.push_back(static_cast<float>(v));
        s.insert(s.end(), sample.s.begin(), sample.s.end());
        g.insert(g.end(), sample.graph.g.begin(), sample.graph.g.end());
        diverged.push_back(sample.diverged ? 1 : 0);
    }
    write_f32(out, "p", {S, T, N, D}, p);
    write_u8(out, "s", {S, T, N}, s);
    write_u8(out, "graph", {S, K, N, N}, g);
    write_u8(out, "diverged", {S}, diverged);
}

std::vector<TimeSeriesSample> read_split(const std::string& path, const ExperimentConfig& cfg,
                                         std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open split file: " + path);
    TensorRecord p = require_record(in, "p");
    TensorRecord s = require_record(in, "s");
    TensorRecord g = require_record(in, "graph");
    TensorRecord diverged = require_record(in, "diverged");

    if (p.shape.size() != 4 || s.shape.size() != 3 || g.shape.size() != 4 ||
        diverged.shape.size() != 1)
        throw IoError("split file " + path + " has unexpected tensor ranks");
    std::size_t S = p.shape[0], T = p.shape[1], N = p.shape[2], D = p.shape[3];
    if (S != expected)
        throw IoError("split file " + path + " holds " + std::to_string(S) +
                      " samples but the manifest promises " + std::to_string(expected));
    if (s.shape != Shape{S, T, N} || g.shape[0] != S || g.shape[2] != N || g.shape[3] != N ||
        diverged.shape[0] != S)
        throw IoError("split file " + path + " has inconsistent tensor shapes");
    std::size_t K = g.shape[1];
    if (T != cfg.data.n_frames || N != cfg.data.n_objects || K != cfg.data.n_states)
        throw IoError("split file " + path + " disagrees with the manifest dimensions");

    auto pf = p.as_f32();
    auto su = s.as_u8();
    auto gu = g.as_u8();
    auto du = diverged.as_u8();
    std::vector<TimeSeriesSample> out(S);
    for (std::size_t i = 0; i < S; ++i) {
        TimeSeriesSample& smp = out[i];
        smp.T = T;
        smp.N = N;
        smp.D = D;
        smp.regime = cfg.regime;
        smp.p.assign(pf.begin() + i * T * N * D, pf.begin() + (i + 1) * T * N * D);
        smp.s.assign(su.begin() + i * T * N, su.begin() + (i + 1) * T * N);
        smp.graph = StateGraph(K, N, cfg.data.n_edge_types);
        std::copy(gu.begin() + i * K * N * N, gu.begin() + (i + 1) * K * N * N,
                  smp.graph.g.begin());
        smp.diverged = du[i] != 0;
    }
    return out;
}

} // namespace

Dataset generate_dataset(const ExperimentConfig& cfg) {
    Dataset ds;
    ds.config = cfg;
    ds.norm_scale = (cfg.scenario == "springs" && cfg.data.normalize) ? cfg.data.box : 1.0;
    ds.train = make_split(cfg, "train", cfg.data.n_train, ds.norm_scale);
    ds.valid = make_split(cfg, "valid", cfg.data.n_valid, ds.norm_scale);
    ds.test = make_split(cfg, "test", cfg.data.n_test, ds.norm_scale);
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const ExperimentConfig& cfg = ds.config;
    json manifest{{"format_version", 1},
                  {"scenario", cfg.scenario},
                  {"regime", regime_name(cfg.regime)},
                  {"n_objects", cfg.data.n_objects},
                  {"n_frames", cfg.data.n_frames},
                  {"n_states", cfg.data.n_states},
                  {"n_edge_types", cfg.data.n_edge_types},
                  {"edge_prob", cfg.data.edge_prob},
                  {"state_process", cfg.data.state_process},
                  {"cycle_period", cfg.data.cycle_period},
                  {"world", world_json(cfg)},
                  {"seed", cfg.seed},
                  {"norm_scale", ds.norm_scale},
                  {"splits",
                   {{"train", ds.train.size()}, {"valid", ds.valid.size()},
                    {"test", ds.test.size()}}}};
    {
        std::ofstream out(dir + "/manifest.json", std::ios::binary);
        if (!out) throw IoError("cannot write manifest in " + dir);
        out << manifest.dump(2) << '\n';
    }
    write_split(dir + "/train.tensors", ds.train);
    write_split(dir + "/valid.tensors", ds.valid);
    write_split(dir + "/test.tensors", ds.test);
}

Dataset read_dataset(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open manifest in " + dir);
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed manifest: ") + e.what());
    }
    if (!manifest.contains("format_version"))
        throw IoError("manifest lacks a format_version");
    int version = manifest.at("format_version").get<int>();
    if (version != 1)
        throw IoError("unsupported dataset format_version " + std::to_string(version));

    Dataset ds;
    ExperimentConfig& cfg = ds.config;
    cfg.scenario = manifest.at("scenario").get<std::string>();
    cfg.regime = regime_from_name(manifest.at("regime").get<std::string>());
    cfg.seed = manifest.at("seed").get<std::uint64_t>();
    cfg.data.n_objects = manifest.at("n_objects").get<std::size_t>();
    cfg.data.n_frames = manifest.at("n_frames").get<std::size_t>();
    cfg.data.n_states = manifest.at("n_states").get<std::size_t>();
    cfg.data.n_edge_types = manifest.at("n_edge_types").get<std::size_t>();
    cfg.data.edge_prob = manifest.at("edge_prob").get<double>();
    cfg.data.state_process = manifest.at("state_process").get<std::string>();
    cfg.data.cycle_period = manifest.at("cycle_period").get<std::size_t>();
    ds.norm_scale = manifest.at("norm_scale").get<double>();
    const json& world = manifest.at("world");
    if (cfg.scenario == "linear") {
        cfg.data.alpha = world.at("alpha").get<double>();
        cfg.data.beta = world.at("beta").get<std::vector<double>>();
    } else {
        cfg.data.delta = world.at("delta").get<std::vector<double>>();
        cfg.data.box = world.at("box").get<double>();
        cfg.data.dt = world.at("dt").get<double>();
        cfg.data.subsample = world.at("subsample").get<std::size_t>();
    }
    const json& splits = manifest.at("splits");
    cfg.data.n_train = splits.at("train").get<std::size_t>();
    cfg.data.n_valid = splits.at("valid").get<std::size_t>();
    cfg.data.n_test = splits.at("test").get<std::size_t>();

    ds.train = read_split(dir + "/train.tensors", cfg, cfg.data.n_train);
    ds.valid = read_split(dir + "/valid.tensors", cfg, cfg.data.n_valid);
    ds.test = read_split(dir + "/test.tensors", cfg, cfg.data.n_test);
    return ds;
}

} // namespace sdci
