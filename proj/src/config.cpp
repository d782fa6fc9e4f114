#include "sdci/config.hpp"

#include "json.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace sdci {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& scope,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(scope + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + scope);
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            j.at(key).get_to(out);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

void parse_data(const json& j, DataConfig& d) {
    check_keys(j, "data",
               {"n_objects", "n_frames", "n_states", "n_edge_types", "edge_prob", "n_train",
                "n_valid", "n_test", "state_process", "cycle_period", "exclude_diverged", "alpha",
                "beta", "delta", "box", "dt", "subsample", "normalize"});
    get_to(j, "n_objects", d.n_objects);
    get_to(j, "n_frames", d.n_frames);
    get_to(j, "n_states", d.n_states);
    get_to(j, "n_edge_types", d.n_edge_types);
    get_to(j, "edge_prob", d.edge_prob);
    get_to(j, "n_train", d.n_train);
    get_to(j, "n_valid", d.n_valid);
    get_to(j, "n_test", d.n_test);
    get_to(j, "state_process", d.state_process);
    get_to(j, "cycle_period", d.cycle_period);
    get_to(j, "exclude_diverged", d.exclude_diverged);
    get_to(j, "alpha", d.alpha);
    get_to(j, "beta", d.beta);
    get_to(j, "delta", d.delta);
    get_to(j, "box", d.box);
    get_to(j, "dt", d.dt);
    get_to(j, "subsample", d.subsample);
    get_to(j, "normalize", d.normalize);
}

void parse_model(const json& j, ModelConfig& m) {
    check_keys(j, "model",
               {"variant", "decoder", "hidden", "decoder_hidden", "model_states", "tau", "gamma",
                "normalization", "fixed_init_truth", "freeze_decoder"});
    get_to(j, "variant", m.variant);
    get_to(j, "decoder", m.decoder);
    get_to(j, "hidden", m.hidden);
    get_to(j, "decoder_hidden", m.decoder_hidden);
    get_to(j, "model_states", m.model_states);
    get_to(j, "tau", m.tau);
    get_to(j, "gamma", m.gamma);
    get_to(j, "normalization", m.normalization);
    get_to(j, "fixed_init_truth", m.fixed_init_truth);
    get_to(j, "freeze_decoder", m.freeze_decoder);
}

void parse_train(const json& j, TrainConfig& t) {
    check_keys(j, "train",
               {"epochs", "batch", "encoder_lr", "decoder_lr", "decay_factor", "decay_period",
                "tf_period", "lambda_state", "sigma2", "checkpoint_period", "valid_period",
                "hard_samples"});
    get_to(j, "epochs", t.epochs);
    get_to(j, "batch", t.batch);
    get_to(j, "encoder_lr", t.encoder_lr);
    get_to(j, "decoder_lr", t.decoder_lr);
    get_to(j, "decay_factor", t.decay_factor);
    get_to(j, "decay_period", t.decay_period);
    get_to(j, "tf_period", t.tf_period);
    get_to(j, "lambda_state", t.lambda_state);
    get_to(j, "sigma2", t.sigma2);
    get_to(j, "checkpoint_period", t.checkpoint_period);
    get_to(j, "valid_period", t.valid_period);
    get_to(j, "hard_samples", t.hard_samples);
}

void apply_scenario_defaults(ExperimentConfig& c) {
    bool springs = c.scenario == "springs";
    if (c.data.n_objects == 0) c.data.n_objects = springs ? 5 : 3;
    if (c.data.n_frames == 0) c.data.n_frames = springs ? 80 : 40;
    if (c.data.beta.empty()) c.data.beta = {0.0, 0.05};
    if (c.data.delta.empty()) c.data.delta = {0.0, 0.1};
    if (c.model.decoder.empty()) c.model.decoder = springs ? "learned" : "fixed_linear";
    if (c.model.gamma == 0.0) c.model.gamma = springs ? 0.05 : 0.1;
    if (c.train.epochs == 0) c.train.epochs = springs ? 500 : 1000;
    if (c.train.decoder_lr == 0.0) c.train.decoder_lr = springs ? 5e-4 : 1e-3;
    if (c.train.lambda_state < 0.0)
        c.train.lambda_state = c.regime == Regime::observed_dependent ? 1e3 : 0.0;
}

void validate(const ExperimentConfig& c) {
    if (c.format_version != 1)
        throw ConfigError("unsupported config format_version " + std::to_string(c.format_version));
    if (c.scenario != "linear" && c.scenario != "springs")
        throw ConfigError("scenario must be 'linear' or 'springs'");
    if (c.scenario == "linear" && c.regime == Regime::observed_dependent)
        throw ConfigError("the linear scenario has no event-driven regime");
    if (c.data.n_objects < 2) throw ConfigError("n_objects must be at least 2");
    if (c.data.n_frames < 2) throw ConfigError("n_frames must be at least 2");
    if (c.data.n_states < 1) throw ConfigError("n_states must be at least 1");
    if (c.data.n_edge_types < 2) throw ConfigError("n_edge_types must be at least 2");
    if (!(c.data.edge_prob >= 0.0 && c.data.edge_prob <= 1.0))
        throw ConfigError("edge_prob must lie in [0, 1]");
    if (c.data.beta.size() != c.data.n_edge_types || c.data.beta[0] != 0.0)
        throw ConfigError("beta must list one value per edge type, starting with 0");
    if (c.data.delta.size() != c.data.n_edge_types || c.data.delta[0] != 0.0)
        throw ConfigError("delta must list one value per edge type, starting with 0");
    if (c.data.state_process != "iid" && c.data.state_process != "cyclic")
        throw ConfigError("state_process must be 'iid' or 'cyclic'");
    if (c.data.cycle_period < 1) throw ConfigError("cycle_period must be positive");
    if (c.model.variant != "static" && c.model.variant != "temporal")
        throw ConfigError("model variant must be 'static' or 'temporal'");
    if (c.model.decoder != "learned" && c.model.decoder != "fixed_linear")
        throw ConfigError("decoder must be 'learned' or 'fixed_linear'");
    if (c.model.decoder == "fixed_linear" && c.scenario != "linear")
        throw ConfigError("the fixed-linear decoder applies to the linear scenario only");
    if (c.model.hidden < 1 || c.model.decoder_hidden < 1)
        throw ConfigError("hidden widths must be positive");
    if (!(c.model.tau > 0.0)) throw ConfigError("tau must be positive");
    if (!(c.model.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (c.train.batch < 1) throw ConfigError("batch must be positive");
    if (!(c.train.encoder_lr > 0.0) || !(c.train.decoder_lr > 0.0))
        throw ConfigError("learning rates must be positive");
    if (!(c.train.decay_factor > 0.0 && c.train.decay_factor <= 1.0))
        throw ConfigError("decay_factor must lie in (0, 1]");
    if (c.train.decay_period < 1) throw ConfigError("decay_period must be positive");
    if (c.train.tf_period < 1) throw ConfigError("tf_period must be positive");
    if (!(c.train.sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    if (c.train.lambda_state < 0.0) throw ConfigError("lambda_state must be non-negative");
    if (c.model_states() < 1) throw ConfigError("model_states must be at least 1");
}

} // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"format_version", "scenario", "regime", "seed", "data", "model", "train"});
    ExperimentConfig c;
    get_to(j, "format_version", c.format_version);
    if (!j.contains("scenario")) throw ConfigError("config requires 'scenario'");
    get_to(j, "scenario", c.scenario);
    if (j.contains("regime")) c.regime = regime_from_name(j.at("regime").get<std::string>());
    get_to(j, "seed", c.seed);
    // the springs default schedule cycles states rather than redrawing them
    if (c.scenario == "springs") c.data.state_process = "cyclic";
    if (j.contains("data")) parse_data(j.at("data"), c.data);
    if (j.contains("model")) parse_model(j.at("model"), c.model);
    if (j.contains("train")) parse_train(j.at("train"), c.train);
    apply_scenario_defaults(c);
    validate(c);
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str());
}

std::string dump_experiment_config(const ExperimentConfig& c) {
    json j{{"format_version", c.format_version},
           {"scenario", c.scenario},
           {"regime", regime_name(c.regime)},
           {"seed", c.seed},
           {"data",
            {{"n_objects", c.data.n_objects},
             {"n_frames", c.data.n_frames},
             {"n_states", c.data.n_states},
             {"n_edge_types", c.data.n_edge_types},
             {"edge_prob", c.data.edge_prob},
             {"n_train", c.data.n_train},
             {"n_valid", c.data.n_valid},
             {"n_test", c.data.n_test},
             {"state_process", c.data.state_process},
             {"cycle_period", c.data.cycle_period},
             {"exclude_diverged", c.data.exclude_diverged},
             {"alpha", c.data.alpha},
             {"beta", c.data.beta},
             {"delta", c.data.delta},
             {"box", c.data.box},
             {"dt", c.data.dt},
             {"subsample", c.data.subsample},
             {"normalize", c.data.normalize}}},
           {"model",
            {{"variant", c.model.variant},
             {"decoder", c.model.decoder},
             {"hidden", c.model.hidden},
             {"decoder_hidden", c.model.decoder_hidden},
             {"model_states", c.model.model_states},
             {"tau", c.model.tau},
             {"gamma", c.model.gamma},
             {"normalization", c.model.normalization},
             {"fixed_init_truth", c.model.fixed_init_truth},
             {"freeze_decoder", c.model.freeze_decoder}}},
           {"train",
            {{"epochs", c.train.epochs},
             {"batch", c.train.batch},
             {"encoder_lr", c.train.encoder_lr},
             {"decoder_lr", c.train.decoder_lr},
             {"decay_factor", c.train.decay_factor},
             {"decay_period", c.train.decay_period},
             {"tf_period", c.train.tf_period},
             {"lambda_state", c.train.lambda_state},
             {"sigma2", c.train.sigma2},
             {"checkpoint_period", c.train.checkpoint_period},
             {"valid_period", c.train.valid_period},
             {"hard_samples", c.train.hard_samples}}}};
    return j.dump(2);
}

} // namespace sdci
