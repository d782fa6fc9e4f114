#include "sdci/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdci/checkpoint.hpp"
#include "sdci/config.hpp"
#include "sdci/dataset.hpp"
#include "sdci/errors.hpp"
#include "sdci/eval.hpp"
#include "sdci/model.hpp"
#include "sdci/report.hpp"
#include "sdci/trainer.hpp"

namespace sdci {

namespace {

std::vector<const TimeSeriesSample*> pointers(const std::vector<TimeSeriesSample>& v) {
    std::vector<const TimeSeriesSample*> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(&s);
    return out;
}

// Human-readable run identity for report rows, derived from the config alone.
std::string run_label(const ExperimentConfig& cfg) {
    std::string s = cfg.model.variant + " " + cfg.scenario + " " + regime_name(cfg.regime);
    s += " states=" + std::to_string(cfg.model_states());
    if (cfg.model_states() != cfg.data.n_states)
        s += "of" + std::to_string(cfg.data.n_states);
    if (cfg.model.decoder == "fixed_linear") {
        s += " fixed-dec";
        if (cfg.model.freeze_decoder) s += " frozen";
    }
    return s;
}

// The dataset a training run consumes must describe the same world the config
// asks to model; silent mismatches would train on the wrong problem.
void check_dataset_matches(const ExperimentConfig& cfg, const ExperimentConfig& ds) {
    auto fail = [](const std::string& what, const std::string& a, const std::string& b) {
        throw ConfigError("config/dataset mismatch on " + what + ": config says " + a +
                          ", dataset was generated with " + b);
    };
    auto num = [](std::size_t v) { return std::to_string(v); };
    if (cfg.scenario != ds.scenario) fail("scenario", cfg.scenario, ds.scenario);
    if (cfg.regime != ds.regime)
        fail("regime", regime_name(cfg.regime), regime_name(ds.regime));
    if (cfg.data.n_objects != ds.data.n_objects)
        fail("n_objects", num(cfg.data.n_objects), num(ds.data.n_objects));
    if (cfg.data.n_frames != ds.data.n_frames)
        fail("n_frames", num(cfg.data.n_frames), num(ds.data.n_frames));
    if (cfg.data.n_states != ds.data.n_states)
        fail("n_states", num(cfg.data.n_states), num(ds.data.n_states));
    if (cfg.data.n_edge_types != ds.data.n_edge_types)
        fail("n_edge_types", num(cfg.data.n_edge_types), num(ds.data.n_edge_types));
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    Dataset ds = generate_dataset(cfg);
    write_dataset(ds, out_dir);
    std::cout << "wrote " << ds.train.size() << "/" << ds.valid.size() << "/"
              << ds.test.size() << " train/valid/test samples to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume_path) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    Dataset ds = read_dataset(data_dir);
    check_dataset_matches(cfg, ds.config);

    SdciModel<float> model(ModelShape::from_config(cfg), cfg.seed);
    Trainer<float> trainer(model, cfg, ds, out_dir);

    std::size_t start_epoch = 0;
    if (!resume_path.empty()) {
        CheckpointMeta meta =
            load_checkpoint<float>(resume_path, model.params(), &trainer.optimizer());
        trainer.restore_selection(meta);
        start_epoch = meta.epoch;
        std::cout << "resumed from " << resume_path << " at epoch " << start_epoch << "\n";
    }

    TrainResult result = trainer.fit(start_epoch);
    if (result.diverged) {
        std::cerr << "training diverged after " << result.epochs_done
                  << " epochs; last good checkpoint: " << result.last_path << "\n";
        return 1;
    }
    std::cout << "trained " << result.epochs_done << " epochs";
    if (result.best_metric >= 0 && !result.best_path.empty())
        std::cout << "; best validation edge accuracy " << result.best_metric << " at epoch "
                  << result.best_epoch << " (" << result.best_path << ")";
    std::cout << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir,
             const std::string& split, const std::string& out_path) {
    CheckpointMeta meta = peek_checkpoint(ckpt_path);
    ExperimentConfig cfg = meta.config;
    SdciModel<float> model(ModelShape::from_config(cfg), cfg.seed);
    load_checkpoint<float>(ckpt_path, model.params(), static_cast<Adam<float>*>(nullptr));

    Dataset ds = read_dataset(data_dir);
    check_dataset_matches(cfg, ds.config);
    SplitEvaluation ev =
        evaluate_samples(model, pointers(ds.split(split)), cfg.train.tf_period);

    MetricReport report;
    report.label = run_label(cfg);
    report.split = split;
    report.n_samples = ev.per_sample_edge_acc.size();
    report.edge_acc_mean = 100.0 * ev.edge_acc.mean;
    report.edge_acc_stderr = 100.0 * ev.edge_acc.stderr_;
    report.mse_mean = ev.mse.mean;
    report.mse_stderr = ev.mse.stderr_;
    if (cfg.model.decoder == "fixed_linear" && cfg.scenario == "linear") {
        LinearWorld world{ds.config.data.alpha, ds.config.data.beta};
        report.world_distance = recovered_world_distance(model, world);
    }
    if (ev.state_acc.n > 0) {
        report.state_acc_mean = 100.0 * ev.state_acc.mean;
        report.state_acc_stderr = 100.0 * ev.state_acc.stderr_;
        report.state_acc_raw = 100.0 * ev.state_accuracy_raw;
    }
    report.validate();

    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open " + out_path + " for writing");
    out << report.to_json();
    if (!out.good()) throw IoError("failed writing " + out_path);
    std::cout << render_report({report});
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
    std::vector<MetricReport> reports;
    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open metric report " + path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        reports.push_back(MetricReport::from_json(text));
    }
    std::cout << render_report(reports);
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"state-dependent causal graphs: generate, train, evaluate, report"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, resume_path, ckpt_path;
    std::string split = "test";
    std::vector<std::string> report_inputs;

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset from a config");
    gen->add_option("--config", config_path, "experiment config JSON")->required();
    gen->add_option("--out", out_path, "output dataset directory")->required();

    CLI::App* train = app.add_subcommand("train", "train a model on a generated dataset");
    train->add_option("--config", config_path, "experiment config JSON")->required();
    train->add_option("--data", data_dir, "dataset directory from gen")->required();
    train->add_option("--out", out_path, "run directory for checkpoints and logs")->required();
    train->add_option("--resume", resume_path, "checkpoint to continue from");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--split", split, "train | valid | test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    eval->add_option("--out", out_path, "metric report JSON to write")->required();

    CLI::App* report = app.add_subcommand("report", "render metric JSON files as a table");
    report->add_option("--in", report_inputs, "metric report JSON files")
        ->required()
        ->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the error and usage
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(config_path, out_path);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_path, resume_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_dir, split, out_path);
        if (report->parsed()) return cmd_report(report_inputs);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2; // unreachable with require_subcommand, kept as a guard
}

} // namespace sdci
