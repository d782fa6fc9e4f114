// Acceptance gates for the linear scenario at desk scale (criteria 2-5).
//
// Protocol per gate: generate a dataset (1,000 train / 200 valid / 200 test
// samples), train for 300 epochs, evaluate the final checkpoint on the test
// split. Artifacts live under ./acceptance_work/ and finished runs are reused
// on re-invocation when their stored config matches and training completed
// (set SDCI_ACCEPT_KEEP=0 to force fresh runs). Every gate prints one
// "PASS <name>: ..." or "FAIL <name>: ..." line; the process exits nonzero if
// any gate fails.
//
// Gates:
//   criterion 2  single-state recovery: edge accuracy >= 90% on test.
//   criterion 3  two-state recovery: state-conditioned model >= 85%, beats the
//                single-graph broadcast baseline by >= 10 points, and the
//                truth-frozen decoder variant reaches >= 82%.
//   criterion 4  world-parameter recovery: learned beta_1 within 5e-3 of 0.05.
//   criterion 5  hidden-state regime: aligned state accuracy >= 95% and edge
//                accuracy >= 85%.

#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sdci/checkpoint.hpp"
#include "sdci/config.hpp"
#include "sdci/dataset.hpp"
#include "sdci/eval.hpp"
#include "sdci/model.hpp"
#include "sdci/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sdci;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n" << std::flush;
    if (!pass) ++g_failures;
}

bool keep_artifacts() {
    const char* v = std::getenv("SDCI_ACCEPT_KEEP");
    return v == nullptr || std::string(v) != "0";
}

// Shared desk-scale schedule for every linear gate. Small batches buy the
// optimizer enough steps to converge within the 300-epoch budget.
json desk_linear_base(const std::string& regime, int n_states, std::uint64_t seed) {
    json j = {
        {"scenario", "linear"},
        {"regime", regime},
        {"seed", seed},
        {"data", {{"n_train", 1000}, {"n_valid", 200}, {"n_test", 200}, {"n_states", n_states}}},
        {"train",
         {{"epochs", 300},
          {"batch", 32},
          {"encoder_lr", 1e-3},
          {"valid_period", 10},
          {"checkpoint_period", 100}}},
    };
    return j;
}

ExperimentConfig config_from(const json& j) { return parse_experiment_config(j.dump()); }

Dataset load_or_generate(const ExperimentConfig& cfg, const fs::path& dir) {
    if (keep_artifacts() && fs::exists(dir / "manifest.json")) {
        try {
            Dataset ds = read_dataset(dir.string());
            if (dump_experiment_config(ds.config) == dump_experiment_config(cfg)) return ds;
        } catch (const std::exception&) {
            // fall through to regeneration
        }
    }
    fs::remove_all(dir);
    Dataset ds = generate_dataset(cfg);
    write_dataset(ds, dir.string());
    return ds;
}

// Train (or resume/reuse) a run and return the path of its final checkpoint.
std::string ensure_trained(const ExperimentConfig& cfg, const Dataset& ds, const fs::path& dir) {
    const std::string last = (dir / "last.ckpt").string();
    std::size_t start_epoch = 0;
    std::optional<CheckpointMeta> resume;
    if (keep_artifacts() && fs::exists(last)) {
        try {
            CheckpointMeta meta = peek_checkpoint(last);
            if (dump_experiment_config(meta.config) == dump_experiment_config(cfg)) {
                if (meta.epoch >= cfg.train.epochs) return last;
                resume = meta;
                start_epoch = meta.epoch;
            }
        } catch (const std::exception&) {
            // unreadable checkpoint: retrain from scratch
        }
    }
    if (!resume) fs::remove_all(dir);

    SdciModel<float> model(ModelShape::from_config(cfg), cfg.seed);
    Trainer<float> trainer(model, cfg, ds, dir.string());
    if (resume) {
        load_checkpoint<float>(last, model.params(), &trainer.optimizer());
        trainer.restore_selection(*resume);
    }
    auto t0 = std::chrono::steady_clock::now();
    TrainResult result = trainer.fit(start_epoch);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "  [trained " << dir.filename().string() << ": " << result.epochs_done
              << " epochs in " << int(secs) << "s" << (result.diverged ? ", DIVERGED" : "")
              << "]\n"
              << std::flush;
    if (result.diverged) throw ValueError("training diverged for " + dir.string());
    return last;
}

struct RunMetrics {
    double edge_acc = 0.0;   // percent, test split
    double mse = 0.0;
    double state_acc = -1.0; // percent; negative when the regime has no state head
    double beta1 = 0.0;      // learned edge-type-1 coupling (fixed-form decoder)
    double world_distance = -1.0;
};

std::vector<const TimeSeriesSample*> pointers(const std::vector<TimeSeriesSample>& v) {
    std::vector<const TimeSeriesSample*> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(&s);
    return out;
}

RunMetrics evaluate_run(const std::string& ckpt, const Dataset& ds) {
    CheckpointMeta meta = peek_checkpoint(ckpt);
    const ExperimentConfig& cfg = meta.config;
    SdciModel<float> model(ModelShape::from_config(cfg), cfg.seed);
    load_checkpoint<float>(ckpt, model.params(), static_cast<Adam<float>*>(nullptr));

    SplitEvaluation ev = evaluate_samples(model, pointers(ds.test), cfg.train.tf_period);
    RunMetrics m;
    m.edge_acc = 100.0 * ev.edge_acc.mean;
    m.mse = ev.mse.mean;
    if (ev.state_acc.n > 0) m.state_acc = 100.0 * ev.state_acc.mean;
    if (cfg.model.decoder == "fixed_linear") {
        const Tensor<float>& beta = model.params().get("decoder.fixed.beta");
        if (beta.size() > 1) m.beta1 = double(beta.data()[1]);
        m.world_distance = recovered_world_distance(model, LinearWorld{ds.config.data.alpha,
                                                                       ds.config.data.beta});
    }
    return m;
}

RunMetrics run_experiment(const json& cfg_json, const Dataset& ds, const fs::path& run_dir) {
    ExperimentConfig cfg = config_from(cfg_json);
    std::string ckpt = ensure_trained(cfg, ds, run_dir);
    return evaluate_run(ckpt, ds);
}

std::string fmt(double v, int prec = 2) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

std::string fmt_sci(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << v;
    return os.str();
}

}  // namespace

int main() {
    fs::path work = fs::path("acceptance_work");
    fs::create_directories(work);
    std::cout << "linear acceptance runs (artifacts in " << fs::absolute(work).string() << ")\n"
              << std::flush;

    try {
        // ---- criterion 2: single-state recovery --------------------------------
        {
            json cfg = desk_linear_base("observed_independent", 1, 101);
            Dataset ds = load_or_generate(config_from(cfg), work / "linear_k1_data");
            RunMetrics m = run_experiment(cfg, ds, work / "linear_k1_run");
            report("criterion 2 single-state edge accuracy",
                   m.edge_acc >= 90.0,
                   fmt(m.edge_acc) + "% test (gate >= 90%), mse " + fmt_sci(m.mse));
        }

        // ---- criteria 3 + 4: two-state recovery on one shared dataset ---------
        {
            json base = desk_linear_base("observed_independent", 2, 102);
            Dataset ds = load_or_generate(config_from(base), work / "linear_k2_data");

            RunMetrics st = run_experiment(base, ds, work / "linear_k2_static_run");

            json broadcast = base;
            broadcast["model"]["model_states"] = 1;
            RunMetrics bc = run_experiment(broadcast, ds, work / "linear_k2_broadcast_run");

            json frozen = base;
            frozen["model"]["fixed_init_truth"] = true;
            frozen["model"]["freeze_decoder"] = true;
            RunMetrics fz = run_experiment(frozen, ds, work / "linear_k2_frozen_run");

            report("criterion 3a two-state edge accuracy", st.edge_acc >= 85.0,
                   fmt(st.edge_acc) + "% test (gate >= 85%)");
            report("criterion 3b margin over single-graph broadcast",
                   st.edge_acc - bc.edge_acc >= 10.0,
                   fmt(st.edge_acc) + "% vs " + fmt(bc.edge_acc) + "% (gate >= 10 point gap)");
            report("criterion 3c truth-frozen decoder variant", fz.edge_acc >= 82.0,
                   fmt(fz.edge_acc) + "% test (gate >= 82%)");
            report("criterion 4 coupling recovery", std::abs(st.beta1 - 0.05) <= 5e-3,
                   "learned beta_1 = " + fmt_sci(st.beta1) + " (gate |beta_1 - 0.05| <= 5e-3), "
                   "world distance " + fmt_sci(st.world_distance));
        }

        // ---- criterion 5: hidden-state regime ----------------------------------
        {
            json cfg = desk_linear_base("hidden", 2, 103);
            Dataset ds = load_or_generate(config_from(cfg), work / "linear_hidden_data");
            RunMetrics m = run_experiment(cfg, ds, work / "linear_hidden_run");
            report("criterion 5a hidden-state assignment accuracy", m.state_acc >= 95.0,
                   fmt(m.state_acc) + "% aligned (gate >= 95%)");
            report("criterion 5b hidden-state edge accuracy", m.edge_acc >= 85.0,
                   fmt(m.edge_acc) + "% test (gate >= 85%)");
        }
    } catch (const std::exception& e) {
        report("linear acceptance harness", false, std::string("unhandled error: ") + e.what());
    }

    if (g_failures == 0) {
        std::cout << "all linear acceptance gates passed\n";
        return 0;
    }
    std::cout << g_failures << " linear acceptance gate(s) failed\n";
    return 1;
}
