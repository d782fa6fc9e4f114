#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdci/checkpoint.hpp"
#include "sdci/dataset.hpp"
#include "sdci/eval.hpp"
#include "sdci/loss.hpp"
#include "sdci/model.hpp"

namespace sdci {

// Multiplicative learning-rate decay: factor^(completed periods).
inline double lr_decay_scale(std::size_t epoch, double factor, std::size_t period) {
    if (period == 0) return 1.0;
    return std::pow(factor, double(epoch / period));
}

// Deterministic in-place shuffle driven by a named stream.
inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_int(0, int(i) - 1)]);
}

struct TrainResult {
    std::size_t epochs_done = 0;
    double best_metric = -1.0;
    std::size_t best_epoch = 0;
    bool diverged = false;
    std::string last_path, best_path;
};

struct EpochStats {
    double nll_p = 0, nll_s = 0, kl = 0, total = 0;
    double edge_acc = -1, mse = 0; // edge_acc < 0 means not computed
    double seconds = 0;
};

// Owns the optimizer and the run directory: epoch loop, metric log,
// checkpoints, validation-based model selection.
template <typename T>
class Trainer {
public:
    Trainer(SdciModel<T>& model, const ExperimentConfig& cfg, const Dataset& data,
            std::string run_dir)
        : model_(&model), cfg_(cfg), data_(&data), run_dir_(std::move(run_dir)),
          opt_(model.params(), make_groups(cfg)) {
        std::filesystem::create_directories(run_dir_);
    }

    Adam<T>& optimizer() { return opt_; }

    void restore_selection(const CheckpointMeta& meta) {
        best_metric_ = meta.best_metric;
        best_epoch_ = meta.best_epoch;
    }

    CheckpointMeta make_meta(std::size_t epochs_done) const {
        CheckpointMeta meta;
        meta.config = cfg_;
        meta.epoch = epochs_done;
        meta.step_count = opt_.step_count();
        meta.lr_scale = double(opt_.lr_scale());
        meta.best_metric = best_metric_;
        meta.best_epoch = best_epoch_;
        return meta;
    }

    // One pass over the training split. Returns non-finite total on blow-up.
    EpochStats train_epoch(std::size_t epoch) {
        auto t0 = std::chrono::steady_clock::now();
        opt_.set_lr_scale(static_cast<T>(
            lr_decay_scale(epoch, cfg_.train.decay_factor, cfg_.train.decay_period)));

        const auto& train = data_->split("train");
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        RngStream shuffle_rng = RngStream::derive(cfg_.seed, "train/shuffle", epoch);
        shuffle_indices(order, shuffle_rng);

        EpochStats stats;
        std::vector<double> edge_accs;
        double sq_err = 0;
        std::size_t sq_count = 0, done = 0, batch_index = 0;
        std::size_t B = cfg_.train.batch;
        bool observed = cfg_.regime != Regime::hidden;

        for (std::size_t start = 0; start < order.size(); start += B, ++batch_index) {
            std::size_t stop = std::min(order.size(), start + B);
            std::vector<const TimeSeriesSample*> chunk;
            chunk.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) chunk.push_back(&train[order[i]]);
            Batch<T> batch = build_batch<T>(chunk, model_->shape().states_in_input);

            RngStream gumbel =
                RngStream::derive(cfg_.seed, "train/gumbel/" + std::to_string(epoch), batch_index);
            Tape<T> tape;
            double b_nll_p, b_nll_s, b_kl, b_total;
            {
                typename Tape<T>::Scope scope(tape);
                ModelOutput<T> out = model_->forward(batch, gumbel, cfg_.train.hard_samples,
                                                     cfg_.train.tf_period);
                LossBreakdown<T> loss = negative_elbo(out, batch, cfg_.train.sigma2,
                                                      cfg_.train.lambda_state, cfg_.model.tau);
                b_nll_p = double(loss.nll_p.item());
                b_nll_s = double(loss.nll_s.item());
                b_kl = double(loss.kl.item());
                b_total = double(loss.total.item());
                if (std::isfinite(b_total)) {
                    tape.backward(loss.total);
                    opt_.step();
                }
                if (observed) {
                    auto graphs = predicted_graphs(out.edge_logits, batch, model_->shape().K_model);
                    for (std::size_t b = 0; b < batch.B; ++b)
                        edge_accs.push_back(edge_accuracy(graphs[b], chunk[b]->graph));
                }
                for (std::size_t b = 0; b < batch.B; ++b) {
                    sq_err += rollout_mse(out, batch, b);
                    ++sq_count;
                }
            }
            double w = double(batch.B);
            stats.nll_p += b_nll_p * w;
            stats.nll_s += b_nll_s * w;
            stats.kl += b_kl * w;
            stats.total += b_total * w;
            done += batch.B;
            if (!std::isfinite(b_total)) break;
        }

        double n = double(done ? done : 1);
        stats.nll_p /= n;
        stats.nll_s /= n;
        stats.kl /= n;
        stats.total /= n;
        if (!edge_accs.empty()) stats.edge_acc = summarize(edge_accs).mean;
        stats.mse = sq_count ? sq_err / double(sq_count) : 0.0;
        stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return stats;
    }

    // Runs epochs [start_epoch, cfg.train.epochs). Call restore_selection and
    // load the optimizer first when resuming.
    TrainResult fit(std::size_t start_epoch = 0) {
        write_config_snapshot();
        std::ofstream log(log_path(), std::ios::app);
        if (!log) throw IoError("cannot write metric log: " + log_path());

        TrainResult result;
        result.last_path = run_dir_ + "/last.ckpt";
        result.best_path = run_dir_ + "/best.ckpt";

        for (std::size_t e = start_epoch; e < cfg_.train.epochs; ++e) {
            EpochStats stats = train_epoch(e);
            log_row(log, e, "train", stats);
            if (!std::isfinite(stats.total)) {
                result.diverged = true;
                result.epochs_done = e;
                break;
            }
            result.epochs_done = e + 1;

            bool last = e + 1 == cfg_.train.epochs;
            if ((e + 1) % cfg_.train.valid_period == 0 || last) {
                EpochStats vstats = validate(e, log);
                if (vstats.edge_acc > best_metric_) {
                    best_metric_ = vstats.edge_acc;
                    best_epoch_ = e;
                    save_checkpoint(result.best_path, make_meta(e + 1), model_->params(), &opt_);
                }
            }
            save_checkpoint(result.last_path, make_meta(e + 1), model_->params(), &opt_);
            if (cfg_.train.checkpoint_period && (e + 1) % cfg_.train.checkpoint_period == 0)
                save_checkpoint(run_dir_ + "/epoch_" + std::to_string(e + 1) + ".ckpt",
                                make_meta(e + 1), model_->params(), &opt_);
        }
        result.best_metric = best_metric_;
        result.best_epoch = best_epoch_;
        return result;
    }

    std::string log_path() const { return run_dir_ + "/metrics.jsonl"; }

private:
    static std::vector<typename Adam<T>::Group> make_groups(const ExperimentConfig& cfg) {
        std::vector<typename Adam<T>::Group> groups;
        if (cfg.model.freeze_decoder)
            groups.push_back({"decoder.fixed.", T(0)});
        groups.push_back({"decoder.", static_cast<T>(cfg.train.decoder_lr)});
        groups.push_back({"encoder.", static_cast<T>(cfg.train.encoder_lr)});
        return groups;
    }

    EpochStats validate(std::size_t epoch, std::ofstream& log) {
        const auto& valid = data_->split("valid");
        std::vector<const TimeSeriesSample*> ptrs;
        ptrs.reserve(valid.size());
        for (const auto& s : valid) ptrs.push_back(&s);
        SplitEvaluation ev =
            evaluate_samples(*model_, ptrs, cfg_.train.tf_period, cfg_.train.batch);
        EpochStats stats;
        stats.nll_p = stats.nll_s = stats.kl = stats.total =
            std::numeric_limits<double>::quiet_NaN();
        stats.edge_acc = ev.edge_acc.mean;
        stats.mse = ev.mse.mean;
        log_row(log, epoch, "valid", stats);
        return stats;
    }

    void log_row(std::ofstream& log, std::size_t epoch, const std::string& split,
                 const EpochStats& stats) {
        auto num = [](double v) {
            return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
        };
        nlohmann::json row{{"epoch", epoch},
                           {"split", split},
                           {"nll_p", num(stats.nll_p)},
                           {"nll_s", num(stats.nll_s)},
                           {"kl", num(stats.kl)},
                           {"edge_acc", stats.edge_acc < 0 ? nlohmann::json(nullptr)
                                                           : nlohmann::json(stats.edge_acc)},
                           {"mse", num(stats.mse)},
                           {"lr", cfg_.train.encoder_lr * double(opt_.lr_scale())},
                           {"seconds", stats.seconds}};
        log << row.dump() << "\n";
        log.flush();
    }

    void write_config_snapshot() const {
        std::ofstream out(run_dir_ + "/config.json", std::ios::trunc);
        if (!out) throw IoError("cannot write config snapshot in " + run_dir_);
        out << dump_experiment_config(cfg_);
    }

    SdciModel<T>* model_;
    ExperimentConfig cfg_;
    const Dataset* data_;
    std::string run_dir_;
    Adam<T> opt_;
    double best_metric_ = -1.0;
    std::size_t best_epoch_ = 0;
};

} // namespace sdci
