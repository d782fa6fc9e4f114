#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sdci {

// One evaluation artifact: metrics for a single run on a single split.
// Accuracies are percentages; mse and world distance are raw.
struct MetricReport {
    int format_version = 1;
    std::string label;
    std::string split;
    std::size_t n_samples = 0;
    double edge_acc_mean = 0.0, edge_acc_stderr = 0.0;
    double mse_mean = 0.0, mse_stderr = 0.0;
    std::optional<double> world_distance;  // fixed-linear decoder runs only
    std::optional<double> state_acc_mean;  // regimes with state prediction
    std::optional<double> state_acc_stderr;
    std::optional<double> state_acc_raw;   // hidden regime: before relabeling

    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
    void validate() const; // percent ranges, non-negative stderr
};

// Aligned text table over any number of evaluation artifacts: one row per run
// label with train/test column pairs; world-distance and state-accuracy
// columns appear only when some input carries them.
std::string render_report(const std::vector<MetricReport>& reports);

} // namespace sdci
