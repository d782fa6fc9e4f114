#include "sdci/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sdci/errors.hpp"

namespace sdci {

namespace {

nlohmann::json maybe(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string sci2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

std::string pm(const std::string& mean, const std::string& err) {
    return mean + " +- " + err;
}

} // namespace

std::string MetricReport::to_json() const {
    nlohmann::json j{
        {"format_version", format_version},
        {"label", label},
        {"split", split},
        {"n_samples", n_samples},
        {"edge_accuracy", {{"mean", edge_acc_mean}, {"stderr", edge_acc_stderr}}},
        {"reconstruction_mse", {{"mean", mse_mean}, {"stderr", mse_stderr}}},
        {"world_param_distance", maybe(world_distance)},
        {"state_accuracy",
         state_acc_mean ? nlohmann::json{{"mean", *state_acc_mean},
                                         {"stderr", state_acc_stderr.value_or(0.0)}}
                        : nlohmann::json(nullptr)},
        {"state_accuracy_raw", maybe(state_acc_raw)},
    };
    return j.dump(2) + "\n";
}

MetricReport MetricReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("metric report is not valid JSON: ") + e.what());
    }
    MetricReport r;
    try {
        r.format_version = j.at("format_version").get<int>();
        if (r.format_version > 1)
            throw IoError("metric report format version " +
                          std::to_string(r.format_version) + " is newer than supported (1)");
        r.label = j.at("label").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.n_samples = j.at("n_samples").get<std::size_t>();
        r.edge_acc_mean = j.at("edge_accuracy").at("mean").get<double>();
        r.edge_acc_stderr = j.at("edge_accuracy").at("stderr").get<double>();
        r.mse_mean = j.at("reconstruction_mse").at("mean").get<double>();
        r.mse_stderr = j.at("reconstruction_mse").at("stderr").get<double>();
        r.world_distance = opt_field(j, "world_param_distance");
        if (j.contains("state_accuracy") && !j.at("state_accuracy").is_null()) {
            r.state_acc_mean = j.at("state_accuracy").at("mean").get<double>();
            r.state_acc_stderr = j.at("state_accuracy").at("stderr").get<double>();
        }
        r.state_acc_raw = opt_field(j, "state_accuracy_raw");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("metric report is missing fields: ") + e.what());
    }
    r.validate();
    return r;
}

void MetricReport::validate() const {
    auto percent = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 100.0))
            throw ValueError(std::string(what) + " out of [0, 100]: " + std::to_string(v));
    };
    percent(edge_acc_mean, "edge accuracy");
    if (state_acc_mean) percent(*state_acc_mean, "state accuracy");
    if (state_acc_raw) percent(*state_acc_raw, "raw state accuracy");
    if (edge_acc_stderr < 0 || mse_stderr < 0 || state_acc_stderr.value_or(0) < 0)
        throw ValueError("standard errors must be non-negative");
    if (split.empty()) throw ValueError("metric report needs a split label");
}

std::string render_report(const std::vector<MetricReport>& reports) {
    // one row per label, train/test cells side by side; any other split gets
    // its own row with the split spelled out
    struct Row {
        const MetricReport* train = nullptr;
        const MetricReport* test = nullptr;
    };
    std::vector<std::string> order;
    std::map<std::string, Row> rows;
    for (const auto& r : reports) {
        std::string key = r.label;
        if (r.split != "train" && r.split != "test") key += " [" + r.split + "]";
        if (!rows.count(key)) order.push_back(key);
        Row& row = rows[key];
        if (r.split == "train") row.train = &r;
        else row.test = &r;
    }

    bool any_world = false, any_state = false;
    for (const auto& r : reports) {
        any_world |= r.world_distance.has_value();
        any_state |= r.state_acc_mean.has_value();
    }

    std::vector<std::string> header{"method", "edge acc % (train)", "edge acc % (test)",
                                    "recon mse (train)", "recon mse (test)"};
    if (any_world) header.push_back("world dist");
    if (any_state) {
        header.push_back("state acc % (train)");
        header.push_back("state acc % (test)");
    }

    auto edge_cell = [](const MetricReport* r) {
        return r ? pm(fixed2(r->edge_acc_mean), fixed2(r->edge_acc_stderr)) : std::string("-");
    };
    auto mse_cell = [](const MetricReport* r) {
        return r ? pm(sci2(r->mse_mean), sci2(r->mse_stderr)) : std::string("-");
    };
    auto state_cell = [](const MetricReport* r) {
        if (!r || !r->state_acc_mean) return std::string("-");
        return pm(fixed2(*r->state_acc_mean), fixed2(r->state_acc_stderr.value_or(0.0)));
    };

    std::vector<std::vector<std::string>> cells;
    for (const auto& key : order) {
        const Row& row = rows.at(key);
        std::vector<std::string> line{key, edge_cell(row.train), edge_cell(row.test),
                                      mse_cell(row.train), mse_cell(row.test)};
        if (any_world) {
            const MetricReport* src = row.test ? row.test : row.train;
            line.push_back(src && src->world_distance ? sci2(*src->world_distance)
                                                      : std::string("-"));
        }
        if (any_state) {
            line.push_back(state_cell(row.train));
            line.push_back(state_cell(row.test));
        }
        cells.push_back(std::move(line));
    }

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
    }

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << line[c];
            if (c + 1 < line.size()) out << std::string(width[c] - line[c].size() + 2, ' ');
        }
        out << "\n";
    };
    emit(header);
    std::size_t total = 0;
    for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
    out << std::string(total, '-') << "\n";
    for (const auto& line : cells) emit(line);
    return out.str();
}

} // namespace sdci
