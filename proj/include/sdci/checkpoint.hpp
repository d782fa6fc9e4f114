#pragma once

#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "sdci/adam.hpp"
#include "sdci/config.hpp"
#include "sdci/tensor_io.hpp"

namespace sdci {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
    int format_version = kCheckpointVersion;
    ExperimentConfig config;   // includes seed, model, and schedule sections
    std::size_t epoch = 0;     // epochs completed so far
    std::uint64_t step_count = 0;
    double lr_scale = 1.0;
    double best_metric = -1.0; // validation edge accuracy high-water mark
    std::size_t best_epoch = 0;
};

namespace detail {

template <typename T>
void write_param_record(std::ostream& out, const std::string& name, const Shape& shape,
                        const T* values, std::size_t count) {
    if constexpr (std::is_same_v<T, float>)
        write_f32(out, name, shape, {values, count});
    else
        write_f64(out, name, shape, {values, count});
}

template <typename T>
void read_param_record(std::istream& in, const std::string& name, const Shape& shape, T* values,
                       std::size_t count) {
    TensorRecord rec = require_record(in, name);
    if (rec.shape != shape)
        throw IoError("checkpoint tensor " + name + ": stored shape " + shape_str(rec.shape) +
                      " does not match expected " + shape_str(shape));
    if constexpr (std::is_same_v<T, float>) {
        auto span = rec.as_f32();
        std::copy(span.begin(), span.end(), values);
    } else {
        auto span = rec.as_f64();
        std::copy(span.begin(), span.end(), values);
    }
    (void)count;
}

} // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParameterStore<T>& params, const Adam<T>* opt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);

    nlohmann::json j{{"format_version", meta.format_version},
                     {"config", nlohmann::json::parse(dump_experiment_config(meta.config))},
                     {"epoch", meta.epoch},
                     {"step_count", meta.step_count},
                     {"lr_scale", meta.lr_scale},
                     {"best_metric", meta.best_metric},
                     {"best_epoch", meta.best_epoch},
                     {"has_optimizer", opt != nullptr},
                     {"dtype", std::is_same_v<T, float> ? "f32" : "f64"}};
    std::string text = j.dump();
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    write_u8(out, "meta", {bytes.size()}, bytes);

    for (const auto& [name, t] : params)
        detail::write_param_record<T>(out, name, t.shape(), t.data().data(), t.size());
    if (opt) {
        std::size_t p = 0;
        for (const auto& [name, t] : params) {
            const auto& slot = opt->slots()[p++];
            detail::write_param_record<T>(out, "optimizer.m." + name, t.shape(), slot.m.data(),
                                          slot.m.size());
            detail::write_param_record<T>(out, "optimizer.v." + name, t.shape(), slot.v.data(),
                                          slot.v.size());
        }
    }
    if (!out) throw IoError("short write while saving checkpoint: " + path);
}

inline CheckpointMeta parse_checkpoint_meta(std::istream& in, const std::string& path) {
    TensorRecord rec = require_record(in, "meta");
    auto bytes = rec.as_u8();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(std::string(bytes.begin(), bytes.end()));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed checkpoint metadata in " + path + ": " + e.what());
    }
    CheckpointMeta meta;
    meta.format_version = j.at("format_version").get<int>();
    if (meta.format_version > kCheckpointVersion)
        throw IoError("checkpoint " + path + " has format_version " +
                      std::to_string(meta.format_version) + "; this build reads up to " +
                      std::to_string(kCheckpointVersion));
    meta.config = parse_experiment_config(j.at("config").dump());
    meta.epoch = j.at("epoch").get<std::size_t>();
    meta.step_count = j.at("step_count").get<std::uint64_t>();
    meta.lr_scale = j.at("lr_scale").get<double>();
    meta.best_metric = j.at("best_metric").get<double>();
    meta.best_epoch = j.at("best_epoch").get<std::size_t>();
    return meta;
}

// Metadata only, without touching any tensors.
inline CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    return parse_checkpoint_meta(in, path);
}

// Restores every parameter (and optimizer slots when given) in store order.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, ParameterStore<T>& params,
                               Adam<T>* opt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    CheckpointMeta meta = parse_checkpoint_meta(in, path);

    for (auto& [name, t] : params)
        detail::read_param_record<T>(in, name, t.shape(), t.data().data(), t.size());
    if (opt) {
        std::size_t p = 0;
        for (auto& [name, t] : params) {
            auto& slot = opt->slots()[p++];
            detail::read_param_record<T>(in, "optimizer.m." + name, t.shape(), slot.m.data(),
                                         slot.m.size());
            detail::read_param_record<T>(in, "optimizer.v." + name, t.shape(), slot.v.data(),
                                         slot.v.size());
        }
        opt->set_step_count(meta.step_count);
        opt->set_lr_scale(static_cast<T>(meta.lr_scale));
    }
    return meta;
}

} // namespace sdci
