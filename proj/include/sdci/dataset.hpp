#pragma once

#include <string>
#include <vector>

#include "sdci/config.hpp"
#include "sdci/graph.hpp"

namespace sdci {

// In-memory dataset. Trajectories are already normalized (springs: divided by
// the box half-width) and quantized to 32-bit precision, so writing and
// reading back reproduces the exact same values.
struct Dataset {
    ExperimentConfig config;
    double norm_scale = 1.0;
    std::vector<TimeSeriesSample> train, valid, test;

    const std::vector<TimeSeriesSample>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "valid") return valid;
        if (name == "test") return test;
        throw ValueError("unknown split: " + name);
    }
};

// Deterministic generation: every sample owns an RNG stream derived from
// (seed, split, index), so thread count never changes the output. Honors the
// SDCI_THREADS environment variable.
Dataset generate_dataset(const ExperimentConfig& cfg);

// manifest.json + one .tensors file per split in `dir`.
void write_dataset(const Dataset& ds, const std::string& dir);

Dataset read_dataset(const std::string& dir);

} // namespace sdci
