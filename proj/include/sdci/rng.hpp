#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "sdci/errors.hpp"

namespace sdci {

// Deterministic seeded random stream. Streams are derived from a master seed
// plus a name (and optional index), so each concern (data, init, gumbel, ...)
// owns an independent stream and results do not depend on evaluation order
// elsewhere in the program. All conversions from raw bits are done here so the
// produced values are identical on any platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                     std::uint64_t index = 0) {
        std::uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        std::uint64_t x = master ^ h;
        x += index * 0x9e3779b97f4a7c15ull;
        // splitmix64 finalizer
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

    static RngStream derive(std::uint64_t master, std::string_view name,
                            std::uint64_t index = 0) {
        return RngStream(derive_seed(master, name, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in the open interval (0, 1); safe under log()
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw ValueError("uniform_int: empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // rejection sampling to avoid modulo bias
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / span * span;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    // standard normal via Box-Muller (two fresh uniforms per call)
    double normal() {
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Gumbel(0, 1) noise used by the concrete / Gumbel-softmax relaxation
    double gumbel() { return -std::log(-std::log(uniform_open())); }

private:
    std::mt19937_64 engine_;
};

} // namespace sdci
