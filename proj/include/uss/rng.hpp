#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace uss {

// SplitMix64 finalizer. Used to derive independent stream seeds from
// (base seed, repeat, stream) triples.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Environment = 1, Policy = 2, Estimation = 3 };

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t repeat, Stream stream) noexcept {
    return splitmix64(splitmix64(splitmix64(base) ^ repeat) ^ static_cast<std::uint64_t>(stream));
}

/// Deterministic random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Every derived variate (uniform, normal, gamma, beta) is computed
/// here from raw engine output rather than through <random> distributions,
/// whose algorithms are implementation-defined. A given seed therefore yields
/// the same stream on every conforming platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal, Marsaglia polar method. The spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    /// Gamma(shape, 1) by Marsaglia & Tsang; shapes below one use the
    /// U^(1/shape) boost.
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be positive");
        if (shape < 1.0) {
            return gamma(shape + 1.0) * std::pow(uniform_open(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_open();
            if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Beta(a, b) as a gamma ratio.
    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        return x / (x + y);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace uss
