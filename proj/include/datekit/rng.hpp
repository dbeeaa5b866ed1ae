#pragma once

#include <cstdint>
#include <random>

namespace datekit {

/// Purpose of a random stream. Mixed into the stream key so that, e.g., the
/// volatility and noise draws of the same unit never share a sequence.
enum class StreamRole : std::uint64_t {
    Volatility = 1,
    Noise = 2,
    Assignment = 3,
    Posterior = 4,
    Placebo = 5,
    Test = 99,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t rep, std::uint64_t unit,
                                   StreamRole role) noexcept {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ rep);
    h = mix64(h ^ (unit + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ static_cast<std::uint64_t>(role));
    return h;
}

/// A random stream identified by (seed, replication, unit, role). Streams are
/// independent of the order in which they are created, so replications can be
/// evaluated on any number of workers without changing results.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : engine_(key) {}
    RandomStream(std::uint64_t seed, std::uint64_t rep, std::uint64_t unit, StreamRole role)
        : engine_(stream_key(seed, rep, unit, role)) {}

    double normal() { return std_normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * std_normal_(engine_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    /// Gamma with shape/rate parameterisation.
    double gamma(double shape, double rate) {
        return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
    }

    double beta(double a, double b) {
        const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
        const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
        return x / (x + y);
    }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> std_normal_{0.0, 1.0};
};

}  // namespace datekit
