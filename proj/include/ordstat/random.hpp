#pragma once

// Seeded random streams. Every stochastic routine takes an `Rng&` that the
// caller holds exclusively; independent streams are derived from a master
// seed with a splitmix64-based counter scheme so results do not depend on
// thread scheduling.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>

#include "ordstat/special.hpp"

namespace ordstat {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for stream `ids...` under `master`, e.g. derive_seed(seed, {chain, 0}).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Child stream, deterministic in (this stream's seed, id).
    [[nodiscard]] Rng split(std::uint64_t id) { return Rng(derive_seed(engine_(), {id})); }

    /// Uniform on the open interval (0,1).
    double uniform() {
        for (;;) {
            const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    double exponential() { return -std::log(uniform()); }

    /// Gamma with shape/rate parameterization.
    double gamma(double shape, double rate) {
        if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma: shape and rate must be positive");
        return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
    }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

    std::int64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw DomainError("poisson: negative mean");
        if (mean == 0.0) return 0;
        return std::poisson_distribution<std::int64_t>(mean)(engine_);
    }

    std::int64_t binomial(std::int64_t n, double p) {
        if (n <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        return std::binomial_distribution<std::int64_t>(n, p)(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Gumbel-max draw from unnormalized log weights; -inf entries are never chosen.
    std::size_t categorical_log(std::span<const double> log_weights) {
        std::size_t best = log_weights.size();
        double best_val = kNegInf;
        for (std::size_t i = 0; i < log_weights.size(); ++i) {
            if (log_weights[i] == kNegInf) continue;
            const double g = log_weights[i] - std::log(-std::log(uniform()));
            if (best == log_weights.size() || g > best_val) {
                best = i;
                best_val = g;
            }
        }
        if (best == log_weights.size()) throw DomainError("categorical_log: all weights are zero");
        return best;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace ordstat
