#pragma once

// Order statistics of discrete parents: the r-th smallest of D i.i.d. draws.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordstat/parallel.hpp"
#include "ordstat/parents.hpp"
#include "ordstat/random.hpp"
#include "ordstat/special.hpp"

namespace ordstat {

/// Invalid run configuration (sample sizes, model settings, input data).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Rank r (1-based) and order D of an order statistic.
class OrderSpec {
  public:
    OrderSpec(std::int64_t r, std::int64_t D) : r_(r), D_(D) {
        if (D < 1 || r < 1 || r > D) {
            throw DomainError("OrderSpec: need 1 <= r <= D (got r=" + std::to_string(r) + ", D=" + std::to_string(D) +
                              ")");
        }
    }
    static OrderSpec min(std::int64_t D) { return {1, D}; }
    static OrderSpec max(std::int64_t D) { return {D, D}; }
    static OrderSpec median(std::int64_t D) {
        if (D < 1 || D % 2 == 0) throw DomainError("OrderSpec::median: D must be odd");
        return {(D + 1) / 2, D};
    }

    [[nodiscard]] std::int64_t r() const { return r_; }
    [[nodiscard]] std::int64_t D() const { return D_; }
    [[nodiscard]] bool is_max() const { return r_ == D_; }
    [[nodiscard]] bool is_min() const { return r_ == 1; }

    friend bool operator==(const OrderSpec&, const OrderSpec&) = default;

  private:
    std::int64_t r_;
    std::int64_t D_;
};

namespace detail {
// count * log p with 0 * (-inf) = 0.
inline double scaled_log(std::int64_t count, double log_p) {
    return count == 0 ? 0.0 : static_cast<double>(count) * log_p;
}

// Streaming log-sum-exp accumulator.
struct LogAccumulator {
    double max = kNegInf;
    double sum = 0.0;
    void add(double x) {
        if (x == kNegInf) return;
        if (x <= max) {
            sum += std::exp(x - max);
        } else {
            sum = sum * std::exp(max - x) + 1.0;
            max = x;
        }
    }
    [[nodiscard]] double result() const { return max == kNegInf ? kNegInf : max + std::log(sum); }
};
}  // namespace detail

/// log P(X >= k) for X ~ Binomial(m, F), given log F and log(1-F).
inline double log_binom_upper_tail(std::int64_t m, std::int64_t k, double log_f, double log_s) {
    if (k <= 0) return 0.0;
    if (k > m) return kNegInf;
    detail::LogAccumulator acc;
    const double lfm = special::log_factorial(m);
    for (std::int64_t t = k; t <= m; ++t) {
        acc.add(lfm - special::log_factorial(t) - special::log_factorial(m - t) + detail::scaled_log(t, log_f) +
                detail::scaled_log(m - t, log_s));
    }
    return acc.result();
}

/// log P(B <= a-1 and B+E >= b) for (B, E, G) ~ Multinomial(m; L, E, G).
///
/// This is the probability that, among m fresh draws split into below /
/// equal / above some value, at most a-1 fall below and at least b fall at
/// or below. Summed term by term so it is never negative.
inline double log_trinomial_window(std::int64_t m, std::int64_t a, std::int64_t b, double log_l, double log_e,
                                   double log_g) {
    if (a <= 0 || m < 0) return kNegInf;
    if (b > m) return kNegInf;
    detail::LogAccumulator acc;
    const double lfm = special::log_factorial(m);
    const std::int64_t j_max = std::min(a - 1, m);
    for (std::int64_t j = 0; j <= j_max; ++j) {
        const double head = lfm - special::log_factorial(j) + detail::scaled_log(j, log_l);
        if (head == kNegInf) continue;
        for (std::int64_t e = std::max<std::int64_t>(0, b - j); e <= m - j; ++e) {
            const std::int64_t g = m - j - e;
            acc.add(head - special::log_factorial(e) - special::log_factorial(g) + detail::scaled_log(e, log_e) +
                    detail::scaled_log(g, log_g));
        }
    }
    return acc.result();
}

/// Moments of a DiscreteParent-valued order statistic from Monte Carlo.
struct DispersionEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double index = 0.0;  // variance / mean
    double mc_stderr_index = 0.0;
    std::int64_t n_samples = 0;
};

template <DiscreteParent P>
class OrderStatDistribution {
  public:
    OrderStatDistribution(P parent, OrderSpec spec) : parent_(std::move(parent)), spec_(spec) {}

    [[nodiscard]] const P& parent() const { return parent_; }
    [[nodiscard]] const OrderSpec& spec() const { return spec_; }

    /// log F^(r,D)(z) = log sum_{t>=r} C(D,t) F(z)^t (1-F(z))^(D-t).
    [[nodiscard]] double log_cdf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        return log_binom_upper_tail(spec_.D(), spec_.r(), parent_.log_cdf(z), parent_.log_sf(z));
    }
    /// log(1 - F^(r,D)(z)), computed from the lower binomial tail directly.
    [[nodiscard]] double log_sf(std::int64_t z) const {
        if (z < 0) return 0.0;
        // 1 - F^(r,D)(z) = P(Bin(D, 1-F) >= D - r + 1)
        return log_binom_upper_tail(spec_.D(), spec_.D() - spec_.r() + 1, parent_.log_sf(z), parent_.log_cdf(z));
    }
    [[nodiscard]] double log_pmf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        return log_trinomial_window(spec_.D(), spec_.r(), spec_.r(), parent_.log_cdf(z - 1), parent_.log_pmf(z),
                                    parent_.log_sf(z));
    }
    [[nodiscard]] double cdf(std::int64_t z) const { return std::exp(log_cdf(z)); }
    [[nodiscard]] double pmf(std::int64_t z) const { return std::exp(log_pmf(z)); }

    /// Draws D parent values and selects the r-th smallest.
    std::int64_t sample(Rng& rng) const {
        std::vector<std::int64_t> draws(static_cast<std::size_t>(spec_.D()));
        for (auto& z : draws) z = parent_.sample(rng);
        auto nth = draws.begin() + (spec_.r() - 1);
        std::nth_element(draws.begin(), nth, draws.end());
        return *nth;
    }

    /// Upper end of the support window that carries all but `tail` of the
    /// mass. The order statistic lies below the maximum, so the parent's
    /// (tail/D)-quantile bounds it.
    [[nodiscard]] std::int64_t support_upper_bound(double tail = 1e-12) const {
        return upper_quantile_bound(parent_, tail / static_cast<double>(spec_.D()));
    }

  private:
    P parent_;
    OrderSpec spec_;
};

template <DiscreteParent P>
double os_cdf(const OrderStatDistribution<P>& dist, std::int64_t z) {
    return dist.cdf(z);
}
template <DiscreteParent P>
double os_pmf(const OrderStatDistribution<P>& dist, std::int64_t z) {
    return dist.pmf(z);
}
template <DiscreteParent P>
std::int64_t os_sample(const OrderStatDistribution<P>& dist, Rng& rng) {
    return dist.sample(rng);
}

/// Runtime-dispatched order statistic over either parent family.
using AnyOrderStat = std::variant<OrderStatDistribution<PoissonParent>, OrderStatDistribution<NegBinParent>>;

inline AnyOrderStat make_order_stat(const AnyParent& parent, OrderSpec spec) {
    return std::visit([&](const auto& p) -> AnyOrderStat { return OrderStatDistribution(p, spec); }, parent);
}

/// Sample moments and a delta-method standard error for var/mean.
inline DispersionEstimate summarize_dispersion(const std::vector<std::int64_t>& xs) {
    const auto n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (auto x : xs) mean += static_cast<double>(x);
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (auto x : xs) {
        const double d = static_cast<double>(x) - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double var = m2 / (n - 1.0);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    DispersionEstimate est;
    est.mean = mean;
    est.variance = var;
    est.index = var / mean;
    est.n_samples = static_cast<std::int64_t>(xs.size());
    const double var_mean = m2 / n;
    const double var_var = (m4 - m2 * m2) / n;
    const double cov = m3 / n;
    const double var_index = var_var / (mean * mean) + var * var * var_mean / std::pow(mean, 4) -
                             2.0 * var * cov / std::pow(mean, 3);
    est.mc_stderr_index = std::sqrt(std::max(var_index, 0.0));
    return est;
}

inline constexpr std::size_t kDispersionBlocks = 16;

/// Monte Carlo dispersion of an order statistic. Draws are split over a
/// fixed number of blocks with derived streams, so the result depends only
/// on the rng state, never on the thread count.
template <DiscreteParent P>
DispersionEstimate estimate_dispersion(const OrderStatDistribution<P>& dist, std::int64_t n, Rng& rng) {
    if (n < 1000) throw ConfigError("estimate_dispersion: need at least 1000 samples");
    const std::uint64_t base = rng();
    std::vector<std::int64_t> xs(static_cast<std::size_t>(n));
    const auto block = (static_cast<std::size_t>(n) + kDispersionBlocks - 1) / kDispersionBlocks;
    parallel_for(kDispersionBlocks, [&](std::size_t b) {
        Rng local(derive_seed(base, {b}));
        const std::size_t lo = b * block;
        const std::size_t hi = std::min(xs.size(), lo + block);
        for (std::size_t i = lo; i < hi; ++i) xs[i] = dist.sample(local);
    });
    return summarize_dispersion(xs);
}

inline DispersionEstimate estimate_dispersion(const AnyOrderStat& dist, std::int64_t n, Rng& rng) {
    return std::visit([&](const auto& d) { return estimate_dispersion(d, n, rng); }, dist);
}

}  // namespace ordstat
