#pragma once

// Discrete parent distributions and region-truncated sampling.
//
// Every parent exposes log_pmf / log_cdf / log_sf on the integers so that
// deep-tail regions keep full relative precision; linear-domain cdf()
// and pmf() are thin wrappers.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>

#include "ordstat/random.hpp"
#include "ordstat/special.hpp"

namespace ordstat {

/// Caller broke a documented precondition (e.g. empty truncation region).
class PreconditionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// A truncation region has no representable mass, even in log domain.
class DegenerateRegionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

template <class P>
concept DiscreteParent = requires(const P& p, std::int64_t z, Rng& rng) {
    { p.log_pmf(z) } -> std::same_as<double>;
    { p.log_cdf(z) } -> std::same_as<double>;  // log P(Z <= z)
    { p.log_sf(z) } -> std::same_as<double>;   // log P(Z > z)
    { p.sample(rng) } -> std::same_as<std::int64_t>;
    { p.mean() } -> std::same_as<double>;
    { p.variance() } -> std::same_as<double>;
};

inline constexpr std::int64_t kNoLowerBound = std::numeric_limits<std::int64_t>::min();
inline constexpr std::int64_t kNoUpperBound = std::numeric_limits<std::int64_t>::max();

class PoissonParent {
  public:
    explicit PoissonParent(double mu) : mu_(mu), log_mu_(std::log(mu)) {
        if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("PoissonParent: mu must be positive and finite");
    }

    [[nodiscard]] double mu() const { return mu_; }
    [[nodiscard]] double mean() const { return mu_; }
    [[nodiscard]] double variance() const { return mu_; }

    [[nodiscard]] double log_pmf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        return static_cast<double>(z) * log_mu_ - mu_ - special::log_factorial(z);
    }
    [[nodiscard]] double log_cdf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        return special::log_reg_upper_inc_gamma(static_cast<double>(z) + 1.0, mu_);
    }
    [[nodiscard]] double log_sf(std::int64_t z) const {
        if (z < 0) return 0.0;
        return special::log_reg_lower_inc_gamma(static_cast<double>(z) + 1.0, mu_);
    }
    [[nodiscard]] double pmf(std::int64_t z) const { return std::exp(log_pmf(z)); }
    [[nodiscard]] double cdf(std::int64_t z) const { return std::exp(log_cdf(z)); }

    std::int64_t sample(Rng& rng) const { return rng.poisson(mu_); }

  private:
    double mu_;
    double log_mu_;
};

/// Negative binomial with pmf Γ(z+α)/(Γ(α) z!) p^α (1-p)^z: mean α(1-p)/p,
/// variance α(1-p)/p², index of dispersion 1/p.
class NegBinParent {
  public:
    NegBinParent(double alpha, double p)
        : alpha_(alpha), p_(p), log_p_(std::log(p)), log_q_(std::log1p(-p)), lgamma_alpha_(std::lgamma(alpha)) {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("NegBinParent: alpha must be positive");
        if (!(p > 0.0 && p < 1.0)) throw DomainError("NegBinParent: p must lie in (0,1)");
    }

    [[nodiscard]] double alpha() const { return alpha_; }
    [[nodiscard]] double p() const { return p_; }
    [[nodiscard]] double mean() const { return alpha_ * (1.0 - p_) / p_; }
    [[nodiscard]] double variance() const { return alpha_ * (1.0 - p_) / (p_ * p_); }

    [[nodiscard]] double log_pmf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        const double zd = static_cast<double>(z);
        return std::lgamma(zd + alpha_) - lgamma_alpha_ - special::log_factorial(z) + alpha_ * log_p_ + zd * log_q_;
    }
    [[nodiscard]] double log_cdf(std::int64_t z) const {
        if (z < 0) return kNegInf;
        return special::log_reg_inc_beta(alpha_, static_cast<double>(z) + 1.0, p_);
    }
    [[nodiscard]] double log_sf(std::int64_t z) const {
        if (z < 0) return 0.0;
        return special::log_reg_inc_beta(static_cast<double>(z) + 1.0, alpha_, 1.0 - p_);
    }
    [[nodiscard]] double pmf(std::int64_t z) const { return std::exp(log_pmf(z)); }
    [[nodiscard]] double cdf(std::int64_t z) const { return std::exp(log_cdf(z)); }

    std::int64_t sample(Rng& rng) const { return rng.poisson(rng.gamma(alpha_, p_ / (1.0 - p_))); }

  private:
    double alpha_;
    double p_;
    double log_p_;
    double log_q_;
    double lgamma_alpha_;
};

using AnyParent = std::variant<PoissonParent, NegBinParent>;

inline double poisson_cdf(double mu, std::int64_t y) { return PoissonParent(mu).cdf(y); }
inline double negbin_cdf(double alpha, double p, std::int64_t y) { return NegBinParent(alpha, p).cdf(y); }

// --- support regions -------------------------------------------------------

class SupportRegion {
  public:
    enum class Kind { Full, Below, Equal, Above, AtMost, AtLeast };

    static SupportRegion full() { return {Kind::Full, 0}; }
    static SupportRegion below(std::int64_t y) { return {Kind::Below, y}; }
    static SupportRegion equal(std::int64_t y) { return {Kind::Equal, y}; }
    static SupportRegion above(std::int64_t y) { return {Kind::Above, y}; }
    static SupportRegion at_most(std::int64_t y) { return {Kind::AtMost, y}; }
    static SupportRegion at_least(std::int64_t y) { return {Kind::AtLeast, y}; }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::int64_t y() const { return y_; }

    /// Inclusive integer bounds; kNoLowerBound / kNoUpperBound when open.
    [[nodiscard]] std::int64_t lower() const {
        switch (kind_) {
            case Kind::Equal:
            case Kind::AtLeast: return y_;
            case Kind::Above: return y_ + 1;
            default: return kNoLowerBound;
        }
    }
    [[nodiscard]] std::int64_t upper() const {
        switch (kind_) {
            case Kind::Equal:
            case Kind::AtMost: return y_;
            case Kind::Below: return y_ - 1;
            default: return kNoUpperBound;
        }
    }
    [[nodiscard]] bool contains(std::int64_t z) const { return z >= lower() && z <= upper(); }

    friend bool operator==(const SupportRegion&, const SupportRegion&) = default;

  private:
    SupportRegion(Kind k, std::int64_t y) : kind_(k), y_(y) {}
    Kind kind_;
    std::int64_t y_;
};

/// log P(Z in region) under the parent.
template <DiscreteParent P>
double region_log_mass(const P& parent, const SupportRegion& region) {
    const std::int64_t lo = region.lower();
    const std::int64_t hi = region.upper();
    if (hi < 0 || (lo != kNoLowerBound && hi != kNoUpperBound && lo > hi)) return kNegInf;
    if (lo == hi) return parent.log_pmf(lo);
    if (lo <= 0 && hi == kNoUpperBound) return 0.0;
    if (lo <= 0) return parent.log_cdf(hi);
    return parent.log_sf(lo - 1);
}

/// Smallest z >= 0 with P(Z > z) <= tail.
template <DiscreteParent P>
std::int64_t upper_quantile_bound(const P& parent, double tail) {
    const double target = std::log(tail);
    if (parent.log_sf(0) <= target) return 0;
    std::int64_t lo = 0;
    std::int64_t hi = std::max<std::int64_t>(1, static_cast<std::int64_t>(parent.mean()));
    while (parent.log_sf(hi) > target) {
        lo = hi;
        hi *= 2;
    }
    while (hi - lo > 1) {
        const std::int64_t mid = lo + (hi - lo) / 2;
        (parent.log_sf(mid) > target ? lo : hi) = mid;
    }
    return hi;
}

namespace detail {

inline constexpr int kLinearWalkSteps = 64;
inline constexpr double kRejectionMass = 0.2;

// Inversion on [lo, inf) walking upward; switches to exponential + binary
// search on the survival function if the walk gets long.
template <DiscreteParent P>
std::int64_t sample_upper_tail(const P& parent, std::int64_t lo, double log_mass, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::int64_t z = lo;
    for (int step = 0; step < kLinearWalkSteps; ++step, ++z) {
        acc += std::exp(parent.log_pmf(z) - log_mass);
        if (acc >= u) return z;
    }
    // Smallest z with P(lo <= Z <= z) >= u * mass, i.e. sf(z) <= (1-u) * mass.
    const double target = std::log1p(-u) + log_mass;
    std::int64_t bad = z - 1;  // known to fail the test
    std::int64_t step = kLinearWalkSteps;
    std::int64_t good = z;
    while (parent.log_sf(good) > target) {
        bad = good;
        good += step;
        step *= 2;
    }
    while (good - bad > 1) {
        const std::int64_t mid = bad + (good - bad) / 2;
        (parent.log_sf(mid) > target ? bad : good) = mid;
    }
    return good;
}

// Inversion on [0, hi] walking downward from hi.
template <DiscreteParent P>
std::int64_t sample_lower_tail(const P& parent, std::int64_t hi, double log_mass, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::int64_t z = hi;
    for (int step = 0; step < kLinearWalkSteps && z >= 0; ++step, --z) {
        acc += std::exp(parent.log_pmf(z) - log_mass);
        if (acc >= u) return z;
    }
    if (z < 0) return 0;  // rounding left u just above the accumulated total
    // Largest z with P(z <= Z <= hi) >= u * mass, i.e. cdf(z-1) <= (1-u) * mass.
    const double target = std::log1p(-u) + log_mass;
    std::int64_t good = z;
    std::int64_t bad = z + 1;
    std::int64_t step = kLinearWalkSteps;
    while (good > 0 && parent.log_cdf(good - 1) > target) {
        bad = good;
        good = std::max<std::int64_t>(0, good - step);
        step *= 2;
    }
    while (bad - good > 1) {
        const std::int64_t mid = good + (bad - good) / 2;
        (parent.log_cdf(mid - 1) > target ? bad : good) = mid;
    }
    return good;
}

}  // namespace detail

/// Exact draw from the parent restricted to `region` and renormalized, with
/// the region's log mass supplied by the caller.
template <DiscreteParent P>
std::int64_t sample_truncated(const P& parent, const SupportRegion& region, double log_mass, Rng& rng) {
    using Kind = SupportRegion::Kind;
    if (region.kind() == Kind::Full) return parent.sample(rng);
    const std::int64_t lo = std::max<std::int64_t>(0, region.lower());
    const std::int64_t hi = region.upper();
    if (hi < lo) throw PreconditionError("sample_truncated: region does not intersect the support");
    if (!(log_mass > kNegInf)) {
        throw DegenerateRegionError("sample_truncated: region has zero mass (y=" + std::to_string(region.y()) + ")");
    }
    if (lo == hi) return lo;
    if (log_mass > std::log(detail::kRejectionMass)) {
        for (;;) {
            const std::int64_t z = parent.sample(rng);
            if (z >= lo && z <= hi) return z;
        }
    }
    if (hi == kNoUpperBound) return detail::sample_upper_tail(parent, lo, log_mass, rng);
    return detail::sample_lower_tail(parent, hi, log_mass, rng);
}

/// Exact draw from the parent restricted to `region` and renormalized.
template <DiscreteParent P>
std::int64_t sample_truncated(const P& parent, const SupportRegion& region, Rng& rng) {
    if (region.kind() == SupportRegion::Kind::Full) return parent.sample(rng);
    return sample_truncated(parent, region, region_log_mass(parent, region), rng);
}

inline std::int64_t sample_truncated(const AnyParent& parent, const SupportRegion& region, Rng& rng) {
    return std::visit([&](const auto& p) { return sample_truncated(p, region, rng); }, parent);
}

}  // namespace ordstat
