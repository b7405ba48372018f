#pragma once

// Exact simulation of the latent parent draws Z_1..Z_D given that their r-th
// smallest equals an observed Y.
//
// Each Z_d is assigned a category (below / equal / above Y) sequentially from
// its conditional given the categories so far; the conditional depends on
// the history only through the counts (n_below, n_equal, n_above). Given its
// category each Z_d is an independent truncated parent draw. Once the counts
// hit one of three break states, every remaining draw decouples from the
// constraint and is drawn in one batch.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordstat/orderstats.hpp"
#include "ordstat/parents.hpp"
#include "ordstat/random.hpp"

namespace ordstat {

/// The conditioning event has probability zero under the current parameters.
class DegenerateEventError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class Category : std::uint8_t { BelowY = 0, EqualY = 1, AboveY = 2 };

inline Category categorize(std::int64_t z, std::int64_t y) {
    return z < y ? Category::BelowY : (z == y ? Category::EqualY : Category::AboveY);
}

struct SufficientStats {
    std::int64_t n_below = 0;
    std::int64_t n_equal = 0;
    std::int64_t n_above = 0;

    [[nodiscard]] std::int64_t total() const { return n_below + n_equal + n_above; }
    [[nodiscard]] SufficientStats with(Category c) const {
        SufficientStats s = *this;
        switch (c) {
            case Category::BelowY: ++s.n_below; break;
            case Category::EqualY: ++s.n_equal; break;
            case Category::AboveY: ++s.n_above; break;
        }
        return s;
    }
    friend bool operator==(const SufficientStats&, const SufficientStats&) = default;
};

/// Parent probabilities of the three categories in log domain:
/// log F(Y-1), log f(Y), log(1 - F(Y)).
struct CategoryMass {
    double below = kNegInf;
    double equal = kNegInf;
    double above = kNegInf;

    template <DiscreteParent P>
    static CategoryMass at(const P& parent, std::int64_t y) {
        return {parent.log_cdf(y - 1), parent.log_pmf(y), parent.log_sf(y)};
    }
    [[nodiscard]] double of(Category c) const {
        return c == Category::BelowY ? below : (c == Category::EqualY ? equal : above);
    }
};

/// log P(Z^(r,D) = Y | counts so far), the five-case expression.
///
/// With m = D - (n_below + n_equal + n_above) draws left, a = r - n_below and
/// b = r - n_below - n_equal, the event is "at most a-1 of the remaining draws
/// fall below Y and at least b fall at or below Y".
inline double log_prob_os_equals_y(const SufficientStats& stats, const OrderSpec& spec, const CategoryMass& mass) {
    const std::int64_t D = spec.D();
    const std::int64_t r = spec.r();
    if (stats.n_below < 0 || stats.n_equal < 0 || stats.n_above < 0 || stats.total() > D) {
        throw PreconditionError("log_prob_os_equals_y: counts inconsistent with order D");
    }
    if (stats.n_below >= r || stats.n_above >= D - r + 1) return kNegInf;
    const std::int64_t m = D - stats.total();
    const std::int64_t a = r - stats.n_below;
    const std::int64_t b = a - stats.n_equal;
    const bool enough_at_or_below = b <= 0;      // n_equal >= r - n_below
    const bool enough_at_or_above = a > m;       // n_equal >= D - n_above - r + 1
    if (!enough_at_or_below && !enough_at_or_above) {
        // F^(b,m)(Y) - F^(a,m)(Y-1)
        return log_trinomial_window(m, a, b, mass.below, mass.equal, mass.above);
    }
    if (enough_at_or_below && !enough_at_or_above) {
        // 1 - F^(a,m)(Y-1) = P(Bin(m, 1-F(Y-1)) >= m-a+1)
        return log_binom_upper_tail(m, m - a + 1, special::log_add(mass.equal, mass.above), mass.below);
    }
    if (!enough_at_or_below) {
        // F^(b,m)(Y)
        return log_binom_upper_tail(m, b, special::log_add(mass.below, mass.equal), mass.above);
    }
    return 0.0;
}

template <DiscreteParent P>
double prob_os_equals_y(const SufficientStats& stats, std::int64_t y, const OrderSpec& spec, const P& parent) {
    return std::exp(log_prob_os_equals_y(stats, spec, CategoryMass::at(parent, y)));
}

/// Conditional category probabilities for the next draw, (below, equal, above).
///
/// Numerators are P(event | counts + c) * P(C = c); their sum is
/// P(event | counts), so normalizing by it is exact.
inline std::array<double, 3> category_probs(const SufficientStats& stats, const OrderSpec& spec,
                                            const CategoryMass& mass) {
    std::array<double, 3> logw{};
    double total = kNegInf;
    for (int c = 0; c < 3; ++c) {
        const auto cat = static_cast<Category>(c);
        const double lp = mass.of(cat);
        logw[c] = lp == kNegInf ? kNegInf : log_prob_os_equals_y(stats.with(cat), spec, mass) + lp;
        total = special::log_add(total, logw[c]);
    }
    if (!(total > kNegInf)) {
        throw DegenerateEventError("category_probs: conditioning event has zero probability");
    }
    // Shift by the largest term rather than the log-sum: at log masses near
    // 1e14 the log-sum is only representable to a few hundredths of a nat.
    const double top = std::max({logw[0], logw[1], logw[2]});
    std::array<double, 3> probs{};
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += probs[c] = std::exp(logw[c] - top);
    for (auto& p : probs) p /= sum;
    return probs;
}

template <DiscreteParent P>
std::array<double, 3> category_probs(const SufficientStats& stats, std::int64_t y, const OrderSpec& spec,
                                     const P& parent) {
    return category_probs(stats, spec, CategoryMass::at(parent, y));
}

struct AugmentedDraw {
    std::vector<std::int64_t> values;
    std::vector<Category> categories;
    std::optional<std::int64_t> break_step;  // categorical steps taken before a break fired
    std::int64_t categorical_steps = 0;

    [[nodiscard]] std::int64_t sum() const {
        std::int64_t s = 0;
        for (auto v : values) s += v;
        return s;
    }
};

namespace detail {

inline std::int64_t kth_smallest(std::vector<std::int64_t> xs, std::int64_t r) {
    auto nth = xs.begin() + (r - 1);
    std::nth_element(xs.begin(), nth, xs.end());
    return *nth;
}

template <DiscreteParent P>
std::int64_t draw_in_category(const P& parent, Category c, std::int64_t y, const CategoryMass& mass, Rng& rng) {
    switch (c) {
        case Category::BelowY: return sample_truncated(parent, SupportRegion::below(y), mass.below, rng);
        case Category::AboveY: return sample_truncated(parent, SupportRegion::above(y), mass.above, rng);
        case Category::EqualY: break;
    }
    return y;
}

}  // namespace detail

/// One exact draw of Z_1..Z_D | Z^(r,D) = y.
template <DiscreteParent P>
AugmentedDraw sample_conditional(std::int64_t y, const OrderSpec& spec, const P& parent, bool use_breaks, Rng& rng) {
    const CategoryMass mass = CategoryMass::at(parent, y);
    const std::int64_t D = spec.D();
    const std::int64_t r = spec.r();
    AugmentedDraw out;
    out.values.reserve(static_cast<std::size_t>(D));
    out.categories.reserve(static_cast<std::size_t>(D));

    // Max statistic at the bottom of the support: every draw equals y.
    if (spec.is_max() && mass.below == kNegInf) {
        if (mass.equal == kNegInf) throw PreconditionError("sample_conditional: y outside the parent support");
        out.values.assign(static_cast<std::size_t>(D), y);
        out.categories.assign(static_cast<std::size_t>(D), Category::EqualY);
        return out;
    }
    if (log_prob_os_equals_y({}, spec, mass) == kNegInf) {
        throw PreconditionError("sample_conditional: y=" + std::to_string(y) + " has zero probability");
    }

    SufficientStats stats;
    std::optional<SupportRegion> tail_region;
    bool tail_unconstrained = false;
    for (std::int64_t d = 0; d < D; ++d) {
        const auto probs = category_probs(stats, spec, mass);
        const double u = rng.uniform();
        const Category c = u < probs[0] ? Category::BelowY
                                        : (u < probs[0] + probs[1] ? Category::EqualY : Category::AboveY);
        stats = stats.with(c);
        ++out.categorical_steps;
        if (stats.n_below > r - 1 || stats.n_above > D - r) {
            throw std::logic_error("sample_conditional: count trajectory left the feasible set");
        }
        out.values.push_back(detail::draw_in_category(parent, c, y, mass, rng));
        out.categories.push_back(c);

        if (!use_breaks || d + 1 == D) continue;
        if (stats.n_equal >= 1 && stats.n_below == r - 1) {
            tail_region = SupportRegion::at_least(y);
        } else if (stats.n_equal >= 1 && stats.n_above == D - r) {
            tail_region = SupportRegion::at_most(y);
        } else if (stats.n_equal == std::max(r - stats.n_below, D - r - stats.n_above + 1)) {
            tail_unconstrained = true;
        } else {
            continue;
        }
        out.break_step = d + 1;
        break;
    }

    while (static_cast<std::int64_t>(out.values.size()) < D) {
        const std::int64_t z =
            tail_unconstrained ? parent.sample(rng) : sample_truncated(parent, *tail_region, rng);
        out.values.push_back(z);
        out.categories.push_back(categorize(z, y));
    }

    if (detail::kth_smallest(out.values, r) != y) {
        throw std::logic_error("sample_conditional: r-th order statistic differs from the observation");
    }
    return out;
}

inline AugmentedDraw sample_conditional(std::int64_t y, const OrderSpec& spec, const AnyParent& parent,
                                        bool use_breaks, Rng& rng) {
    return std::visit([&](const auto& p) { return sample_conditional(y, spec, p, use_breaks, rng); }, parent);
}

/// The enumeration bound of brute_force_conditional was violated.
class OracleUnsoundError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaxOracleTuples = 16777216.0;

/// Exact conditional law of the ordered tuple (Z_1..Z_D) given Z^(r,D) = y by
/// enumerating {0..z_max}^D. Test oracle; exponential in D.
template <DiscreteParent P>
std::map<std::vector<std::int64_t>, double> brute_force_conditional(std::int64_t y, const OrderSpec& spec,
                                                                    const P& parent, std::int64_t z_max) {
    if (spec.D() > 6 || z_max < 0 || std::pow(static_cast<double>(z_max + 1), static_cast<double>(spec.D())) > kMaxOracleTuples) {
        throw OracleUnsoundError("brute_force_conditional: enumeration bound exceeded (D <= 6, (z_max+1)^D <= 2^24)");
    }
    if (parent.log_sf(z_max) > std::log(1e-10)) {
        throw OracleUnsoundError("brute_force_conditional: parent tail mass beyond z_max is >= 1e-10");
    }
    const auto D = static_cast<std::size_t>(spec.D());
    std::vector<double> pmf(static_cast<std::size_t>(z_max + 1));
    for (std::int64_t z = 0; z <= z_max; ++z) pmf[static_cast<std::size_t>(z)] = std::exp(parent.log_pmf(z));

    std::map<std::vector<std::int64_t>, double> out;
    std::vector<std::int64_t> tuple(D, 0);
    double total = 0.0;
    for (;;) {
        if (detail::kth_smallest(tuple, spec.r()) == y) {
            double w = 1.0;
            for (auto z : tuple) w *= pmf[static_cast<std::size_t>(z)];
            if (w > 0.0) {
                out[tuple] = w;
                total += w;
            }
        }
        std::size_t i = 0;
        while (i < D && tuple[i] == z_max) tuple[i++] = 0;
        if (i == D) break;
        ++tuple[i];
    }
    for (auto& [k, v] : out) v /= total;
    return out;
}

}  // namespace ordstat
