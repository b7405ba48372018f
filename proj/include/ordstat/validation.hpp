#pragma once

// Conditional-sampler checks against the enumeration oracle, shared by the
// command-line `validate augment-oracle` entry point and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ordstat/augment.hpp"
#include "ordstat/orderstats.hpp"
#include "ordstat/parallel.hpp"

namespace ordstat {

struct OracleCell {
    std::string parent;
    std::int64_t r = 1;
    std::int64_t D = 1;
    std::int64_t y = 0;
    double os_pmf = 0.0;
    double tv = 0.0;            // max over projections
    double tv_breaks_off = 0.0; // breaks-on vs breaks-off, max over projections
    double mc_error = 0.0;      // joint MC error scale for the two-sample comparison
    std::int64_t steps_on = 0;
    std::int64_t steps_off = 0;
    std::int64_t n = 0;
};

namespace detail {

using ProjKey = std::vector<std::int64_t>;
using ProjHists = std::vector<std::map<ProjKey, double>>;

// Sorted-position marginals, coordinate marginals and the (below, equal,
// above) count triple.
inline void add_projections(ProjHists& h, const std::vector<std::int64_t>& values, std::int64_t y, double w) {
    const std::size_t D = values.size();
    if (h.empty()) h.resize(2 * D + 1);
    auto sorted = values;
    std::sort(sorted.begin(), sorted.end());
    ProjKey triple{0, 0, 0};
    for (std::size_t i = 0; i < D; ++i) {
        h[i][{sorted[i]}] += w;
        h[D + i][{values[i]}] += w;
        ++triple[values[i] < y ? 0 : (values[i] == y ? 1 : 2)];
    }
    h[2 * D][triple] += w;
}

inline double max_tv(const ProjHists& a, double na, const ProjHists& b, double nb) {
    double worst = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) {
        std::map<ProjKey, std::pair<double, double>> joint;
        for (const auto& [k, v] : a[p]) joint[k].first = v / na;
        for (const auto& [k, v] : b[p]) joint[k].second = v / nb;
        double tv = 0.0;
        for (const auto& [k, v] : joint) tv += std::abs(v.first - v.second);
        worst = std::max(worst, 0.5 * tv);
    }
    return worst;
}

// Half the summed per-bin standard deviation of the difference of two
// independent size-n histograms, maximized over projections.
inline double mc_tv_scale(const ProjHists& oracle, double n) {
    double worst = 0.0;
    for (const auto& h : oracle) {
        double s = 0.0;
        for (const auto& [k, p] : h) s += std::sqrt(p * (1.0 - p) * 2.0 / n);
        worst = std::max(worst, 0.5 * s);
    }
    return worst;
}

}  // namespace detail

/// Runs one (parent, r, D, y) cell: n draws with breaks and n without,
/// compared with each other and with the enumeration oracle.
template <DiscreteParent P>
OracleCell augment_oracle_cell(const P& parent, const std::string& label, const OrderSpec& spec, std::int64_t y,
                               std::int64_t n, Rng& rng) {
    OracleCell cell;
    cell.parent = label;
    cell.r = spec.r();
    cell.D = spec.D();
    cell.y = y;
    cell.n = n;
    cell.os_pmf = OrderStatDistribution(parent, spec).pmf(y);
    const auto z_max = upper_quantile_bound(parent, 1e-10);
    detail::ProjHists exact, on, off;
    for (const auto& [tuple, p] : brute_force_conditional(y, spec, parent, z_max)) detail::add_projections(exact, tuple, y, p);
    for (std::int64_t i = 0; i < n; ++i) {
        const auto a = sample_conditional(y, spec, parent, true, rng);
        const auto b = sample_conditional(y, spec, parent, false, rng);
        cell.steps_on += a.categorical_steps;
        cell.steps_off += b.categorical_steps;
        detail::add_projections(on, a.values, y, 1.0);
        detail::add_projections(off, b.values, y, 1.0);
    }
    const double dn = static_cast<double>(n);
    cell.tv = std::max(detail::max_tv(on, dn, exact, 1.0), detail::max_tv(off, dn, exact, 1.0));
    cell.tv_breaks_off = detail::max_tv(on, dn, off, dn);
    cell.mc_error = detail::mc_tv_scale(exact, dn);
    return cell;
}

struct OracleGrid {
    std::vector<std::pair<std::string, AnyParent>> parents;
    std::int64_t max_d = 4;
    std::int64_t max_y = 6;
    double min_os_pmf = 1e-6;
    std::int64_t n = 100000;
};

/// The parent x (r, D) x y grid; cells with negligible observation mass are skipped.
/// Each cell draws from its own derived stream.
inline std::vector<OracleCell> run_oracle_grid(const OracleGrid& g, std::uint64_t seed) {
    struct Job {
        std::size_t parent;
        OrderSpec spec;
        std::int64_t y;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < g.parents.size(); ++p)
        for (std::int64_t D = 1; D <= g.max_d; ++D)
            for (std::int64_t r = 1; r <= D; ++r)
                for (std::int64_t y = 0; y <= g.max_y; ++y) {
                    const OrderSpec spec(r, D);
                    const double m = std::visit([&](const auto& par) { return OrderStatDistribution(par, spec).pmf(y); },
                                                g.parents[p].second);
                    if (m > g.min_os_pmf) jobs.push_back({p, spec, y});
                }
    std::vector<OracleCell> cells(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        Rng rng(derive_seed(seed, {i}));
        const auto& j = jobs[i];
        cells[i] = std::visit(
            [&](const auto& par) { return augment_oracle_cell(par, g.parents[j.parent].first, j.spec, j.y, g.n, rng); },
            g.parents[j.parent].second);
    });
    return cells;
}

}  // namespace ordstat
