#pragma once

// Joint-distribution (Geweke) tests, heldout scoring, predictive coverage and
// dispersion tables.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ordstat/models/common.hpp"
#include "ordstat/orderstats.hpp"
#include "ordstat/parallel.hpp"
#include "ordstat/special.hpp"

namespace ordstat {

// --- Geweke -----------------------------------------------------------------

struct GewekeStat {
    std::string name;
    double z = 0.0;
    double mean_forward = 0.0;
    double mean_chain = 0.0;
    double se_forward = 0.0;
    double se_chain = 0.0;
};

struct GewekeReport {
    std::vector<GewekeStat> stats;
    std::int64_t n_forward = 0;
    std::int64_t n_chain = 0;
    double threshold = 4.0;
    bool pass = false;
    std::string error;  // set when a chain threw; pass is then false

    [[nodiscard]] double max_abs_z() const {
        double m = 0.0;
        for (const auto& s : stats) m = std::max(m, std::abs(s.z));
        return m;
    }
    [[nodiscard]] const GewekeStat& stat(const std::string& name) const {
        for (const auto& s : stats)
            if (s.name == name) return s;
        throw ConfigError("GewekeReport: no statistic '" + name + "'");
    }
};

struct GewekeOptions {
    std::int64_t n_forward = 50000;
    std::int64_t n_chain = 50000;
    double threshold = 4.0;
    std::size_t blocks = 4;           // independent replicate blocks per sampler
    std::size_t batches_per_block = 25;
    std::int64_t burn_in = 1000;      // chain sweeps discarded after starting from the model's init
    Fault fault = Fault::None;
};

/// Statistic magnitude treated as a diverged (broken) chain.
inline constexpr double kGewekeDivergence = 1e12;

namespace detail {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
    Moments m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= static_cast<double>(xs.size() > 1 ? xs.size() - 1 : 1);
    return m;
}

/// z-score of a mean difference; two constant, equal samplers give 0.
inline double z_score(double m1, double se1, double m2, double se2) {
    const double den = std::sqrt(se1 * se1 + se2 * se2);
    if (den == 0.0) return m1 == m2 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m1 - m2);
    return (m1 - m2) / den;
}

}  // namespace detail

/// Compares statistic means under forward joint simulation of (parameters,
/// latents, data) against the Gibbs kernel alternated with data
/// re-simulation. Chain standard errors use batch means. Both samplers run
/// in `blocks` independent replicate blocks. Each chain starts from the
/// model's own initializer (not a prior draw, so a kernel that never moves a
/// parameter cannot pass by luck) and discards `burn_in` sweeps.
template <class Model>
GewekeReport geweke_test(const Model& model, const typename Model::Data& skeleton, const GewekeOptions& opt, Rng& rng) {
    if (Model::n_points(skeleton) == 0) throw ConfigError("geweke_test: the data skeleton has no likelihood terms");
    if (opt.n_forward < 2 || opt.n_chain < static_cast<std::int64_t>(opt.blocks * opt.batches_per_block) || opt.blocks == 0) {
        throw ConfigError("geweke_test: sample sizes too small for the batch layout");
    }
    const std::uint64_t base = rng();
    const auto per_fwd = static_cast<std::size_t>(opt.n_forward) / opt.blocks;
    const auto per_chain = static_cast<std::size_t>(opt.n_chain) / opt.blocks;
    const auto batch = per_chain / opt.batches_per_block;

    std::vector<std::vector<std::vector<double>>> fwd(opt.blocks), chain(opt.blocks);
    std::vector<std::string> names;
    {
        Rng probe(base);
        auto data = skeleton;
        auto st = model.sample_prior(data, probe);
        model.simulate(st, data, probe);
        for (auto& [n, v] : model.stats(st)) names.push_back(n);
    }
    const std::size_t n_stats = names.size();
    std::mutex error_mu;
    std::string chain_error;
    std::atomic<bool> abort{false};

    parallel_for(2 * opt.blocks, [&](std::size_t task) {
        const bool forward = task < opt.blocks;
        const std::size_t b = forward ? task : task - opt.blocks;
        Rng r(derive_seed(base, {forward ? 0u : 1u, b}));
        auto data = skeleton;
        auto& out = forward ? fwd[b] : chain[b];
        out.assign(n_stats, {});
        const auto check = [&](const auto& st) {
            const auto s = model.stats(st);
            for (std::size_t i = 0; i < n_stats; ++i) {
                if (!(std::abs(s[i].second) < kGewekeDivergence)) {
                    throw DegenerateError("geweke_test: chain diverged on statistic " + s[i].first);
                }
            }
            if (abort.load(std::memory_order_relaxed)) throw DegenerateError("geweke_test: aborted");
            return s;
        };
        const auto push = [&](const auto& st) {
            const auto s = check(st);
            for (std::size_t i = 0; i < n_stats; ++i) out[i].push_back(s[i].second);
        };
        if (forward) {
            for (std::size_t t = 0; t < per_fwd; ++t) {
                auto st = model.sample_prior(data, r);
                model.simulate(st, data, r);
                push(st);
            }
        } else {
            try {
                auto st = model.sample_prior(data, r);
                model.simulate(st, data, r);
                st = model.init(data, r);
                for (std::int64_t t = 0; t < opt.burn_in; ++t) {
                    model.sweep(st, data, r, opt.fault);
                    check(st);
                    model.simulate(st, data, r);
                }
                for (std::size_t t = 0; t < batch * opt.batches_per_block; ++t) {
                    model.sweep(st, data, r, opt.fault);
                    push(st);
                    model.simulate(st, data, r);
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mu);
                if (!abort.exchange(true)) chain_error = e.what();
            }
        }
    });
    if (!chain_error.empty()) {
        GewekeReport rep;
        rep.threshold = opt.threshold;
        rep.error = chain_error;
        return rep;
    }

    GewekeReport rep;
    rep.n_forward = static_cast<std::int64_t>(per_fwd * opt.blocks);
    rep.n_chain = static_cast<std::int64_t>(batch * opt.batches_per_block * opt.blocks);
    rep.threshold = opt.threshold;
    rep.pass = true;
    for (std::size_t i = 0; i < n_stats; ++i) {
        std::vector<double> f, batch_means;
        for (std::size_t b = 0; b < opt.blocks; ++b) {
            f.insert(f.end(), fwd[b][i].begin(), fwd[b][i].end());
            const auto& c = chain[b][i];
            for (std::size_t k = 0; k < opt.batches_per_block; ++k) {
                double s = 0.0;
                for (std::size_t t = k * batch; t < (k + 1) * batch; ++t) s += c[t];
                batch_means.push_back(s / static_cast<double>(batch));
            }
        }
        const auto mf = detail::moments(f);
        const auto mc = detail::moments(batch_means);
        GewekeStat gs;
        gs.name = names[i];
        gs.mean_forward = mf.mean;
        gs.mean_chain = mc.mean;
        gs.se_forward = std::sqrt(mf.var / static_cast<double>(f.size()));
        gs.se_chain = std::sqrt(mc.var / static_cast<double>(batch_means.size()));
        gs.z = detail::z_score(mf.mean, gs.se_forward, mc.mean, gs.se_chain);
        rep.pass = rep.pass && std::abs(gs.z) < opt.threshold;
        rep.stats.push_back(gs);
    }
    return rep;
}

// --- heldout scoring --------------------------------------------------------

struct FlaggedPoint {
    std::size_t index = 0;
    std::int64_t y = 0;
    std::string reason;
};

struct FitScore {
    double ir = 0.0;                 // nats per heldout point
    std::optional<double> ig;        // ir_baseline - ir
    std::optional<double> ir_baseline;
    double lppd = 0.0;               // sum of log predictive probabilities
    std::int64_t n_held = 0;
    std::vector<FlaggedPoint> flagged;
};

/// Tail mass beyond which a heldout value is reported as outside the
/// truncated predictive support.
inline constexpr double kPredictiveTail = 1e-12;

namespace detail {

inline std::vector<AnyOrderStat> cached_components(std::map<std::pair<std::int64_t, std::int64_t>, std::vector<AnyOrderStat>>& cache,
                                                   const Predictor& pred, const PredictTarget& t) {
    const auto key = std::make_pair(t.row, t.col);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, pred(t)).first;
    return it->second;
}

/// log((1/S) Σ_s f_s(y)), summed in sorted order so it does not depend on
/// the order of the posterior draws.
inline double sorted_mixture_log_pmf(const std::vector<AnyOrderStat>& comps, std::int64_t y) {
    std::vector<double> lp(comps.size());
    for (std::size_t s = 0; s < comps.size(); ++s) lp[s] = std::visit([&](const auto& d) { return d.log_pmf(y); }, comps[s]);
    std::sort(lp.begin(), lp.end());
    return special::log_sum_exp(lp) - std::log(static_cast<double>(comps.size()));
}

inline double sorted_mixture_log_tail(const std::vector<AnyOrderStat>& comps, std::int64_t y) {
    // log P(Y >= y)
    std::vector<double> lp(comps.size());
    for (std::size_t s = 0; s < comps.size(); ++s) lp[s] = std::visit([&](const auto& d) { return d.log_sf(y - 1); }, comps[s]);
    std::sort(lp.begin(), lp.end());
    return special::log_sum_exp(lp) - std::log(static_cast<double>(comps.size()));
}

inline double information_rate(const Predictor& pred, const std::vector<HeldoutPoint>& held, double& lppd,
                               std::vector<FlaggedPoint>* flagged) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<AnyOrderStat>> cache;
    std::vector<double> terms;
    terms.reserve(held.size());
    for (std::size_t n = 0; n < held.size(); ++n) {
        const auto comps = cached_components(cache, pred, held[n].target);
        if (comps.empty()) throw ConfigError("score_fit: no posterior draws");
        const double lp = sorted_mixture_log_pmf(comps, held[n].y);
        terms.push_back(lp);
        if (flagged) {
            if (lp == kNegInf) flagged->push_back({n, held[n].y, "zero predictive mass"});
            else if (sorted_mixture_log_tail(comps, held[n].y) < std::log(kPredictiveTail))
                flagged->push_back({n, held[n].y, "beyond the 1-1e-12 predictive quantile"});
        }
    }
    std::sort(terms.begin(), terms.end());
    lppd = 0.0;
    for (double t : terms) lppd += t;
    return -lppd / static_cast<double>(held.size());
}

}  // namespace detail

/// Information rate of heldout points under the posterior predictive, and
/// information gain over a baseline when given.
inline FitScore score_fit(const Predictor& pred, const std::vector<HeldoutPoint>& held,
                          const std::optional<Predictor>& baseline = std::nullopt) {
    if (held.empty()) throw ConfigError("score_fit: no heldout points");
    FitScore fs;
    fs.n_held = static_cast<std::int64_t>(held.size());
    fs.ir = detail::information_rate(pred, held, fs.lppd, &fs.flagged);
    if (baseline) {
        double lppd_b = 0.0;
        fs.ir_baseline = detail::information_rate(*baseline, held, lppd_b, nullptr);
        fs.ig = *fs.ir_baseline - fs.ir;
    }
    return fs;
}

/// Equal-tail central interval [lo, hi] of the mixture: lo is the smallest z
/// with F(z) >= (1-level)/2 and hi the smallest z with F(z) >= (1+level)/2.
inline std::pair<std::int64_t, std::int64_t> predictive_interval(const std::vector<AnyOrderStat>& comps, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("predictive_interval: level must lie in (0,1)");
    const auto quantile = [&](double q) {
        std::int64_t hi = 1;
        while (mixture_cdf(comps, hi) < q) {
            if (hi > (std::int64_t{1} << 40)) return hi;
            hi *= 2;
        }
        std::int64_t lo = -1;  // F(lo) < q
        while (hi - lo > 1) {
            const auto mid = lo + (hi - lo) / 2;
            if (mixture_cdf(comps, mid) >= q) hi = mid;
            else lo = mid;
        }
        return hi;
    };
    return {quantile(0.5 * (1.0 - level)), quantile(0.5 * (1.0 + level))};
}

/// Fraction of heldout points inside their central predictive interval.
inline double coverage(const Predictor& pred, const std::vector<HeldoutPoint>& held, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage: level must lie in (0,1)");
    if (held.empty()) return 1.0;
    std::map<std::pair<std::int64_t, std::int64_t>, std::pair<std::int64_t, std::int64_t>> intervals;
    std::int64_t inside = 0;
    for (const auto& h : held) {
        const auto key = std::make_pair(h.target.row, h.target.col);
        auto it = intervals.find(key);
        if (it == intervals.end()) it = intervals.emplace(key, predictive_interval(pred(h.target), level)).first;
        inside += h.y >= it->second.first && h.y <= it->second.second;
    }
    return static_cast<double>(inside) / static_cast<double>(held.size());
}

// --- dispersion tables ------------------------------------------------------

struct DispersionRow {
    std::string family;
    std::int64_t r = 1;
    std::int64_t D = 1;
    double param1 = 0.0;
    double param2 = 0.0;
    DispersionEstimate est;
    double reference = 0.0;  // large-rate limit from Gaussian order statistics
};

/// Rank token: "min", "med", "max" or a 1-based integer. Returns nullopt for
/// a median of an even order, which has no rank.
inline std::optional<std::int64_t> parse_rank(const std::string& token, std::int64_t D) {
    if (token == "min") return 1;
    if (token == "max") return D;
    if (token == "med" || token == "median") {
        if (D % 2 == 0) return std::nullopt;
        return (D + 1) / 2;
    }
    std::size_t used = 0;
    long long r = 0;
    try {
        r = std::stoll(token, &used);
    } catch (...) {
        throw ConfigError("dispersion_table: bad rank '" + token + "'");
    }
    if (used != token.size() || r < 1) throw ConfigError("dispersion_table: bad rank '" + token + "'");
    if (r > D) return std::nullopt;
    return r;
}

/// One row per (param, rank, order) cell; cells with no valid rank are
/// skipped. Each cell draws from its own derived stream so rows are
/// reproducible regardless of grid order or thread count.
inline std::vector<DispersionRow> dispersion_table(const std::string& family, const std::vector<std::string>& ranks,
                                                   const std::vector<std::int64_t>& orders,
                                                   const std::vector<std::pair<double, double>>& params, std::int64_t n_mc,
                                                   Rng& rng) {
    if (family != "pois" && family != "nb") throw ConfigError("dispersion_table: family must be pois or nb");
    const std::uint64_t base = rng();
    std::vector<DispersionRow> rows;
    for (const auto& [p1, p2] : params) {
        for (const auto& tok : ranks) {
            for (auto D : orders) {
                if (D < 1) throw ConfigError("dispersion_table: orders must be positive");
                const auto r = parse_rank(tok, D);
                if (!r) continue;
                DispersionRow row;
                row.family = family;
                row.r = *r;
                row.D = D;
                row.param1 = p1;
                row.param2 = family == "nb" ? p2 : 0.0;
                rows.push_back(row);
            }
        }
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& row = rows[i];
        Rng cell(derive_seed(base, {i}));
        const AnyParent parent = row.family == "pois" ? AnyParent(PoissonParent(row.param1))
                                                      : AnyParent(NegBinParent(row.param1, row.param2));
        row.est = estimate_dispersion(make_order_stat(parent, OrderSpec(row.r, row.D)), n_mc, cell);
        row.reference = special::gaussian_orderstat_variance(row.r, row.D) / (row.family == "nb" ? row.param2 : 1.0);
    }
    return rows;
}

inline std::string dispersion_csv(const std::vector<DispersionRow>& rows) {
    std::ostringstream os;
    os << "family,r,D,param1,param2,mean,variance,index,stderr,gaussian_reference\n";
    for (const auto& r : rows) {
        os << r.family << ',' << r.r << ',' << r.D << ',' << fmt_double(r.param1) << ',' << fmt_double(r.param2) << ','
           << fmt_double(r.est.mean) << ',' << fmt_double(r.est.variance) << ',' << fmt_double(r.est.index) << ','
           << fmt_double(r.est.mc_stderr_index) << ',' << fmt_double(r.reference) << '\n';
    }
    return os.str();
}

}  // namespace ordstat
