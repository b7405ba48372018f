#pragma once

// Shared MCMC plumbing: configuration, posterior storage and the chain runner.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ordstat/augment.hpp"
#include "ordstat/gibbs_kit.hpp"
#include "ordstat/orderstats.hpp"
#include "ordstat/parallel.hpp"
#include "ordstat/random.hpp"

namespace ordstat {

/// Bad input data (unknown airport, negative count, ...).
class DataError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

/// Shortest round-trippable decimal for a double.
inline std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

struct McmcConfig {
    std::int64_t n_chains = 4;
    std::int64_t n_warmup = 4000;
    std::int64_t n_samples = 500;
    std::int64_t thin = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_chains < 1 || n_warmup < 0 || n_samples < 1 || thin < 1) {
            throw ConfigError("McmcConfig: chains, samples and thin must be positive, warmup nonnegative");
        }
    }
    [[nodiscard]] std::string canonical() const {
        return "chains=" + std::to_string(n_chains) + ";warmup=" + std::to_string(n_warmup) +
               ";samples=" + std::to_string(n_samples) + ";thin=" + std::to_string(thin) +
               ";seed=" + std::to_string(seed);
    }
};

/// Deliberately broken kernels for validating the Geweke harness.
enum class Fault { None, SkipPUpdate, DropExposureD, OffByOneStat };

struct ChainDiagnostics {
    std::int64_t chain = 0;
    std::uint64_t seed = 0;
    std::int64_t sweeps = 0;
    std::int64_t categorical_steps = 0;
    std::int64_t shortcut_entries = 0;
};

/// Flattened named parameter draws; rows are ordered chain-major.
struct PosteriorSamples {
    std::string model;
    std::map<std::string, std::vector<std::vector<double>>> params;
    std::vector<std::int64_t> chain_of;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::int64_t n_chains = 0;
    std::int64_t n_samples = 0;
    std::vector<ChainDiagnostics> chains;

    [[nodiscard]] std::size_t size() const { return chain_of.size(); }
    [[nodiscard]] const std::vector<double>& row(const std::string& name, std::size_t s) const {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("PosteriorSamples: no parameter '" + name + "'");
        return it->second.at(s);
    }
    [[nodiscard]] bool has(const std::string& name) const { return params.count(name) != 0; }
};

using Draw = std::map<std::string, std::vector<double>>;

/// Where a predictive distribution is requested: a matrix cell, a route, or
/// (for exchangeable models) nothing.
struct PredictTarget {
    std::int64_t row = -1;
    std::int64_t col = -1;
};

/// One order-statistic distribution per posterior draw.
using Predictor = std::function<std::vector<AnyOrderStat>(const PredictTarget&)>;

struct HeldoutPoint {
    PredictTarget target;
    std::int64_t y = 0;
};

/// Pmf of the S-component mixture on 0..upper.
struct PredictivePmf {
    std::vector<double> pmf;
    [[nodiscard]] double mean() const {
        double m = 0.0;
        for (std::size_t z = 0; z < pmf.size(); ++z) m += static_cast<double>(z) * pmf[z];
        return m;
    }
};

inline std::int64_t mixture_upper_bound(const std::vector<AnyOrderStat>& comps, double tail = 1e-12) {
    std::int64_t hi = 0;
    for (const auto& c : comps) hi = std::max(hi, std::visit([&](const auto& d) { return d.support_upper_bound(tail); }, c));
    return hi;
}

inline double mixture_log_pmf(const std::vector<AnyOrderStat>& comps, std::int64_t y) {
    std::vector<double> lp(comps.size());
    for (std::size_t s = 0; s < comps.size(); ++s) lp[s] = std::visit([&](const auto& d) { return d.log_pmf(y); }, comps[s]);
    return special::log_sum_exp(lp) - std::log(static_cast<double>(comps.size()));
}

inline double mixture_cdf(const std::vector<AnyOrderStat>& comps, std::int64_t y) {
    double acc = 0.0;
    for (const auto& c : comps) acc += std::visit([&](const auto& d) { return d.cdf(y); }, c);
    return acc / static_cast<double>(comps.size());
}

inline PredictivePmf posterior_predictive(const std::vector<AnyOrderStat>& comps) {
    if (comps.empty()) throw ConfigError("posterior_predictive: no posterior draws");
    PredictivePmf out;
    const auto hi = mixture_upper_bound(comps);
    out.pmf.resize(static_cast<std::size_t>(hi + 1));
    for (std::int64_t z = 0; z <= hi; ++z) out.pmf[static_cast<std::size_t>(z)] = std::exp(mixture_log_pmf(comps, z));
    return out;
}

inline PredictivePmf posterior_predictive(const Predictor& predictor, const PredictTarget& target) {
    return posterior_predictive(predictor(target));
}

namespace detail {

template <class Model>
concept ChainModel = requires(const Model& m, typename Model::State& st, const typename Model::Data& data, Rng& rng,
                              Draw& draw) {
    { m.init(data, rng) } -> std::same_as<typename Model::State>;
    m.sweep(st, data, rng, Fault::None);
    m.record(st, draw);
    { m.name() } -> std::convertible_to<std::string>;
    { m.canonical() } -> std::convertible_to<std::string>;
};

}  // namespace detail

/// Runs cfg.n_chains independent chains (in parallel when threads allow) with
/// per-chain seeds derived from cfg.seed, then merges draws in chain order.
template <detail::ChainModel Model>
PosteriorSamples run_chains(const Model& model, const typename Model::Data& data, const McmcConfig& cfg,
                            Fault fault = Fault::None) {
    cfg.validate();
    const auto n_chains = static_cast<std::size_t>(cfg.n_chains);
    std::vector<std::vector<Draw>> per_chain(n_chains);
    std::vector<ChainDiagnostics> diags(n_chains);
    parallel_for(n_chains, [&](std::size_t c) {
        const std::uint64_t seed = derive_seed(cfg.seed, {c});
        Rng rng(seed);
        auto state = model.init(data, rng);
        for (std::int64_t t = 0; t < cfg.n_warmup; ++t) model.sweep(state, data, rng, fault);
        auto& out = per_chain[c];
        out.reserve(static_cast<std::size_t>(cfg.n_samples));
        for (std::int64_t s = 0; s < cfg.n_samples; ++s) {
            for (std::int64_t t = 0; t < cfg.thin; ++t) model.sweep(state, data, rng, fault);
            Draw d;
            model.record(state, d);
            for (auto& [k, v] : d) {
                for (double x : v) {
                    if (!std::isfinite(x)) throw DegenerateError("run_chains: non-finite draw of " + k);
                }
            }
            out.push_back(std::move(d));
        }
        diags[c] = {static_cast<std::int64_t>(c), seed, cfg.n_warmup + cfg.n_samples * cfg.thin,
                    state.categorical_steps, state.shortcut_entries};
    });

    PosteriorSamples ps;
    ps.model = model.name();
    ps.seed = cfg.seed;
    ps.n_chains = cfg.n_chains;
    ps.n_samples = cfg.n_samples;
    ps.config_hash = hex64(fnv1a64(model.canonical() + "|" + cfg.canonical()));
    ps.chains = diags;
    for (std::size_t c = 0; c < n_chains; ++c) {
        for (auto& d : per_chain[c]) {
            for (auto& [k, v] : d) ps.params[k].push_back(std::move(v));
            ps.chain_of.push_back(static_cast<std::int64_t>(c));
        }
    }
    return ps;
}

/// Clamp a beta draw away from {0,1} so it stays a valid NB parameter.
inline double clamp_open_unit(double p) {
    constexpr double lo = 1e-300;
    return std::min(std::max(p, lo), std::nextafter(1.0, 0.0));
}

}  // namespace ordstat
