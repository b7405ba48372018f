#pragma once

// Flight minutes Y_i ~ MedPois^(D_k)_{μ_i}, μ_i = a_orig + b_dest + c_k dist_k,
// with route-level D_k either fixed or D_k ~ OddBinomial(d_max, ρ), ρ ~ Beta(1,1).

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ordstat/models/common.hpp"

namespace ordstat {

struct FlightRecord {
    std::string origin;
    std::string dest;
    double distance = 0.0;
    std::int64_t minutes = 0;
};

struct Route {
    std::int64_t origin = 0;
    std::int64_t dest = 0;
    double distance = 0.0;
};

struct FlightData {
    std::vector<std::string> airports;
    std::vector<Route> routes;
    std::vector<std::int64_t> route_of;  // per flight
    std::vector<std::int64_t> y;
    std::vector<std::uint8_t> heldout;

    [[nodiscard]] std::size_t n_flights() const { return y.size(); }
    [[nodiscard]] std::vector<HeldoutPoint> heldout_points() const {
        std::vector<HeldoutPoint> out;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (heldout[i]) out.push_back({{route_of[i], -1}, y[i]});
        return out;
    }
};

/// Indexes airports (sorted by code) and routes (sorted by airport pair).
/// When `known_airports` is given, a record naming any other airport is a data error.
inline FlightData build_flight_data(const std::vector<FlightRecord>& records,
                                    const std::optional<std::vector<std::string>>& known_airports = std::nullopt) {
    FlightData fd;
    std::map<std::string, std::int64_t> airport_ix;
    if (known_airports) {
        for (const auto& a : *known_airports) airport_ix.emplace(a, 0);
    } else {
        for (const auto& r : records) {
            airport_ix.emplace(r.origin, 0);
            airport_ix.emplace(r.dest, 0);
        }
    }
    std::int64_t next = 0;
    for (auto& [name, ix] : airport_ix) {
        ix = next++;
        fd.airports.push_back(name);
    }
    std::map<std::pair<std::int64_t, std::int64_t>, double> route_dist;
    for (std::size_t n = 0; n < records.size(); ++n) {
        const auto& r = records[n];
        const auto o = airport_ix.find(r.origin), d = airport_ix.find(r.dest);
        if (o == airport_ix.end() || d == airport_ix.end()) {
            throw DataError("flights: record " + std::to_string(n + 1) + " names an unknown airport");
        }
        if (!(r.distance > 0.0) || !std::isfinite(r.distance)) {
            throw DataError("flights: record " + std::to_string(n + 1) + " has a nonpositive distance");
        }
        if (r.minutes < 0) throw DataError("flights: record " + std::to_string(n + 1) + " has negative minutes");
        auto [it, fresh] = route_dist.emplace(std::make_pair(o->second, d->second), r.distance);
        if (!fresh && it->second != r.distance) {
            throw DataError("flights: record " + std::to_string(n + 1) + " disagrees on the route distance");
        }
    }
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> route_ix;
    for (const auto& [key, dist] : route_dist) {
        route_ix[key] = static_cast<std::int64_t>(fd.routes.size());
        fd.routes.push_back({key.first, key.second, dist});
    }
    for (const auto& r : records) {
        fd.route_of.push_back(route_ix.at({airport_ix.at(r.origin), airport_ix.at(r.dest)}));
        fd.y.push_back(r.minutes);
    }
    fd.heldout.assign(records.size(), 0);
    return fd;
}

class FlightModel {
  public:
    bool infer_d = true;
    std::int64_t fixed_d = 1;
    std::int64_t d_max = 9;
    double shape = 1.0, rate = 1.0;     // Γ prior on a_j, b_j, c_k
    double rho_a = 1.0, rho_b = 1.0;    // Beta prior on ρ

    struct State {
        std::vector<double> a, b, c;
        std::vector<std::int64_t> D;
        double rho = 0.5;
        std::vector<std::int64_t> z;  // per flight sum of the D parent draws (0 when heldout)
        std::int64_t categorical_steps = 0;
        std::int64_t shortcut_entries = 0;
    };
    using Data = FlightData;

    void validate() const {
        if (!(shape > 0 && rate > 0 && rho_a > 0 && rho_b > 0)) throw ConfigError("FlightModel: priors must be positive");
        if (infer_d) (void)OddBinomialPrior(d_max, 0.5);
        else (void)OrderSpec::median(fixed_d);
    }
    [[nodiscard]] std::string name() const { return "flights"; }
    [[nodiscard]] std::string canonical() const {
        return "flights;infer_d=" + std::to_string(infer_d) + ";fixed_d=" + std::to_string(fixed_d) +
               ";d_max=" + std::to_string(d_max) + ";gamma=" + fmt_double(shape) + "," + fmt_double(rate) +
               ";rho=" + fmt_double(rho_a) + "," + fmt_double(rho_b);
    }

    static double route_mu(const State& st, const Route& r, std::size_t k) {
        return st.a[static_cast<std::size_t>(r.origin)] + st.b[static_cast<std::size_t>(r.dest)] + st.c[k] * r.distance;
    }

    static void check_data(const Data& data) {
        if (data.y.empty()) throw ConfigError("flights: no records");
        if (data.heldout.size() != data.y.size() || data.route_of.size() != data.y.size()) {
            throw ConfigError("flights: record arrays disagree in length");
        }
        for (auto k : data.route_of)
            if (k < 0 || k >= static_cast<std::int64_t>(data.routes.size())) throw DataError("flights: bad route index");
        const auto A = static_cast<std::int64_t>(data.airports.size());
        for (const auto& r : data.routes)
            if (r.origin < 0 || r.origin >= A || r.dest < 0 || r.dest >= A) throw DataError("flights: route with unknown airport");
    }

    static std::size_t n_points(const Data& data) {
        std::size_t n = 0;
        for (auto h : data.heldout) n += h == 0;
        return n;
    }

    // --- Gibbs kernel ---------------------------------------------------------

    State init(const Data& data, Rng& rng) const {
        validate();
        check_data(data);
        State st = sample_prior(data, rng);
        st.rho = 0.5;
        const auto d0 = infer_d ? OddBinomialPrior(d_max, rho_a / (rho_a + rho_b)).median() : fixed_d;
        std::fill(st.D.begin(), st.D.end(), d0);
        augment(st, data, rng);
        return st;
    }

    void sweep(State& st, const Data& data, Rng& rng, Fault fault = Fault::None) const {
        const std::size_t A = data.airports.size(), K = data.routes.size();
        std::vector<std::int64_t> zk(K, 0), nk(K, 0);
        for (std::size_t i = 0; i < data.n_flights(); ++i) {
            if (data.heldout[i]) continue;
            const auto k = static_cast<std::size_t>(data.route_of[i]);
            zk[k] += st.z[i];
            ++nk[k];
        }
        std::vector<std::int64_t> za(A, 0), zb(A, 0), zc(K, 0);
        std::vector<double> ea(A, 0.0), eb(A, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& r = data.routes[k];
            const auto o = static_cast<std::size_t>(r.origin), d = static_cast<std::size_t>(r.dest);
            const double w[3] = {st.a[o], st.b[d], st.c[k] * r.distance};
            const auto parts = thin_multinomial(zk[k], w, rng);
            za[o] += parts[0];
            zb[d] += parts[1];
            zc[k] = parts[2];
            const double dn = (fault == Fault::DropExposureD ? 1.0 : static_cast<double>(st.D[k])) * static_cast<double>(nk[k]);
            ea[o] += dn;
            eb[d] += dn;
        }
        for (std::size_t j = 0; j < A; ++j) st.a[j] = gamma_poisson_update(shape, rate, za[j], ea[j], rng);
        for (std::size_t j = 0; j < A; ++j) st.b[j] = gamma_poisson_update(shape, rate, zb[j], eb[j], rng);
        if (fault != Fault::SkipPUpdate) {
            const std::int64_t extra = fault == Fault::OffByOneStat ? 1 : 0;
            for (std::size_t k = 0; k < K; ++k) {
                const double dk = fault == Fault::DropExposureD ? 1.0 : static_cast<double>(st.D[k]);
                st.c[k] = gamma_poisson_update(shape, rate, zc[k] + extra, dk * data.routes[k].distance * static_cast<double>(nk[k]), rng);
            }
        }
        if (infer_d) {
            draw_orders(st, data, rng);
            std::int64_t xs = 0;
            for (auto d : st.D) xs += (d - 1) / 2;
            const auto n_half = static_cast<std::int64_t>(K) * ((d_max - 1) / 2);
            st.rho = beta_conjugate_update(rho_a, rho_b, static_cast<double>(xs), static_cast<double>(n_half - xs), rng);
        }
        augment(st, data, rng);
    }

    void record(const State& st, Draw& d) const {
        d["a"] = st.a;
        d["b"] = st.b;
        d["c"] = st.c;
        d["D"].assign(st.D.begin(), st.D.end());
        d["rho"] = {st.rho};
    }

    // --- forward model --------------------------------------------------------

    State sample_prior(const Data& data, Rng& rng) const {
        State st;
        st.a.resize(data.airports.size());
        st.b.resize(data.airports.size());
        st.c.resize(data.routes.size());
        for (auto& v : st.a) v = rng.gamma(shape, rate);
        for (auto& v : st.b) v = rng.gamma(shape, rate);
        for (auto& v : st.c) v = rng.gamma(shape, rate);
        st.rho = infer_d ? rng.beta(rho_a, rho_b) : 0.5;
        st.D.assign(data.routes.size(), fixed_d);
        if (infer_d) {
            for (auto& d : st.D) d = 2 * rng.binomial((d_max - 1) / 2, st.rho) + 1;
        }
        st.z.assign(data.n_flights(), 0);
        return st;
    }

    void simulate(State& st, Data& data, Rng& rng) const {
        for (std::size_t i = 0; i < data.n_flights(); ++i) {
            if (data.heldout[i]) {
                st.z[i] = 0;
                continue;
            }
            const auto k = static_cast<std::size_t>(data.route_of[i]);
            const PoissonParent parent(route_mu(st, data.routes[k], k));
            std::vector<std::int64_t> draws(static_cast<std::size_t>(st.D[k]));
            std::int64_t sum = 0;
            for (auto& v : draws) {
                v = parent.sample(rng);
                sum += v;
            }
            st.z[i] = sum;
            data.y[i] = detail::kth_smallest(draws, (st.D[k] + 1) / 2);
        }
    }

    [[nodiscard]] std::vector<std::pair<std::string, double>> stats(const State& st) const {
        double sa = 0.0, sc = 0.0, zs = 0.0, sd = 0.0;
        for (double v : st.a) sa += v;
        for (double v : st.c) sc += v;
        for (auto v : st.z) zs += static_cast<double>(v);
        for (auto v : st.D) sd += static_cast<double>(v);
        std::vector<std::pair<std::string, double>> out{{"a_mean", sa / static_cast<double>(st.a.size())},
                                                        {"c_mean", sc / static_cast<double>(st.c.size())},
                                                        {"sum_z", zs}};
        if (infer_d) {
            out.emplace_back("D_mean", sd / static_cast<double>(st.D.size()));
            out.emplace_back("rho", st.rho);
        }
        return out;
    }

    /// Target row = route index.
    [[nodiscard]] Predictor predictor(const PosteriorSamples& ps, const Data& data) const {
        return [&ps, routes = data.routes](const PredictTarget& t) {
            if (t.row < 0 || t.row >= static_cast<std::int64_t>(routes.size()) || t.col != -1) {
                throw ConfigError("flights: prediction target must name a route");
            }
            const auto k = static_cast<std::size_t>(t.row);
            const auto& r = routes[k];
            std::vector<AnyOrderStat> comps;
            comps.reserve(ps.size());
            for (std::size_t s = 0; s < ps.size(); ++s) {
                const double mu = ps.row("a", s)[static_cast<std::size_t>(r.origin)] +
                                  ps.row("b", s)[static_cast<std::size_t>(r.dest)] + ps.row("c", s)[k] * r.distance;
                const auto d = static_cast<std::int64_t>(ps.row("D", s)[k]);
                comps.emplace_back(OrderStatDistribution(PoissonParent(mu), OrderSpec::median(d)));
            }
            return comps;
        };
    }

  private:
    void draw_orders(State& st, const Data& data, Rng& rng) const {
        const std::size_t K = data.routes.size();
        std::vector<std::map<std::int64_t, std::int64_t>> counts(K);
        for (std::size_t i = 0; i < data.n_flights(); ++i)
            if (!data.heldout[i]) ++counts[static_cast<std::size_t>(data.route_of[i])][data.y[i]];
        const OddBinomialPrior prior(d_max, st.rho);
        for (std::size_t k = 0; k < K; ++k) {
            const PoissonParent parent(route_mu(st, data.routes[k], k));
            const auto loglik = [&](std::int64_t d) {
                const OrderStatDistribution dist(parent, OrderSpec::median(d));
                double s = 0.0;
                for (auto [y, c] : counts[k]) s += static_cast<double>(c) * dist.log_pmf(y);
                return s;
            };
            st.D[k] = order_posterior_draw(loglik, prior, rng);
        }
    }

    void augment(State& st, const Data& data, Rng& rng) const {
        for (std::size_t i = 0; i < data.n_flights(); ++i) {
            if (data.heldout[i]) continue;
            const auto k = static_cast<std::size_t>(data.route_of[i]);
            if (st.D[k] == 1) {
                st.z[i] = data.y[i];
                continue;
            }
            auto draw = sample_conditional(data.y[i], OrderSpec::median(st.D[k]),
                                           PoissonParent(route_mu(st, data.routes[k], k)), true, rng);
            st.categorical_steps += draw.categorical_steps;
            st.z[i] = draw.sum();
        }
    }
};

struct SyntheticFlights {
    std::vector<FlightRecord> records;
    std::vector<std::int64_t> true_d;  // per route, in build_flight_data route order
    std::vector<double> true_mu;
};

/// Routes over `n_airports` airports with distances in [200, 2000] miles,
/// intercepts a_j, b_j ~ U(5, 20), distance rates c_k ~ U(0.10, 0.14) and the
/// given route orders cycled over routes; `per_route` flights per route.
inline SyntheticFlights generate_flights(std::int64_t n_airports, std::int64_t n_routes, std::int64_t per_route,
                                         const std::vector<std::int64_t>& orders, Rng& rng) {
    if (n_routes > n_airports * (n_airports - 1)) throw ConfigError("generate_flights: too many routes for the airports");
    if (orders.empty()) throw ConfigError("generate_flights: no route orders");
    std::vector<std::string> names;
    for (std::int64_t j = 0; j < n_airports; ++j) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "A%02lld", static_cast<long long>(j));
        names.emplace_back(buf);
    }
    std::vector<double> a(static_cast<std::size_t>(n_airports)), b(a.size());
    for (auto& v : a) v = 5.0 + 15.0 * rng.uniform();
    for (auto& v : b) v = 5.0 + 15.0 * rng.uniform();
    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    for (std::int64_t o = 0; o < n_airports; ++o)
        for (std::int64_t d = 0; d < n_airports; ++d)
            if (o != d) pairs.emplace_back(o, d);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(static_cast<std::size_t>(n_routes));
    std::sort(pairs.begin(), pairs.end());

    SyntheticFlights out;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [o, d] = pairs[k];
        const double dist = std::round(200.0 + 1800.0 * rng.uniform());
        const double c = 0.10 + 0.04 * rng.uniform();
        const double mu = a[static_cast<std::size_t>(o)] + b[static_cast<std::size_t>(d)] + c * dist;
        const auto D = orders[k % orders.size()];
        const OrderStatDistribution dist_y(PoissonParent(mu), OrderSpec::median(D));
        out.true_d.push_back(D);
        out.true_mu.push_back(mu);
        for (std::int64_t n = 0; n < per_route; ++n) {
            out.records.push_back({names[static_cast<std::size_t>(o)], names[static_cast<std::size_t>(d)], dist, dist_y.sample(rng)});
        }
    }
    return out;
}

/// Marks each flight heldout with probability `fraction`.
inline void random_heldout_flights(FlightData& data, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("random_heldout_flights: fraction must lie in [0,1)");
    for (auto& h : data.heldout) h = rng.bernoulli(fraction) ? 1 : 0;
}

}  // namespace ordstat
