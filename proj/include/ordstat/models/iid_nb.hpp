#pragma once

// Y_i ~ NB_{α,p}^(r,D) i.i.d. with α ~ Γ(a,b), p ~ Beta(e,f), and optionally
// D inferred under an odd-binomial (median) or shifted-binomial (min/max) prior.

#include <map>
#include <string>
#include <vector>

#include "ordstat/models/common.hpp"

namespace ordstat {

enum class RankRule { Min, Median, Max, Explicit };

inline std::string to_string(RankRule r) {
    switch (r) {
        case RankRule::Min: return "min";
        case RankRule::Median: return "median";
        case RankRule::Max: return "max";
        case RankRule::Explicit: return "explicit";
    }
    return "?";
}

inline OrderSpec spec_for(RankRule rule, std::int64_t D, std::int64_t r_explicit = 1) {
    switch (rule) {
        case RankRule::Min: return OrderSpec::min(D);
        case RankRule::Median: return OrderSpec::median(D);
        case RankRule::Max: return OrderSpec::max(D);
        case RankRule::Explicit: return OrderSpec(r_explicit, D);
    }
    throw ConfigError("spec_for: unknown rank rule");
}

/// Order prior matching a rank rule: odd orders for medians, 1..d_max otherwise.
class OrderPrior {
  public:
    OrderPrior(RankRule rule, std::int64_t d_max, double q) : rule_(rule), odd_(1, q), shifted_(1, q) {
        if (rule == RankRule::Explicit) throw ConfigError("OrderPrior: inferred D needs a min/median/max rank rule");
        if (rule == RankRule::Median) odd_ = OddBinomialPrior(d_max, q);
        else shifted_ = ShiftedBinomialPrior(d_max, q);
    }
    [[nodiscard]] std::vector<std::int64_t> support() const {
        return rule_ == RankRule::Median ? odd_.support() : shifted_.support();
    }
    [[nodiscard]] double log_pmf(std::int64_t d) const {
        return rule_ == RankRule::Median ? odd_.log_pmf(d) : shifted_.log_pmf(d);
    }
    [[nodiscard]] std::int64_t median() const {
        if (rule_ == RankRule::Median) return odd_.median();
        double acc = 0.0;
        for (auto d : shifted_.support()) {
            acc += std::exp(shifted_.log_pmf(d));
            if (acc >= 0.5) return d;
        }
        return shifted_.d_max();
    }
    std::int64_t sample(Rng& rng) const {
        const auto s = support();
        std::vector<double> lw(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) lw[i] = log_pmf(s[i]);
        return s[rng.categorical_log(lw)];
    }

  private:
    RankRule rule_;
    OddBinomialPrior odd_;
    ShiftedBinomialPrior shifted_;
};

struct IidNbData {
    std::vector<std::int64_t> y;
};

class IidNbModel {
  public:
    RankRule rule = RankRule::Median;
    std::int64_t r_explicit = 1;
    std::int64_t D = 1;  // fixed order, or ignored when infer_d
    bool infer_d = false;
    std::int64_t d_max = 9;
    double d_q = 0.5;
    double a = 1.0, b = 1.0;  // α ~ Γ(a, b)
    double e = 1.0, f = 1.0;  // p ~ Beta(e, f)

    struct State {
        double alpha = 1.0;
        double p = 0.5;
        std::int64_t D = 1;
        std::vector<std::vector<std::int64_t>> z;
        std::int64_t categorical_steps = 0;
        std::int64_t shortcut_entries = 0;
    };
    using Data = IidNbData;

    void validate() const {
        if (!(a > 0 && b > 0 && e > 0 && f > 0)) throw ConfigError("IidNbModel: hyperparameters must be positive");
        if (infer_d) (void)order_prior();
        else (void)spec(D);
    }
    [[nodiscard]] OrderSpec spec(std::int64_t d) const { return spec_for(rule, d, r_explicit); }
    [[nodiscard]] OrderPrior order_prior() const { return OrderPrior(rule, d_max, d_q); }

    [[nodiscard]] std::string name() const { return "iid-nb"; }
    [[nodiscard]] std::string canonical() const {
        return "iid-nb;rule=" + to_string(rule) + ";r=" + std::to_string(r_explicit) + ";D=" + std::to_string(D) +
               ";infer_d=" + std::to_string(infer_d) + ";d_max=" + std::to_string(d_max) + ";d_q=" + fmt_double(d_q) +
               ";a=" + fmt_double(a) + ";b=" + fmt_double(b) + ";e=" + fmt_double(e) + ";f=" + fmt_double(f);
    }

    static std::size_t n_points(const Data& data) { return data.y.size(); }

    // --- Gibbs kernel ---------------------------------------------------------

    State init(const Data& data, Rng& rng) const {
        check_data(data);
        validate();
        State st;
        st.alpha = rng.gamma(a, b);
        st.p = 0.5;
        st.D = infer_d ? order_prior().median() : D;
        augment(st, data, rng);
        return st;
    }

    void sweep(State& st, const Data& data, Rng& rng, Fault fault = Fault::None) const {
        const double n = static_cast<double>(data.y.size());
        const double Dd = static_cast<double>(st.D);
        std::int64_t tables = 0, total = 0;
        for (const auto& zi : st.z) {
            for (auto zd : zi) {
                tables += sample_crt(zd, st.alpha, rng);
                total += zd;
            }
        }
        const double neg_log_p = -std::log(st.p);
        const double exposure = fault == Fault::DropExposureD ? n * neg_log_p : n * Dd * neg_log_p;
        st.alpha = gamma_poisson_update(a, b, tables, exposure, rng);
        if (fault != Fault::SkipPUpdate) {
            const double failures = static_cast<double>(total) + (fault == Fault::OffByOneStat ? 1.0 : 0.0);
            st.p = clamp_open_unit(beta_conjugate_update(e, f, n * Dd * st.alpha, failures, rng));
        }
        if (infer_d) st.D = draw_order(st, data, rng);
        augment(st, data, rng);
    }

    void record(const State& st, Draw& d) const {
        d["alpha"] = {st.alpha};
        d["p"] = {st.p};
        d["D"] = {static_cast<double>(st.D)};
    }

    // --- forward model (Geweke hooks and synthetic data) ----------------------

    State sample_prior(const Data&, Rng& rng) const {
        State st;
        st.alpha = rng.gamma(a, b);
        st.p = clamp_open_unit(rng.beta(e, f));
        st.D = infer_d ? order_prior().sample(rng) : D;
        return st;
    }

    /// Draws (Z, Y) jointly given the parameters in `st`; data.y keeps its size.
    void simulate(State& st, Data& data, Rng& rng) const {
        const NegBinParent parent(st.alpha, st.p);
        const auto sp = spec(st.D);
        st.z.assign(data.y.size(), {});
        for (std::size_t i = 0; i < data.y.size(); ++i) {
            auto& zi = st.z[i];
            zi.resize(static_cast<std::size_t>(st.D));
            for (auto& v : zi) v = parent.sample(rng);
            data.y[i] = detail::kth_smallest(zi, sp.r());
        }
    }

    [[nodiscard]] std::vector<std::pair<std::string, double>> stats(const State& st) const {
        double total = 0.0;
        for (const auto& zi : st.z)
            for (auto v : zi) total += static_cast<double>(v);
        std::vector<std::pair<std::string, double>> out{{"alpha", st.alpha}, {"p", st.p}, {"sum_z", total}};
        if (infer_d) out.emplace_back("D", static_cast<double>(st.D));
        return out;
    }

    [[nodiscard]] Predictor predictor(const PosteriorSamples& ps) const {
        return [m = *this, &ps](const PredictTarget& t) {
            if (t.row != -1 || t.col != -1) throw ConfigError("iid-nb: prediction target takes no indices");
            std::vector<AnyOrderStat> comps;
            comps.reserve(ps.size());
            for (std::size_t s = 0; s < ps.size(); ++s) {
                const NegBinParent parent(ps.row("alpha", s)[0], ps.row("p", s)[0]);
                comps.emplace_back(OrderStatDistribution(parent, m.spec(static_cast<std::int64_t>(ps.row("D", s)[0]))));
            }
            return comps;
        };
    }

  private:
    static void check_data(const Data& data) {
        if (data.y.empty()) throw ConfigError("iid-nb: no observations");
        for (auto v : data.y)
            if (v < 0) throw DataError("iid-nb: negative count");
    }

    void augment(State& st, const Data& data, Rng& rng) const {
        const NegBinParent parent(st.alpha, st.p);
        const auto sp = spec(st.D);
        st.z.resize(data.y.size());
        for (std::size_t i = 0; i < data.y.size(); ++i) {
            if (st.D == 1) {
                st.z[i].assign(1, data.y[i]);
                continue;
            }
            auto draw = sample_conditional(data.y[i], sp, parent, true, rng);
            st.categorical_steps += draw.categorical_steps;
            st.z[i] = std::move(draw.values);
        }
    }

    std::int64_t draw_order(const State& st, const Data& data, Rng& rng) const {
        std::map<std::int64_t, std::int64_t> counts;
        for (auto v : data.y) ++counts[v];
        const NegBinParent parent(st.alpha, st.p);
        const auto loglik = [&](std::int64_t d) {
            const OrderStatDistribution dist(parent, spec(d));
            double s = 0.0;
            for (auto [y, c] : counts) s += static_cast<double>(c) * dist.log_pmf(y);
            return s;
        };
        return order_posterior_draw(loglik, order_prior(), rng);
    }
};

/// n i.i.d. draws from NB_{α,p}^(r,D).
inline std::vector<std::int64_t> generate_iid_nb(std::size_t n, double alpha, double p, const OrderSpec& spec, Rng& rng) {
    const OrderStatDistribution dist(NegBinParent(alpha, p), spec);
    std::vector<std::int64_t> y(n);
    for (auto& v : y) v = dist.sample(rng);
    return y;
}

}  // namespace ordstat
