#pragma once

// Y_ij ~ MaxPois^(D)_{μ_ij}, μ_ij = Σ_k θ_ik φ_kj, with gamma priors on the
// factors. Heldout cells are excluded from the likelihood entirely.

#include <cstdint>
#include <string>
#include <vector>

#include "ordstat/models/common.hpp"

namespace ordstat {

/// Dense row-major count matrix plus heldout flags.
struct MatrixData {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<std::int64_t> y;
    std::vector<std::uint8_t> heldout;

    MatrixData() = default;
    MatrixData(std::int64_t r, std::int64_t c)
        : rows(r), cols(c), y(static_cast<std::size_t>(r * c), 0), heldout(static_cast<std::size_t>(r * c), 0) {}

    [[nodiscard]] std::size_t idx(std::int64_t i, std::int64_t j) const { return static_cast<std::size_t>(i * cols + j); }
    [[nodiscard]] std::int64_t at(std::int64_t i, std::int64_t j) const { return y[idx(i, j)]; }
    [[nodiscard]] bool observed(std::int64_t i, std::int64_t j) const { return heldout[idx(i, j)] == 0; }

    [[nodiscard]] std::vector<HeldoutPoint> heldout_points() const {
        std::vector<HeldoutPoint> out;
        for (std::int64_t i = 0; i < rows; ++i)
            for (std::int64_t j = 0; j < cols; ++j)
                if (!observed(i, j)) out.push_back({{i, j}, at(i, j)});
        return out;
    }
};

class FactorizationModel {
  public:
    std::int64_t K = 1;
    std::int64_t D = 1;
    double theta_shape = 1.0, theta_rate = 1.0;
    double phi_shape = 1.0, phi_rate = 1.0;

    struct State {
        std::int64_t I = 0, J = 0, K = 0;
        std::vector<double> theta;  // I x K
        std::vector<double> phi;    // K x J
        std::vector<std::int64_t> z;  // per cell sum of the D parent draws (0 when heldout)
        std::int64_t categorical_steps = 0;
        std::int64_t shortcut_entries = 0;

        [[nodiscard]] double mu(std::int64_t i, std::int64_t j) const {
            double m = 0.0;
            for (std::int64_t k = 0; k < K; ++k) m += theta[static_cast<std::size_t>(i * K + k)] * phi[static_cast<std::size_t>(k * J + j)];
            return m;
        }
    };
    using Data = MatrixData;

    void validate() const {
        if (K < 1) throw ConfigError("FactorizationModel: K must be >= 1");
        if (D < 1) throw ConfigError("FactorizationModel: D must be >= 1");
        if (!(theta_shape > 0 && theta_rate > 0 && phi_shape > 0 && phi_rate > 0)) {
            throw ConfigError("FactorizationModel: gamma hyperparameters must be positive");
        }
    }
    [[nodiscard]] OrderSpec spec() const { return OrderSpec::max(D); }
    [[nodiscard]] std::string name() const { return "factorization"; }
    [[nodiscard]] std::string canonical() const {
        return "factorization;K=" + std::to_string(K) + ";D=" + std::to_string(D) + ";theta=" + fmt_double(theta_shape) +
               "," + fmt_double(theta_rate) + ";phi=" + fmt_double(phi_shape) + "," + fmt_double(phi_rate);
    }

    static void check_data(const Data& data) {
        if (data.rows < 1 || data.cols < 1) throw ConfigError("factorization: empty matrix");
        if (data.y.size() != static_cast<std::size_t>(data.rows * data.cols) || data.heldout.size() != data.y.size()) {
            throw ConfigError("factorization: matrix and mask sizes disagree");
        }
        for (std::int64_t i = 0; i < data.rows; ++i) {
            bool any = false;
            for (std::int64_t j = 0; j < data.cols; ++j) any = any || data.observed(i, j);
            if (!any) throw ConfigError("factorization: row " + std::to_string(i) + " is fully heldout");
        }
        for (std::int64_t j = 0; j < data.cols; ++j) {
            bool any = false;
            for (std::int64_t i = 0; i < data.rows; ++i) any = any || data.observed(i, j);
            if (!any) throw ConfigError("factorization: column " + std::to_string(j) + " is fully heldout");
        }
        for (auto v : data.y)
            if (v < 0) throw DataError("factorization: negative count");
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
        augment(st, data, rng);
        return st;
    }

    void sweep(State& st, const Data& data, Rng& rng, Fault fault = Fault::None) const {
        const auto I = st.I, J = st.J;
        // Thin each cell's latent total across the K components.
        std::vector<std::int64_t> row_counts(static_cast<std::size_t>(I * K), 0);
        std::vector<std::int64_t> col_counts(static_cast<std::size_t>(K * J), 0);
        std::vector<double> w(static_cast<std::size_t>(K));
        for (std::int64_t i = 0; i < I; ++i) {
            for (std::int64_t j = 0; j < J; ++j) {
                const auto zij = st.z[data.idx(i, j)];
                if (!data.observed(i, j) || zij == 0) continue;
                for (std::int64_t k = 0; k < K; ++k) w[static_cast<std::size_t>(k)] = th(st, i, k) * ph(st, k, j);
                const auto parts = thin_multinomial(zij, w, rng);
                for (std::int64_t k = 0; k < K; ++k) {
                    row_counts[static_cast<std::size_t>(i * K + k)] += parts[static_cast<std::size_t>(k)];
                    col_counts[static_cast<std::size_t>(k * J + j)] += parts[static_cast<std::size_t>(k)];
                }
            }
        }
        const double scale = fault == Fault::DropExposureD ? 1.0 : static_cast<double>(D);
        const std::int64_t extra = fault == Fault::OffByOneStat ? 1 : 0;
        for (std::int64_t i = 0; i < I; ++i) {
            for (std::int64_t k = 0; k < K; ++k) {
                double exposure = 0.0;
                for (std::int64_t j = 0; j < J; ++j)
                    if (data.observed(i, j)) exposure += ph(st, k, j);
                th(st, i, k) = gamma_poisson_update(theta_shape, theta_rate,
                                                    row_counts[static_cast<std::size_t>(i * K + k)] + extra,
                                                    scale * exposure, rng);
            }
        }
        if (fault != Fault::SkipPUpdate) {
            for (std::int64_t j = 0; j < J; ++j) {
                for (std::int64_t k = 0; k < K; ++k) {
                    double exposure = 0.0;
                    for (std::int64_t i = 0; i < I; ++i)
                        if (data.observed(i, j)) exposure += th(st, i, k);
                    ph(st, k, j) = gamma_poisson_update(phi_shape, phi_rate, col_counts[static_cast<std::size_t>(k * J + j)],
                                                        scale * exposure, rng);
                }
            }
        }
        augment(st, data, rng);
    }

    void record(const State& st, Draw& d) const {
        d["theta"] = st.theta;
        d["phi"] = st.phi;
    }

    // --- forward model --------------------------------------------------------

    State sample_prior(const Data& data, Rng& rng) const {
        State st;
        st.I = data.rows;
        st.J = data.cols;
        st.K = K;
        st.theta.resize(static_cast<std::size_t>(st.I * K));
        st.phi.resize(static_cast<std::size_t>(K * st.J));
        for (auto& t : st.theta) t = rng.gamma(theta_shape, theta_rate);
        for (auto& p : st.phi) p = rng.gamma(phi_shape, phi_rate);
        st.z.assign(data.y.size(), 0);
        return st;
    }

    /// Draws (Z, Y) on the observed cells given the factors in `st`.
    void simulate(State& st, Data& data, Rng& rng) const {
        for (std::int64_t i = 0; i < st.I; ++i) {
            for (std::int64_t j = 0; j < st.J; ++j) {
                const auto c = data.idx(i, j);
                if (!data.observed(i, j)) {
                    st.z[c] = 0;
                    continue;
                }
                const double mu = st.mu(i, j);
                std::int64_t sum = 0, mx = 0;
                for (std::int64_t d = 0; d < D; ++d) {
                    const auto v = rng.poisson(mu);
                    sum += v;
                    mx = std::max(mx, v);
                }
                st.z[c] = sum;
                data.y[c] = mx;
            }
        }
    }

    [[nodiscard]] std::vector<std::pair<std::string, double>> stats(const State& st) const {
        double tm = 0.0, pm = 0.0, zs = 0.0;
        for (double t : st.theta) tm += t;
        for (double p : st.phi) pm += p;
        for (auto v : st.z) zs += static_cast<double>(v);
        return {{"theta_mean", tm / static_cast<double>(st.theta.size())},
                {"phi_mean", pm / static_cast<double>(st.phi.size())},
                {"sum_z", zs},
                {"mu_00", st.mu(0, 0)}};
    }

    [[nodiscard]] Predictor predictor(const PosteriorSamples& ps, std::int64_t rows, std::int64_t cols) const {
        return [m = *this, &ps, rows, cols](const PredictTarget& t) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
                throw ConfigError("factorization: prediction target outside the matrix");
            }
            std::vector<AnyOrderStat> comps;
            comps.reserve(ps.size());
            for (std::size_t s = 0; s < ps.size(); ++s) {
                const auto& theta = ps.row("theta", s);
                const auto& phi = ps.row("phi", s);
                double mu = 0.0;
                for (std::int64_t k = 0; k < m.K; ++k) {
                    mu += theta[static_cast<std::size_t>(t.row * m.K + k)] * phi[static_cast<std::size_t>(k * cols + t.col)];
                }
                comps.emplace_back(OrderStatDistribution(PoissonParent(mu), m.spec()));
            }
            return comps;
        };
    }

  private:
    double& th(State& st, std::int64_t i, std::int64_t k) const { return st.theta[static_cast<std::size_t>(i * K + k)]; }
    double& ph(State& st, std::int64_t k, std::int64_t j) const { return st.phi[static_cast<std::size_t>(k * st.J + j)]; }
    double th(const State& st, std::int64_t i, std::int64_t k) const { return st.theta[static_cast<std::size_t>(i * K + k)]; }
    double ph(const State& st, std::int64_t k, std::int64_t j) const { return st.phi[static_cast<std::size_t>(k * st.J + j)]; }

    void augment(State& st, const Data& data, Rng& rng) const {
        const auto sp = spec();
        for (std::int64_t i = 0; i < st.I; ++i) {
            for (std::int64_t j = 0; j < st.J; ++j) {
                const auto c = data.idx(i, j);
                if (!data.observed(i, j)) continue;
                const auto y = data.y[c];
                if (D == 1) {
                    st.z[c] = y;
                } else if (y == 0) {
                    // Max of D draws is 0 only if every draw is 0.
                    st.z[c] = 0;
                    ++st.shortcut_entries;
                } else {
                    auto draw = sample_conditional(y, sp, PoissonParent(st.mu(i, j)), true, rng);
                    st.categorical_steps += draw.categorical_steps;
                    st.z[c] = draw.sum();
                }
            }
        }
    }
};

struct SyntheticMatrix {
    MatrixData data;
    std::vector<double> theta;
    std::vector<double> phi;
};

/// Draws factors from Γ(shape, rate) priors and Y_ij ~ MaxPois^(D)_{μ_ij}.
inline SyntheticMatrix generate_factorization(std::int64_t rows, std::int64_t cols, std::int64_t K, std::int64_t D,
                                              double shape, double rate, Rng& rng) {
    SyntheticMatrix out;
    out.data = MatrixData(rows, cols);
    out.theta.resize(static_cast<std::size_t>(rows * K));
    out.phi.resize(static_cast<std::size_t>(K * cols));
    for (auto& t : out.theta) t = rng.gamma(shape, rate);
    for (auto& p : out.phi) p = rng.gamma(shape, rate);
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
            double mu = 0.0;
            for (std::int64_t k = 0; k < K; ++k) mu += out.theta[static_cast<std::size_t>(i * K + k)] * out.phi[static_cast<std::size_t>(k * cols + j)];
            std::int64_t mx = 0;
            for (std::int64_t d = 0; d < D; ++d) mx = std::max(mx, rng.poisson(mu));
            out.data.y[out.data.idx(i, j)] = mx;
        }
    }
    return out;
}

/// Marks each cell heldout with probability `fraction`, redrawing until every
/// row and column keeps at least one observed cell.
inline void random_heldout_mask(MatrixData& data, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("random_heldout_mask: fraction must lie in [0,1)");
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (auto& h : data.heldout) h = rng.bernoulli(fraction) ? 1 : 0;
        try {
            FactorizationModel::check_data(data);
            return;
        } catch (const ConfigError&) {
        }
    }
    throw ConfigError("random_heldout_mask: could not keep every row and column observed");
}

}  // namespace ordstat
