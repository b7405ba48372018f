#pragma once

// Conjugate and auxiliary-variable update kernels shared by the models.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ordstat/random.hpp"
#include "ordstat/special.hpp"

namespace ordstat {

/// A draw was requested from a distribution with no mass.
class DegenerateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Precision matrix is not symmetric positive definite.
class DecompositionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Multinomial split of `total` with probabilities proportional to `weights`.
inline std::vector<std::int64_t> thin_multinomial(std::int64_t total, std::span<const double> weights, Rng& rng) {
    std::vector<std::int64_t> out(weights.size(), 0);
    double rest = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw DomainError("thin_multinomial: negative weight");
        rest += w;
    }
    if (total == 0) return out;
    if (!(rest > 0.0)) throw DegenerateError("thin_multinomial: all weights are zero");
    std::int64_t left = total;
    for (std::size_t k = 0; k < weights.size() && left > 0; ++k) {
        if (k + 1 == weights.size()) {
            out[k] = left;
            break;
        }
        const double p = std::min(1.0, weights[k] / rest);
        out[k] = rng.binomial(left, p);
        left -= out[k];
        rest -= weights[k];
        if (!(rest > 0.0)) {
            // Remaining weights are all zero; leftovers stay with k.
            out[k] += left;
            left = 0;
        }
    }
    return out;
}

/// Draw from Γ(a + count, b + exposure).
inline double gamma_poisson_update(double a, double b, std::int64_t count, double exposure, Rng& rng) {
    if (!(a > 0.0) || !(b > 0.0) || count < 0 || !(exposure >= 0.0)) {
        throw DomainError("gamma_poisson_update: invalid shape, rate, count or exposure");
    }
    return rng.gamma(a + static_cast<double>(count), b + exposure);
}

/// Draw from Beta(e + successes, f + failures).
inline double beta_conjugate_update(double e, double f, double successes, double failures, Rng& rng) {
    if (!(e > 0.0) || !(f > 0.0) || successes < 0.0 || failures < 0.0) {
        throw DomainError("beta_conjugate_update: invalid hyperparameters or counts");
    }
    return rng.beta(e + successes, f + failures);
}

/// Chinese restaurant table count: Σ_{n=1}^{y} Bernoulli(α / (α + n - 1)).
inline std::int64_t sample_crt(std::int64_t y, double alpha, Rng& rng) {
    if (y < 0 || !(alpha > 0.0)) throw DomainError("sample_crt: need y >= 0 and alpha > 0");
    std::int64_t tables = 0;
    for (std::int64_t n = 1; n <= y; ++n) {
        tables += rng.uniform() * (alpha + static_cast<double>(n - 1)) < alpha;
    }
    return tables;
}

/// One logarithmic-series draw, pmf ∝ p^y / y on y >= 1 (Kemp's method).
inline std::int64_t sample_logarithmic(double p, Rng& rng) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("sample_logarithmic: p must lie in (0,1)");
    const double r = std::log1p(-p);
    for (;;) {
        const double v = rng.uniform();
        if (v >= p) return 1;
        const double q = -std::expm1(r * rng.uniform());
        if (v <= q * q) {
            const double y = std::floor(1.0 + std::log(v) / std::log(q));
            if (y < 1.0) continue;
            return static_cast<std::int64_t>(y);
        }
        return v >= q ? 1 : 2;
    }
}

/// Sum of l logarithmic-series draws with parameter p_aug.
inline std::int64_t sample_sum_logarithmic(std::int64_t l, double p_aug, Rng& rng) {
    if (l < 0) throw DomainError("sample_sum_logarithmic: negative count");
    std::int64_t y = 0;
    for (std::int64_t i = 0; i < l; ++i) y += sample_logarithmic(p_aug, rng);
    return y;
}

namespace detail {

inline constexpr double kPgTrunc = 0.64;

// n-th coefficient of the alternating series for the J*(1, z) density.
inline double pg_series_coef(int n, double x) {
    const double k = n + 0.5;
    if (x > kPgTrunc) return std::numbers::pi * k * std::exp(-k * k * std::numbers::pi * std::numbers::pi * x / 2.0);
    return std::pow(2.0 / (std::numbers::pi * x), 1.5) * std::numbers::pi * k * std::exp(-2.0 * k * k / x);
}

// Probability of the exponential proposal branch.
inline double pg_mass_texpon(double z) {
    const double t = kPgTrunc;
    const double fz = std::numbers::pi * std::numbers::pi / 8.0 + z * z / 2.0;
    const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
    const double x0 = std::log(fz) + fz * t;
    const double xb = x0 - z + special::log_normal_cdf(b);
    const double xa = x0 + z + special::log_normal_cdf(a);
    const double qdivp = 4.0 / std::numbers::pi * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + qdivp);
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, t).
inline double pg_rtigauss(double z, Rng& rng) {
    const double t = kPgTrunc;
    const double mu = z > 0.0 ? 1.0 / z : std::numeric_limits<double>::infinity();
    double x = t + 1.0;
    if (mu > t) {
        double alpha = 0.0;
        while (rng.uniform() > alpha) {
            double e1 = rng.exponential(), e2 = rng.exponential();
            while (e1 * e1 > 2.0 * e2 / t) {
                e1 = rng.exponential();
                e2 = rng.exponential();
            }
            x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            alpha = std::exp(-0.5 * z * z * x);
        }
    } else {
        while (x >= t) {
            const double n = rng.normal();
            const double y = n * n;
            x = mu + 0.5 * mu * mu * y - 0.5 * mu * std::sqrt(4.0 * mu * y + (mu * y) * (mu * y));
            if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
        }
    }
    return x;
}

// Exact PG(1, c) draw (Devroye alternating series).
inline double sample_pg1(double c, Rng& rng) {
    const double z = std::abs(c) / 2.0;
    const double fz = std::numbers::pi * std::numbers::pi / 8.0 + z * z / 2.0;
    const double p_exp = pg_mass_texpon(z);
    for (;;) {
        const double x = rng.uniform() < p_exp ? kPgTrunc + rng.exponential() / fz : pg_rtigauss(z, rng);
        double s = pg_series_coef(0, x);
        const double y = rng.uniform() * s;
        for (int n = 1;; ++n) {
            if (n % 2 == 1) {
                s -= pg_series_coef(n, x);
                if (y <= s) return 0.25 * x;
            } else {
                s += pg_series_coef(n, x);
                if (y > s) break;
            }
        }
    }
}

}  // namespace detail

/// PG(b, c) as a sum of b independent PG(1, c) draws.
inline double sample_polya_gamma(std::int64_t b, double c, Rng& rng) {
    if (b < 1) throw DomainError("sample_polya_gamma: b must be a positive integer");
    double s = 0.0;
    for (std::int64_t i = 0; i < b; ++i) s += detail::sample_pg1(c, rng);
    return s;
}

/// Draw from N(Q⁻¹ h, Q⁻¹) for precision Q using its Cholesky factor.
inline Eigen::VectorXd mvn_conditional_update(const Eigen::MatrixXd& precision, const Eigen::VectorXd& linear_term,
                                              Rng& rng) {
    if (precision.rows() != precision.cols() || precision.rows() != linear_term.size()) {
        throw DomainError("mvn_conditional_update: dimension mismatch");
    }
    if (!precision.isApprox(precision.transpose(), 1e-10)) {
        throw DecompositionError("mvn_conditional_update: precision is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw DecompositionError("mvn_conditional_update: precision is not positive definite");
    const Eigen::VectorXd mean = llt.solve(linear_term);
    Eigen::VectorXd z(linear_term.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    // Q = L Lᵀ, so Lᵀ x = z gives Cov(x) = Q⁻¹.
    return mean + llt.matrixU().solve(z);
}

/// D = 2X + 1 with X ~ Binomial((d_max - 1)/2, q).
class OddBinomialPrior {
  public:
    OddBinomialPrior(std::int64_t d_max, double q) : d_max_(d_max), q_(q) {
        if (d_max < 1 || d_max % 2 == 0) throw DomainError("OddBinomialPrior: d_max must be odd and positive");
        if (!(q >= 0.0 && q <= 1.0)) throw DomainError("OddBinomialPrior: q outside [0,1]");
    }
    [[nodiscard]] std::int64_t d_max() const { return d_max_; }
    [[nodiscard]] double q() const { return q_; }
    [[nodiscard]] std::vector<std::int64_t> support() const {
        std::vector<std::int64_t> s;
        for (std::int64_t d = 1; d <= d_max_; d += 2) s.push_back(d);
        return s;
    }
    [[nodiscard]] double log_pmf(std::int64_t d) const {
        if (d < 1 || d > d_max_ || d % 2 == 0) return kNegInf;
        const std::int64_t n = (d_max_ - 1) / 2, x = (d - 1) / 2;
        return special::log_binom(n, x) + scaled(x, std::log(q_)) + scaled(n - x, std::log1p(-q_));
    }
    /// Median of the prior; used to initialize chains.
    [[nodiscard]] std::int64_t median() const { return 2 * binomial_median((d_max_ - 1) / 2) + 1; }

  private:
    static double scaled(std::int64_t k, double lp) { return k == 0 ? 0.0 : static_cast<double>(k) * lp; }
    [[nodiscard]] std::int64_t binomial_median(std::int64_t n) const {
        double acc = 0.0;
        for (std::int64_t x = 0; x <= n; ++x) {
            acc += std::exp(special::log_binom(n, x) + scaled(x, std::log(q_)) + scaled(n - x, std::log1p(-q_)));
            if (acc >= 0.5) return x;
        }
        return n;
    }
    std::int64_t d_max_;
    double q_;
};

/// D - 1 ~ Binomial(d_max - 1, q).
class ShiftedBinomialPrior {
  public:
    ShiftedBinomialPrior(std::int64_t d_max, double q) : d_max_(d_max), q_(q) {
        if (d_max < 1) throw DomainError("ShiftedBinomialPrior: d_max must be positive");
        if (!(q >= 0.0 && q <= 1.0)) throw DomainError("ShiftedBinomialPrior: q outside [0,1]");
    }
    [[nodiscard]] std::int64_t d_max() const { return d_max_; }
    [[nodiscard]] std::vector<std::int64_t> support() const {
        std::vector<std::int64_t> s;
        for (std::int64_t d = 1; d <= d_max_; ++d) s.push_back(d);
        return s;
    }
    [[nodiscard]] double log_pmf(std::int64_t d) const {
        if (d < 1 || d > d_max_) return kNegInf;
        const std::int64_t n = d_max_ - 1, x = d - 1;
        const double lq = x == 0 ? 0.0 : x * std::log(q_);
        const double l1q = n - x == 0 ? 0.0 : (n - x) * std::log1p(-q_);
        return special::log_binom(n, x) + lq + l1q;
    }

  private:
    std::int64_t d_max_;
    double q_;
};

/// Exact draw of an order D ∝ prior(d) · exp(log_likelihood(d)) over the prior support.
template <class Prior, class LogLik>
std::int64_t order_posterior_draw(const LogLik& log_likelihood, const Prior& prior, Rng& rng) {
    const auto support = prior.support();
    std::vector<double> logw(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) {
        const double lp = prior.log_pmf(support[i]);
        logw[i] = lp == kNegInf ? kNegInf : lp + log_likelihood(support[i]);
        if (std::isnan(logw[i])) logw[i] = kNegInf;
    }
    bool any = false;
    for (double w : logw) any = any || w > kNegInf;
    if (!any) throw DegenerateError("order_posterior_draw: every candidate order has zero posterior mass");
    return support[rng.categorical_log(logw)];
}

}  // namespace ordstat
