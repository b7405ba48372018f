#pragma once

// Scalar numerical kernels shared by the distributions: log-gamma helpers,
// regularized incomplete gamma / beta (plain and log domain), log-sum-exp,
// inverse normal CDF and moments of standard-normal order statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace ordstat {

/// Raised for arguments outside a function's mathematical domain.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Natural-log probability. Wrapping the value keeps log- and linear-domain
/// quantities from being mixed up at call sites.
struct LogProb {
    double value = kNegInf;

    constexpr LogProb() = default;
    constexpr explicit LogProb(double v) : value(v) {}

    static LogProb from_prob(double p) { return LogProb(p > 0.0 ? std::log(p) : kNegInf); }
    static constexpr LogProb zero() { return LogProb(kNegInf); }
    static constexpr LogProb one() { return LogProb(0.0); }

    [[nodiscard]] double prob() const { return std::exp(value); }
    [[nodiscard]] bool is_zero() const { return value == kNegInf; }

    friend LogProb operator*(LogProb a, LogProb b) { return LogProb(a.value + b.value); }
    friend LogProb operator/(LogProb a, LogProb b) { return LogProb(a.value - b.value); }
    friend auto operator<=>(LogProb a, LogProb b) = default;
};

namespace special {

namespace detail {

inline constexpr int kMaxIter = 100000;
inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr std::size_t kFactorialTable = 4096;

inline const std::array<double, kFactorialTable>& log_factorial_table() {
    static const std::array<double, kFactorialTable> table = [] {
        std::array<double, kFactorialTable> t{};
        t[0] = 0.0;
        for (std::size_t n = 1; n < kFactorialTable; ++n) t[n] = t[n - 1] + std::log(static_cast<double>(n));
        return t;
    }();
    return table;
}

// Exact C(n,k) when it fits in 64 bits (n <= 62).
inline std::uint64_t exact_binom(std::uint64_t n, std::uint64_t k) {
    k = std::min(k, n - k);
    std::uint64_t c = 1;
    for (std::uint64_t i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return c;
}

}  // namespace detail

/// ln(n!) from a cached table for small n, lgamma beyond it.
inline double log_factorial(std::int64_t n) {
    if (n < 0) throw DomainError("log_factorial: negative argument");
    const auto& t = detail::log_factorial_table();
    if (static_cast<std::size_t>(n) < t.size()) return t[static_cast<std::size_t>(n)];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

/// ln C(n,k). Exact (integer product, then log) for n <= 62.
inline double log_binom(std::int64_t n, std::int64_t k) {
    if (n < 0 || k < 0) throw DomainError("log_binom: negative argument");
    if (k > n) throw DomainError("log_binom: k > n");
    if (n <= 62) {
        return std::log(static_cast<double>(
            detail::exact_binom(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k))));
    }
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double log_beta_fn(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

/// log(exp(a) - exp(b)) for a >= b; -inf when equal.
inline double log_sub(double a, double b) {
    if (b == kNegInf) return a;
    if (b > a) throw DomainError("log_sub: result would be negative");
    if (a == b) return kNegInf;
    return a + std::log1p(-std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
    double m = kNegInf;
    for (double x : xs) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    if (m == std::numeric_limits<double>::infinity()) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

/// log(1 - exp(x)) for x <= 0, accurate on both ends.
inline double log1m_exp(double x) {
    if (x > 0.0) throw DomainError("log1m_exp: positive argument");
    if (x == 0.0) return kNegInf;
    return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// --- incomplete gamma ------------------------------------------------------

namespace detail {

// log P(s,x) by the power series; valid for x < s+1.
inline double log_gamma_p_series(double s, double x) {
    double ap = s;
    double del = 1.0 / s;
    double sum = del;
    for (int n = 0; n < kMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return std::log(sum) - x + s * std::log(x) - std::lgamma(s);
}

// log Q(s,x) by the modified Lentz continued fraction; valid for x >= s+1.
inline double log_gamma_q_cf(double s, double x) {
    double b = x + 1.0 - s;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return std::log(h) - x + s * std::log(x) - std::lgamma(s);
}

inline void check_gamma_args(double s, double x) {
    if (!(s > 0.0)) throw DomainError("incomplete gamma: shape must be positive");
    if (!(x >= 0.0)) throw DomainError("incomplete gamma: x must be nonnegative");
}

}  // namespace detail

/// log of the regularized lower incomplete gamma P(s,x) = γ(s,x)/Γ(s).
inline double log_reg_lower_inc_gamma(double s, double x) {
    detail::check_gamma_args(s, x);
    if (x == 0.0) return kNegInf;
    if (x < s + 1.0) return detail::log_gamma_p_series(s, x);
    return log1m_exp(detail::log_gamma_q_cf(s, x));
}

/// log of the regularized upper incomplete gamma Q(s,x) = Γ(s,x)/Γ(s).
inline double log_reg_upper_inc_gamma(double s, double x) {
    detail::check_gamma_args(s, x);
    if (x == 0.0) return 0.0;
    if (x < s + 1.0) return log1m_exp(detail::log_gamma_p_series(s, x));
    return detail::log_gamma_q_cf(s, x);
}

inline double reg_upper_inc_gamma(double s, double x) { return std::exp(log_reg_upper_inc_gamma(s, x)); }
inline double reg_lower_inc_gamma(double s, double x) { return std::exp(log_reg_lower_inc_gamma(s, x)); }

// --- incomplete beta -------------------------------------------------------

namespace detail {

inline double beta_cf(double a, double b, double x) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

// lgamma(z) - [(z - 1/2) ln z - z + ln(2π)/2], by the Stirling series for z >= 10.
inline double stirling_correction(double z) {
    if (z < 10.0) return std::lgamma(z) - ((z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * std::numbers::pi));
    const double r = 1.0 / z, r2 = r * r;
    constexpr double c[] = {1.0 / 12.0,          -1.0 / 360.0,  1.0 / 1260.0, -1.0 / 1680.0,
                            1.0 / 1188.0,        -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0};
    double s = 0.0;
    for (int k = 7; k >= 0; --k) s = s * r2 + c[k];
    return s * r;
}

// log[x^a (1-x)^b / B(a,b)] written around the mode x0 = a/(a+b) so the large
// lgamma terms cancel analytically.
inline double log_beta_front(double a, double b, double x) {
    const double n = a + b;
    const double e = std::fma(x, n, -a) / a;        // x/x0 - 1
    const double f = std::fma(-x, n, a) / b;        // (1-x)/(1-x0) - 1
    return a * std::log1p(e) + b * std::log1p(f) + 0.5 * std::log(a * b / (2.0 * std::numbers::pi * n)) +
           stirling_correction(n) - stirling_correction(a) - stirling_correction(b);
}

// log I_x(a,b) by the direct continued fraction; accurate for x < (a+1)/(a+b+2).
inline double log_ibeta_direct(double a, double b, double x) {
    return log_beta_front(a, b, x) + std::log(beta_cf(a, b, x)) - std::log(a);
}

}  // namespace detail

/// log I_x(a,b), the regularized incomplete beta function.
inline double log_reg_inc_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta: parameters must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x outside [0,1]");
    if (x == 0.0) return kNegInf;
    if (x == 1.0) return 0.0;
    if (x < (a + 1.0) / (a + b + 2.0)) return detail::log_ibeta_direct(a, b, x);
    return log1m_exp(detail::log_ibeta_direct(b, a, 1.0 - x));
}

inline double reg_inc_beta(double a, double b, double x) { return std::exp(log_reg_inc_beta(a, b, x)); }

// --- normal distribution ---------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double log_normal_cdf(double x) {
    if (x > -5.0) return std::log(normal_cdf(x));
    // erfc underflows far in the left tail; asymptotic series of the Mills ratio.
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// Inverse standard-normal CDF (Acklam's rational approximation with one
/// Halley refinement step). `q` is 1-p, passed separately so the upper tail
/// keeps full relative precision.
inline double normal_quantile(double p, double q) {
    if (!(p > 0.0 && q > 0.0)) throw DomainError("normal_quantile: probability must lie in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    const bool upper = q < p;
    const double t = upper ? q : p;
    double x;
    if (t < 0.02425) {
        const double r = std::sqrt(-2.0 * std::log(t));
        x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
    } else {
        const double u = t - 0.5;
        const double r = u * u;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // x now solves Phi(x) = t in the lower half; refine against t.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - t;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return upper ? -x : x;
}

// --- standard-normal order statistics -------------------------------------

namespace detail {

struct GaussLegendre {
    std::vector<double> nodes;    // on [0,1]
    std::vector<double> weights;  // summing to 1
};

inline GaussLegendre make_gauss_legendre(std::size_t n) {
    GaussLegendre gl;
    gl.nodes.resize(n);
    gl.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * static_cast<double>(j) + 1.0) * z * p2 - static_cast<double>(j) * p3) /
                     (static_cast<double>(j) + 1.0);
            }
            pp = static_cast<double>(n) * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        gl.nodes[i] = 0.5 * (1.0 - z);
        gl.nodes[n - 1 - i] = 0.5 * (1.0 + z);
        gl.weights[i] = gl.weights[n - 1 - i] = 0.5 * w;
    }
    return gl;
}

inline const GaussLegendre& gauss_legendre_2048() {
    static const GaussLegendre gl = make_gauss_legendre(2048);
    return gl;
}

}  // namespace detail

struct NormalOrderStatMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and variance of the r-th smallest of D i.i.d. standard normals.
///
/// Integrates over the uniform order statistic u ~ Beta(r, D-r+1) with the
/// probit map x = Phi^{-1}(u). The substitution u = 3t^2 - 2t^3 flattens the
/// logarithmic endpoint singularities of Phi^{-1} so 2048 Gauss-Legendre nodes
/// give ~1e-12 accuracy.
inline NormalOrderStatMoments gaussian_orderstat_moments(std::int64_t r, std::int64_t D) {
    if (D < 1 || r < 1 || r > D) throw DomainError("gaussian_orderstat_moments: need 1 <= r <= D");
    const auto& gl = detail::gauss_legendre_2048();
    const double log_norm = -log_beta_fn(static_cast<double>(r), static_cast<double>(D - r + 1));
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double t = gl.nodes[i];
        const double u = t * t * (3.0 - 2.0 * t);
        const double v = (1.0 - t) * (1.0 - t) * (1.0 + 2.0 * t);  // 1 - u without cancellation
        const double jac = 6.0 * t * (1.0 - t);
        const double dens = std::exp(log_norm + static_cast<double>(r - 1) * std::log(u) +
                                     static_cast<double>(D - r) * std::log(v));
        const double x = normal_quantile(u, v);
        const double w = gl.weights[i] * jac * dens;
        m1 += w * x;
        m2 += w * x * x;
    }
    return {m1, m2 - m1 * m1};
}

/// Variance of the r-th of D standard-normal order statistics; the large-rate
/// limit of the Poisson order-statistic dispersion index.
inline double gaussian_orderstat_variance(std::int64_t r, std::int64_t D) {
    return gaussian_orderstat_moments(r, D).variance;
}

}  // namespace special
}  // namespace ordstat
