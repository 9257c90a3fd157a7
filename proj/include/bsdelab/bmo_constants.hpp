#pragma once

// Reverse-Holder / BMO constant machinery: the critical exponent q* with
// Phi(q*) = N, the conditional-moment constant K(q,N), the exponential moment
// series bound eta(p), and the closed-form a-priori bounds on ||Y||_{S^p} and
// ||Z||.  Everything here is deterministic arithmetic; the only subtlety is
// representation: q*-1 ~ exp(-((N+1)^2-1))/2 drops below double spacing at 1
// already for N ~ 6, so the canonical variable is u = log(q-1), not q.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "errors.hpp"

namespace bsdelab {

// Phi(p) = (1 + log((2p-1)/(2(p-1)))/p^2)^{1/2} - 1 on (1, inf), strictly
// decreasing, Phi(1+) = inf, Phi(inf) = 0.
inline double phi_reverse_holder(double p) {
    if (!(p > 1.0))
        throw std::domain_error("phi_reverse_holder: p must be > 1");
    const double s = std::log((2.0 * p - 1.0) / (2.0 * (p - 1.0))) / (p * p);
    return std::expm1(0.5 * std::log1p(s));
}

// Phi at q = 1 + e^u.  (2q-1)/(2(q-1)) = (1+2e^u)/(2e^u), so
// log-ratio = log1p(2e^u) - log 2 - u, which stays finite when e^u underflows.
inline double phi_log_excess(double u) {
    if (u > 700.0) {
        // log-ratio ~ 1/(2 e^u); Phi ~ e^{-3u}/4, far below double precision.
        return 0.0;
    }
    const double eu = (u > -745.0) ? std::exp(u) : 0.0;
    const double log_ratio = std::log1p(2.0 * eu) - std::numbers::ln2 - u;
    const double qsq = (1.0 + eu) * (1.0 + eu);
    return std::expm1(0.5 * std::log1p(log_ratio / qsq));
}

// Solve Phi(1 + e^u) = N by bisection in u with bracket doubling.
// Tolerance 1e-12 on the argument; Phi_u is strictly decreasing in u.
inline double critical_log_excess(double N) {
    if (!(N > 0.0))
        throw std::domain_error("critical_log_excess: N must be > 0");
    double lo = -1.0, hi = 1.0;
    while (phi_log_excess(lo) <= N) lo *= 2.0;   // toward q -> 1+, Phi -> inf
    while (phi_log_excess(hi) >= N) hi *= 2.0;   // toward q -> inf, Phi -> 0
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (phi_log_excess(mid) > N ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// q* as a plain double.  Collapses to 1.0 for N >~ 6 where the excess is not
// representable; callers needing the invariant |Phi(q*)-N| <= 1e-10 must go
// through BmoParams / critical_log_excess.
inline double critical_exponent(double N) {
    return 1.0 + std::exp(critical_log_excess(N));
}

inline double conjugate_exponent(double q) {
    if (!(q > 1.0))
        throw std::domain_error("conjugate_exponent: q must be > 1");
    return q / (q - 1.0);
}

// BMO norm bound N, horizon T, stochastic-Lipschitz exponent alpha, and the
// derived critical pair (q*, p*).  log_q_excess is canonical; q_star/p_star
// are its double images (p_star overflows to +inf for N >~ 27 -- honest: the
// integrability window above p* is then empty at double precision).
struct BmoParams {
    double N = 0.0;
    double T = 1.0;
    double alpha = 0.5;
    double log_q_excess = std::numeric_limits<double>::infinity();
    double q_star = std::numeric_limits<double>::infinity();
    double p_star = 1.0;
};

inline BmoParams make_bmo_params(double N, double T, double alpha) {
    if (!(N >= 0.0)) throw std::domain_error("make_bmo_params: N must be >= 0");
    if (!(T > 0.0)) throw std::domain_error("make_bmo_params: T must be > 0");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("make_bmo_params: alpha must lie strictly in (0,1)");
    BmoParams p;
    p.N = N;
    p.T = T;
    p.alpha = alpha;
    if (N > 0.0) {
        p.log_q_excess = critical_log_excess(N);
        p.q_star = 1.0 + std::exp(p.log_q_excess);
        p.p_star = 1.0 + std::exp(-p.log_q_excess);
    }
    return p;
}

// Exponent p^* of the data-integrability hypothesis and the driving norm
// || |xi| + int |f(s,0,0)| ds ||_{p^*}.
struct IntegrabilitySpec {
    double p_upper = 2.0;
    double data_norm = 0.0;
};

// K(q,N) = 2 / (1 - 2(q-1)(2q-1)^{-1} exp(q^2(N^2+2N))) for 1 < q < q*.
// The closed form is only usable where the denominator is positive; outside
// that region we refuse rather than clamp.
inline double reverse_holder_constant(double q, const BmoParams& params) {
    if (!(q > 1.0))
        throw std::domain_error("reverse_holder_constant: q must be > 1");
    if (!(std::log(q - 1.0) < params.log_q_excess))
        throw std::domain_error("reverse_holder_constant: q must be < q_star");
    const double expo = q * q * (params.N * params.N + 2.0 * params.N);
    if (expo > 700.0 ||
        std::log(2.0 * (q - 1.0) / (2.0 * q - 1.0)) + expo >= 0.0)
        throw constant_invalid_error(
            "reverse_holder_constant: constant formula invalid at this (q,N)");
    const double denom = (2.0 * q - 1.0) - 2.0 * (q - 1.0) * std::exp(expo);
    return 2.0 * (2.0 * q - 1.0) / denom;
}

// Series bound for eta(p)^p = E[exp(p int_0^T K_s^{2a} ds)]:
//   sum_n (p T^{1-a})^n N^{2na} / (n!)^{1-a},
// summed to 1e-16 relative; convergent for every alpha < 1.
inline double exp_moment_bound(double p, const BmoParams& params) {
    if (!(p >= 1.0))
        throw std::domain_error("exp_moment_bound: p must be >= 1");
    const double oma = 1.0 - params.alpha;
    const double base = p * std::pow(params.T, oma) *
                        std::pow(params.N, 2.0 * params.alpha);
    double sum = 1.0, term = 1.0;
    for (long n = 1; n <= 100000; ++n) {
        term *= base / std::pow(static_cast<double>(n), oma);
        sum += term;
        if (!std::isfinite(sum))
            throw series_cap_error(
                "exp_moment_bound: series overflows the double range");
        if (term <= 1e-16 * sum) return sum;
    }
    throw series_cap_error("exp_moment_bound: series cap (1e5 terms) exceeded");
}

// ||Y||_{S^p} bound: with r = (p+p*)/2,
//   K(r/(r-1), N)^{(r-1)/r} (p/(p-r))^{1/r} eta(p p^*/(p^* - p)) ||data||_{p^*}
// where eta(m) = exp_moment_bound(m)^{1/m}.
inline double apriori_y_bound(double p, const IntegrabilitySpec& spec,
                              const BmoParams& params) {
    if (!std::isfinite(params.p_star))
        throw std::domain_error("apriori_y_bound: p_star not finite at this N");
    if (!(spec.p_upper > params.p_star))
        throw std::domain_error("apriori_y_bound: need p_upper > p_star");
    if (!(p > params.p_star && p < spec.p_upper))
        throw std::domain_error("apriori_y_bound: need p_star < p < p_upper");
    const double r = 0.5 * (p + params.p_star);
    const double K = reverse_holder_constant(conjugate_exponent(r), params);
    const double m = p * spec.p_upper / (spec.p_upper - p);
    const double eta = std::pow(exp_moment_bound(m, params), 1.0 / m);
    return std::pow(K, (r - 1.0) / r) * std::pow(p / (p - r), 1.0 / r) * eta *
           spec.data_norm;
}

struct ZBoundNorms {
    double y_sp = 0.0;      // ||Y||_{S^p}
    double f_int = 0.0;     // ||int f||_p
    double y_sq = 0.0;      // ||Y||_{S^q} factor of the Holder split
    double k_energy = 0.0;  // ||(int K^{2}ds)^{1/2}||-type energy factor
};

// ||Z|| bound C(p,q)(y_sp + f_int + y_sq k_energy) with our documented
// instantiation c_p = 4^{max(p/2,1)}, d_p = (4 sqrt(2) p)^{p/2} (BDG),
// C(p,q) = (3(2 c_p + (c_p d_p)^2))^{1/p}; q enters through the validity
// requirement p < q of the Holder split only.
inline double apriori_z_bound(double p, double q, const ZBoundNorms& norms) {
    if (!(p > 0.0 && p < q))
        throw std::domain_error("apriori_z_bound: need 0 < p < q");
    const double c_p = std::pow(4.0, std::max(p / 2.0, 1.0));
    const double d_p = std::pow(4.0 * std::numbers::sqrt2 * p, p / 2.0);
    const double C = std::pow(3.0 * (2.0 * c_p + (c_p * d_p) * (c_p * d_p)),
                              1.0 / p);
    return C * (norms.y_sp + norms.f_int + norms.y_sq * norms.k_energy);
}

} // namespace bsdelab
