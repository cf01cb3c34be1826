#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <gmpxx.h>

#include "kcsp/config.hpp"
#include "kcsp/errors.hpp"

namespace kcsp {

enum class Model { Mod2, Mod3, UniqueExt };

inline const char* model_name(Model m) {
    switch (m) {
        case Model::Mod2: return "mod2";
        case Model::Mod3: return "mod3";
        case Model::UniqueExt: return "ue";
    }
    return "?";
}

inline int model_domain(Model m) {
    switch (m) {
        case Model::Mod2: return 2;
        case Model::Mod3: return 3;
        case Model::UniqueExt: return 4;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// q(x) = e^x - x - 1 and friends

namespace detail {

// Sum_{j>=2} x^j / j!; every term is positive so there is no cancellation.
inline double q_positive_series(double x) {
    double term = x * x / 2.0;
    double sum = term;
    for (int j = 3; j < 60; ++j) {
        term *= x / j;
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

inline double q_tiny(double x) {
    // through x^6
    return x * x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x * (1.0 / 120 + x / 720))));
}

}  // namespace detail

/// q(x) = e^x - x - 1 for x >= 0.
inline double q_eval(double x) {
    if (!(x >= 0)) throw domain_error("q_eval: x must be nonnegative");
    if (x < defaults::series_cutoff) return detail::q_tiny(x);
    if (x < 1.0) return detail::q_positive_series(x);
    return std::expm1(x) - x;
}

inline double dq_eval(double x) {
    if (!(x >= 0)) throw domain_error("dq_eval: x must be nonnegative");
    return std::expm1(x);
}

inline double ddq_eval(double x) {
    if (!(x >= 0)) throw domain_error("ddq_eval: x must be nonnegative");
    return std::exp(x);
}

/// ln q(x), finite for large x.
inline double log_q(double x) {
    if (!(x >= 0)) throw domain_error("log_q: x must be nonnegative");
    if (x == 0) return -INFINITY;
    if (x < 30.0) return std::log(q_eval(x));
    return x + std::log1p(-(1.0 + x) * std::exp(-x));
}

/// Q(x) = x q'(x) / q(x); increases from 2 at 0+, and Q(x) > x.
inline double Q_eval(double x) {
    if (!(x > 0)) throw domain_error("Q_eval: x must be positive");
    if (x < defaults::series_cutoff) {
        const double num = 1 + x * (1.0 / 2 + x * (1.0 / 6 + x * (1.0 / 24 + x / 120)));
        const double den = 1 + x * (1.0 / 3 + x * (1.0 / 12 + x * (1.0 / 60 + x / 360)));
        return 2.0 * num / den;
    }
    if (x < 1.0) return x * std::expm1(x) / detail::q_positive_series(x);
    const double e = std::exp(-x);
    return x * (1.0 - e) / (1.0 - (1.0 + x) * e);
}

/// dQ/dx.
inline double dQ_eval(double x) {
    if (!(x > 0)) throw domain_error("dQ_eval: x must be positive");
    if (x < 1e-3) return 1.0 / 3 + x / 9;
    // Q = x + x^2/q  =>  Q' = 1 + 2x/q - x^2 q'/q^2
    if (x < 1.0) {
        const double t = x / q_eval(x);
        return 1.0 + 2.0 * t - t * t * std::expm1(x);
    }
    const double e = std::exp(-x);
    const double qs = 1.0 - (1.0 + x) * e;  // q e^{-x}
    return 1.0 + 2.0 * x * e / qs - x * x * (1.0 - e) * e / (qs * qs);
}

/// Unique x > 0 with Q(x) = t.
inline double Q_inverse(double t, double guard = defaults::q_inverse_guard) {
    if (!(t > 2.0 + guard))
        throw no_solution("Q_inverse: no-solution guard, need t > 2 + " + std::to_string(guard));
    // Q(x) = x + x^2/q(x) and 0 < x^2/q(x) <= 2, so x lies in [t-2, t).
    double lo = std::max(t - 2.0, 0.0);
    double hi = t;
    double x = std::max(t - 1.0, 0.5 * (lo + hi));
    if (lo == 0.0) x = 3.0 * (t - 2.0);  // Q ~ 2 + x/3 near 0
    x = std::clamp(x, lo, hi);
    for (int it = 0; it < defaults::q_inverse_max_iter; ++it) {
        if (x <= 0) x = 0.5 * (lo + hi);
        const double f = Q_eval(x) - t;
        if (std::abs(f) <= defaults::q_inverse_tol) return x;
        if (f < 0) lo = x; else hi = x;
        double nx = x - f / dQ_eval(x);
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (nx == x) break;
        x = nx;
    }
    const double f = Q_eval(x) - t;
    if (std::abs(f) <= defaults::q_inverse_tol) return x;
    throw convergence_error("Q_inverse: no convergence for t = " + std::to_string(t));
}

struct LKM {
    double L, K, M;
};

/// L = q(as)/q(s), K = q'(as)/q'(s), M = e^{as}/e^s.
inline LKM ratio_LKM(double a, double s) {
    if (!(a >= 0 && a <= 1)) throw domain_error("ratio_LKM: a must be in [0,1]");
    if (!(s > 0)) throw domain_error("ratio_LKM: s must be positive");
    const double M = std::exp((a - 1.0) * s);
    if (a == 0) return {0.0, 0.0, M};
    const double L = std::exp(log_q(a * s) - log_q(s));
    double K;
    if (s < 30) K = std::expm1(a * s) / std::expm1(s);
    else K = M * (-std::expm1(-a * s)) / (-std::expm1(-s));
    return {L, K, M};
}

/// C(x) = q/(x q') + q'' q / q'^2 - 1; behaves like x/12 near 0.
inline double C_eval(double x) {
    if (!(x > 0)) throw domain_error("C_eval: x must be positive");
    if (x < 0.1) {
        const double x2 = x * x;
        return x * (1.0 / 12 + x2 * (-1.0 / 240 + x2 * (1.0 / 6048 + x2 * (-1.0 / 172800 + x2 / 5322240))));
    }
    if (x >= 1.0) {
        // everything scaled by e^{-x}
        const double e = std::exp(-x);
        const double qq = 1.0 - (1.0 + x) * e;
        const double dq = 1.0 - e;
        return qq / (x * dq) + qq / (dq * dq) - 1.0;
    }
    const double qq = q_eval(x), dq = std::expm1(x);
    return qq / (x * dq) + std::exp(x) * qq / (dq * dq) - 1.0;
}

// ---------------------------------------------------------------------------
// r(x0,x1,x2) = (1/3)[(x0+x1+x2)^k + 2 Re (x0 + w1 x1 + w2 x2)^k]

namespace detail {

inline std::complex<double> ipow(std::complex<double> b, int e) {
    std::complex<double> r(1.0, 0.0);
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

inline double ipow(double b, int e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

inline const std::complex<double> w1{-0.5, 0.86602540378443864676};
inline const std::complex<double> w2{-0.5, -0.86602540378443864676};

}  // namespace detail

/// r and its first and second partials in x1, x2 (x0 held fixed).
struct RPoly {
    double value = 0;
    double d1 = 0, d2 = 0;
    double d11 = 0, d12 = 0, d22 = 0;
    double imag_residue = 0;  // |Im| of the complex evaluation before discarding
};

inline RPoly r_full(double x0, double x1, double x2, int k) {
    if (k < 1) throw domain_error("r_eval: k must be >= 1");
    using detail::ipow;
    using detail::w1;
    using detail::w2;
    const std::complex<double> S(x0 + x1 + x2, 0.0);
    const std::complex<double> T = x0 + w1 * x1 + w2 * x2;
    const std::complex<double> U = x0 + w2 * x1 + w1 * x2;

    RPoly out;
    const std::complex<double> v = (ipow(S, k) + ipow(T, k) + ipow(U, k)) / 3.0;
    out.value = v.real();
    out.imag_residue = std::abs(v.imag());
    const double mag = std::abs(ipow(S, k)) + 2.0 * std::abs(ipow(T, k));
    if (out.imag_residue > defaults::imag_residue_tol * std::max(mag, 1e-300))
        throw convergence_error("r_eval: imaginary residue too large");

    const double f1 = k / 3.0;
    const auto S1 = ipow(S, k - 1), T1 = ipow(T, k - 1), U1 = ipow(U, k - 1);
    out.d1 = (f1 * (S1 + w1 * T1 + w2 * U1)).real();
    out.d2 = (f1 * (S1 + w2 * T1 + w1 * U1)).real();
    if (k >= 2) {
        const double f2 = k * (k - 1) / 3.0;
        const auto S2 = ipow(S, k - 2), T2 = ipow(T, k - 2), U2 = ipow(U, k - 2);
        // w1^2 = w2, w2^2 = w1, w1 w2 = 1
        out.d11 = (f2 * (S2 + w2 * T2 + w1 * U2)).real();
        out.d12 = (f2 * (S2 + T2 + U2)).real();
        out.d22 = (f2 * (S2 + w1 * T2 + w2 * U2)).real();
    }
    return out;
}

inline double r_eval(double x0, double x1, double x2, int k) { return r_full(x0, x1, x2, k).value; }

/// Exact Coeff[x1^k1 x2^k2, r(1,x1,x2)].
inline mpz_class r_coeff(int k1, int k2, int k) {
    if (k1 < 0 || k2 < 0 || k1 + k2 > k) throw domain_error("r_coeff: need 0 <= k1, k2 and k1 + k2 <= k");
    if ((k1 - k2) % 3 != 0) return 0;
    mpz_class a, b, c, d;
    mpz_fac_ui(a.get_mpz_t(), static_cast<unsigned long>(k));
    mpz_fac_ui(b.get_mpz_t(), static_cast<unsigned long>(k - k1 - k2));
    mpz_fac_ui(c.get_mpz_t(), static_cast<unsigned long>(k1));
    mpz_fac_ui(d.get_mpz_t(), static_cast<unsigned long>(k2));
    return a / (b * c * d);
}

struct Vec2 {
    double x = 0, y = 0;
};

/// R(x1,x2) = (x1 r_x1 / r, x2 r_x2 / r) at x0 = 1.
inline Vec2 R_map(double x1, double x2, int k) {
    const RPoly r = r_full(1.0, x1, x2, k);
    if (!(r.value > 0)) throw domain_error("R_map: r(1,x1,x2) <= 0");
    return {x1 * r.d1 / r.value, x2 * r.d2 / r.value};
}

/// Jacobian of R as {{dR1/dx1, dR1/dx2}, {dR2/dx1, dR2/dx2}}.
inline std::array<std::array<double, 2>, 2> R_jacobian(double x1, double x2, int k) {
    const RPoly r = r_full(1.0, x1, x2, k);
    if (!(r.value > 0)) throw domain_error("R_jacobian: r(1,x1,x2) <= 0");
    const double v = r.value;
    const double g1 = r.d1 / v, g2 = r.d2 / v;
    return {{{g1 + x1 * r.d11 / v - x1 * g1 * g1, x1 * r.d12 / v - x1 * g1 * g2},
             {x2 * r.d12 / v - x2 * g1 * g2, g2 + x2 * r.d22 / v - x2 * g2 * g2}}};
}

/// Solve R(c1,c2) = (t1,t2) by damped Newton from (1,1).
inline Vec2 R_inverse(double t1, double t2, int k, double radius = defaults::r_inverse_radius) {
    const double centre = k / 3.0;
    if (std::abs(t1 - centre) > radius * k || std::abs(t2 - centre) > radius * k)
        throw no_solution("R_inverse: target outside the invertibility neighbourhood");
    double c1 = 1.0, c2 = 1.0;
    auto resid = [&](double a, double b, double& f1, double& f2) {
        const Vec2 R = R_map(a, b, k);
        f1 = R.x - t1;
        f2 = R.y - t2;
        return std::max(std::abs(f1), std::abs(f2));
    };
    double f1, f2;
    double err = resid(c1, c2, f1, f2);
    for (int it = 0; it < 100 && err > 0.05 * defaults::inverse_tol; ++it) {
        const auto J = R_jacobian(c1, c2, k);
        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        if (!(std::abs(det) > 1e-300)) break;
        const double d1 = (J[1][1] * f1 - J[0][1] * f2) / det;
        const double d2 = (-J[1][0] * f1 + J[0][0] * f2) / det;
        double step = 1.0;
        bool moved = false;
        for (int h = 0; h < 60; ++h, step *= 0.5) {
            const double n1 = c1 - step * d1, n2 = c2 - step * d2;
            if (!(n1 > 0 && n2 > 0)) continue;
            double g1, g2;
            double e;
            try {
                e = resid(n1, n2, g1, g2);
            } catch (const domain_error&) {
                continue;
            }
            if (e < err) {
                c1 = n1, c2 = n2, f1 = g1, f2 = g2, err = e;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (!(err <= defaults::inverse_tol))
        throw convergence_error("R_inverse: Newton did not reach the residual tolerance");
    const auto J = R_jacobian(c1, c2, k);
    if (!(J[0][0] * J[1][1] - J[0][1] * J[1][0] > 0))
        throw convergence_error("R_inverse: Jacobian degenerate at the solution");
    return {c1, c2};
}

// ---------------------------------------------------------------------------
// p(z) = (1/d)[(1+z)^k + (d-1)(1 - z/(d-1))^k]

struct PPoly {
    double value, d1, d2;
};

inline PPoly p_full(double z, int k, int d) {
    if (d < 2) throw domain_error("p_eval: d must be >= 2");
    if (k < 1) throw domain_error("p_eval: k must be >= 1");
    using detail::ipow;
    const double u = 1.0 + z;
    const double v = 1.0 - z / (d - 1);
    PPoly p;
    p.value = (ipow(u, k) + (d - 1) * ipow(v, k)) / d;
    p.d1 = k * (ipow(u, k - 1) - ipow(v, k - 1)) / d;
    p.d2 = k >= 2 ? k * (k - 1) * (ipow(u, k - 2) + ipow(v, k - 2) / (d - 1)) / d : 0.0;
    return p;
}

inline double p_eval(double z, int k, int d) { return p_full(z, k, d).value; }

/// p_i = (1/d)(1 + (-1)^i (1/(d-1))^{i-1}), p_0 = 1.
inline mpq_class p_i_closed(int i, int d) {
    if (i < 0 || d < 2) throw domain_error("p_i_closed: need i >= 0, d >= 2");
    if (i == 0) return 1;
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), static_cast<unsigned long>(d - 1), static_cast<unsigned long>(i - 1));
    mpq_class t(1, 1);
    t /= den;
    if (i % 2) t = -t;
    mpq_class r = (1 + t) / d;
    r.canonicalize();
    return r;
}

/// P(z) = z p'(z) / p(z).
inline double P_map(double z, int k, int d) {
    const PPoly p = p_full(z, k, d);
    if (!(p.value > 0)) throw domain_error("P_map: p(z) <= 0");
    return z * p.d1 / p.value;
}

inline double dP_map(double z, int k, int d) {
    const PPoly p = p_full(z, k, d);
    const double g = p.d1 / p.value;
    return g + z * p.d2 / p.value - z * g * g;
}

/// Solve P(c) = t near c = d - 1.
inline double P_inverse(double t, int k, int d, double radius = defaults::p_inverse_radius) {
    const double centre = k * (1.0 - 1.0 / d);
    if (std::abs(t - centre) > radius * k)
        throw no_solution("P_inverse: target outside the invertibility neighbourhood");
    double z = d - 1.0;
    double err = std::abs(P_map(z, k, d) - t);
    for (int it = 0; it < 200 && err > 0.05 * defaults::inverse_tol; ++it) {
        const double f = P_map(z, k, d) - t;
        const double dz = f / dP_map(z, k, d);
        double step = 1.0;
        bool moved = false;
        for (int h = 0; h < 60; ++h, step *= 0.5) {
            const double nz = z - step * dz;
            if (!(nz > 0)) continue;
            const PPoly p = p_full(nz, k, d);
            if (!(p.value > 0)) continue;
            const double e = std::abs(nz * p.d1 / p.value - t);
            if (e < err) {
                z = nz, err = e, moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (!(err <= defaults::inverse_tol)) throw convergence_error("P_inverse: no convergence");
    return z;
}

// ---------------------------------------------------------------------------

/// Model kind, arity, domain size, density and the derived scale s with Q(s) = k gamma.
struct ModelParams {
    Model model = Model::Mod3;
    int k = 3;
    int d = 3;
    double gamma = 0.9;
    double s = 0;

    double kg() const { return k * gamma; }
    double Qs() const { return Q_eval(s); }

    static ModelParams make(Model m, int k, double gamma) {
        if (k < 3) throw domain_error("ModelParams: k must be >= 3");
        if (!(gamma > 0 && gamma < 1)) throw domain_error("ModelParams: gamma must be in (0,1)");
        if (!(k * gamma > 2)) throw domain_error("ModelParams: need k*gamma > 2 for s to exist");
        ModelParams p;
        p.model = m;
        p.k = k;
        p.d = model_domain(m);
        p.gamma = gamma;
        p.s = Q_inverse(k * gamma);
        return p;
    }

    /// Fix s and derive gamma = Q(s)/k (used by the lemma verifiers, which are stated in s).
    static ModelParams from_scale(Model m, int k, double s) {
        if (k < 3) throw domain_error("ModelParams: k must be >= 3");
        if (!(s > 0)) throw domain_error("ModelParams: s must be positive");
        const double g = Q_eval(s) / k;
        if (!(g > 0 && g < 1)) throw domain_error("ModelParams: Q(s)/k must lie in (0,1); raise k");
        ModelParams p;
        p.model = m;
        p.k = k;
        p.d = model_domain(m);
        p.gamma = g;
        p.s = s;
        return p;
    }
};

}  // namespace kcsp
