#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kcsp/exact.hpp"
#include "kcsp/genfn.hpp"

using namespace kcsp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Oracle: q from its power series sum_{j>=2} x^j / j!, in long double.
long double q_series(long double x) {
    long double term = x * x / 2, sum = 0;
    for (int j = 2; j < 200 && std::fabs(term) > 1e-30L * std::fabs(sum + 1e-300L); ++j) {
        sum += term;
        term *= x / (j + 1);
    }
    return sum;
}

// Oracle: r(1, x1, x2) as the restricted multinomial sum, term by term.
double r_by_sum(double x1, double x2, int k) {
    double total = 0;
    for (int a = 0; a <= k; ++a)
        for (int b = 0; a + b <= k; ++b) {
            if ((a - b) % 3 != 0) continue;
            double c = std::tgamma(k + 1.0) / (std::tgamma(k - a - b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0));
            total += c * std::pow(x1, a) * std::pow(x2, b);
        }
    return total;
}

double central(const std::function<double(double)>& f, double x, double h) { return (f(x + h) - f(x - h)) / (2 * h); }

}  // namespace

TEST_CASE("q and its derivatives", "[genfn]") {
    CHECK(q_eval(0) == 0);
    CHECK_THAT(q_eval(1), WithinRel(std::exp(1.0) - 2, 1e-15));
    CHECK_THAT(q_eval(3), WithinRel(std::exp(3.0) - 4, 1e-15));
    for (double x : {1e-8, 1e-5, 3e-4, 0.01, 0.3, 0.99, 1.0, 2.5, 7.0, 20.0})
        CHECK_THAT(q_eval(x), WithinRel(static_cast<double>(q_series(x)), 1e-13));
    CHECK_THROWS_AS(q_eval(-1e-3), domain_error);
    for (double x : {0.2, 1.0, 4.0, 11.0}) {
        CHECK_THAT(dq_eval(x), WithinRel(central(q_eval, x, 1e-5), 1e-6));
        CHECK_THAT(ddq_eval(x), WithinRel(central(dq_eval, x, 1e-5), 1e-6));
    }
}

TEST_CASE("Q: limit, ordering, monotonicity", "[genfn]") {
    CHECK_THAT(Q_eval(1e-9), WithinAbs(2.0, 1e-8));
    CHECK_THAT(Q_eval(1.0), WithinRel((std::exp(1.0) - 1) / (std::exp(1.0) - 2), 1e-14));
    double prev = 0;
    for (int i = 1; i <= 10000; ++i) {
        const double x = 50.0 * i / 10000;
        const double v = Q_eval(x);
        // Q(x) - x ~ x^2 e^{-x} drops below one ulp of x near x = 35
        if (x < 30) REQUIRE(v > x);
        else REQUIRE(v >= x);
        REQUIRE(v > prev);
        prev = v;
    }
    // series and closed form agree around the switch points
    for (double x : {0.5e-4, 1.5e-4, 0.999, 1.001}) {
        const long double qx = q_series(x);
        const double direct = static_cast<double>(x * std::expm1l(x) / qx);
        CHECK_THAT(Q_eval(x), WithinRel(direct, 1e-12));
    }
    for (double x : {0.05, 1.0, 5.0, 25.0}) CHECK_THAT(dQ_eval(x), WithinRel(central(Q_eval, x, 1e-5), 1e-6));
    CHECK_THROWS_AS(Q_eval(0), domain_error);
}

TEST_CASE("Q_inverse round trip and guard", "[genfn]") {
    for (double s : {0.5, 1.0, 7.0, 15.0}) CHECK_THAT(Q_inverse(Q_eval(s)), WithinAbs(s, 1e-10));
    const double s = Q_inverse(13.5);
    CHECK(std::abs(Q_eval(s) - 13.5) <= 1e-12);
    CHECK(s < 13.5);
    CHECK_THROWS_AS(Q_inverse(2 + 1e-10), no_solution);
}

TEST_CASE("L, K, M ordering chain", "[genfn]") {
    const auto one = ratio_LKM(1.0, 3.0);
    CHECK_THAT(one.L, WithinRel(1.0, 1e-14));
    CHECK_THAT(one.K, WithinRel(1.0, 1e-14));
    CHECK_THAT(one.M, WithinRel(1.0, 1e-14));
    const auto zero = ratio_LKM(0.0, 3.0);
    CHECK(zero.L == 0);
    CHECK(zero.K == 0);
    CHECK_THAT(zero.M, WithinRel(std::exp(-3.0), 1e-14));
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 60; ++j) {
            const double a = i / 100.0, s = 0.1 + j * 0.5;
            const auto r = ratio_LKM(a, s);
            const double tol = 1e-12 * std::max(r.M, 1e-300);
            REQUIRE(a * r.K <= r.L + tol);
            REQUIRE(r.L <= r.K + tol);
            REQUIRE(r.K <= r.M + tol);
        }
    // aK <= (7/10) L for a <= 1/2, s >= 4
    for (int i = 0; i <= 100; ++i)
        for (int j = 0; j <= 52; ++j) {
            const double a = 0.5 * i / 100, s = 4 + j * 0.5;
            const auto r = ratio_LKM(a, s);
            REQUIRE(a * r.K <= 0.7 * r.L + 1e-15);
        }
    const auto p = ratio_LKM(0.4, 5.0);
    CHECK(0.4 * p.K <= 0.7 * p.L);
}

TEST_CASE("C(x) positive and matches its series", "[genfn]") {
    for (int i = 1; i <= 5000; ++i) REQUIRE(C_eval(0.01 * i) > 0);
    // x/12 behaviour near 0
    CHECK_THAT(C_eval(1e-3) / 1e-3, WithinRel(1.0 / 12, 1e-5));
    // series branch and direct formula meet continuously
    auto direct = [](long double x) {
        const long double qq = q_series(x), dq = std::expm1(x), e = std::exp(x);
        return static_cast<double>(qq / (x * dq) + e * qq / (dq * dq) - 1);
    };
    for (double x : {0.05, 0.0999, 0.1001, 0.5, 1.0, 3.0}) CHECK_THAT(C_eval(x), WithinRel(direct(x), 1e-9));
    const auto p = ModelParams::make(Model::Mod3, 15, 0.9);
    const double D = 3 / C_eval(p.s);
    CHECK(std::isfinite(D));
    CHECK(D > 0);
}

TEST_CASE("r: values, coefficients, symmetry", "[genfn]") {
    for (int k = 1; k <= 20; ++k) {
        CHECK_THAT(r_eval(1, 1, 1, k), WithinRel(std::pow(3.0, k - 1), 1e-12));
        CHECK_THAT(r_eval(1, 0, 0, k), WithinRel(1.0, 1e-12));
    }
    CHECK(r_coeff(0, 0, 5) == 1);
    for (int k = 1; k <= 12; ++k) CHECK(r_coeff(1, 0, k) == 0);
    CHECK(r_coeff(1, 1, 3) == 6);
    CHECK_THROWS_AS(r_coeff(2, 2, 3), domain_error);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.2, 2.0);
    for (int k = 1; k <= 12; ++k)
        for (int t = 0; t < 40; ++t) {
            const double x1 = U(rng), x2 = U(rng);
            double poly = 0;
            for (int a = 0; a <= k; ++a)
                for (int b = 0; a + b <= k; ++b) poly += r_coeff(a, b, k).get_d() * std::pow(x1, a) * std::pow(x2, b);
            const RPoly r = r_full(1, x1, x2, k);
            REQUIRE_THAT(r.value, WithinRel(poly, 1e-9));
            REQUIRE_THAT(r.value, WithinRel(r_by_sum(x1, x2, k), 1e-9));
            REQUIRE(r.imag_residue <= 1e-10 * std::abs(r.value) + 1e-300);
            REQUIRE_THAT(r_eval(1, x2, x1, k), WithinRel(r.value, 1e-12));
        }
}

TEST_CASE("r partial derivatives against finite differences", "[genfn]") {
    for (int k : {3, 7, 15}) {
        const double x1 = 0.8, x2 = 1.3, h = 1e-5;
        const RPoly r = r_full(1, x1, x2, k);
        auto f1 = [&](double v) { return r_eval(1, v, x2, k); };
        auto f2 = [&](double v) { return r_eval(1, x1, v, k); };
        CHECK_THAT(r.d1, WithinRel(central(f1, x1, h), 1e-6));
        CHECK_THAT(r.d2, WithinRel(central(f2, x2, h), 1e-6));
        auto g1 = [&](double v) { return r_full(1, v, x2, k).d1; };
        auto g12 = [&](double v) { return r_full(1, x1, v, k).d1; };
        auto g2 = [&](double v) { return r_full(1, x1, v, k).d2; };
        CHECK_THAT(r.d11, WithinRel(central(g1, x1, h), 1e-6));
        CHECK_THAT(r.d12, WithinRel(central(g12, x2, h), 1e-6));
        CHECK_THAT(r.d22, WithinRel(central(g2, x2, h), 1e-6));
    }
}

TEST_CASE("R map: centre, symmetry, Jacobian, inverse", "[genfn]") {
    for (int k = 3; k <= 20; ++k) {
        const Vec2 c = R_map(1, 1, k);
        CHECK_THAT(c.x, WithinRel(k / 3.0, 1e-12));
        CHECK_THAT(c.y, WithinRel(k / 3.0, 1e-12));
        const auto J = R_jacobian(1, 1, k);
        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        // from r = 3^{k-1}, r_x1 = k 3^{k-2}, r_x1x1 = r_x1x2 = k(k-1) 3^{k-3}
        CHECK_THAT(det, WithinRel(k * k / 27.0, 1e-9));
        const auto a = R_map(0.7, 1.4, k), b = R_map(1.4, 0.7, k);
        CHECK_THAT(a.x, WithinRel(b.y, 1e-12));
        CHECK_THAT(a.y, WithinRel(b.x, 1e-12));
    }
    const int k = 15;
    const Vec2 one = R_inverse(k / 3.0, k / 3.0, k);
    CHECK_THAT(one.x, WithinAbs(1.0, 1e-9));
    CHECK_THAT(one.y, WithinAbs(1.0, 1e-9));
    for (int i = -5; i <= 5; ++i)
        for (int j = -5; j <= 5; ++j) {
            const double t1 = k / 3.0 + 0.12 * k * i / 5, t2 = k / 3.0 + 0.12 * k * j / 5;
            const Vec2 c = R_inverse(t1, t2, k);
            const Vec2 back = R_map(c.x, c.y, k);
            REQUIRE_THAT(back.x, WithinAbs(t1, 1e-9));
            REQUIRE_THAT(back.y, WithinAbs(t2, 1e-9));
        }
    const Vec2 sym = R_inverse(0.34 * k, 0.34 * k, k);
    CHECK_THAT(sym.x, WithinRel(sym.y, 1e-9));
    CHECK_THROWS_AS(R_inverse(0.9 * k, 0.05 * k, k), no_solution);
}

TEST_CASE("p(z): values, coefficients, P map", "[genfn]") {
    for (int d = 2; d <= 5; ++d)
        for (int k = 1; k <= 12; ++k) {
            CHECK_THAT(p_eval(0, k, d), WithinAbs(1.0, 1e-14));
            CHECK_THAT(p_full(0, k, d).d1, WithinAbs(0.0, 1e-12));
            CHECK_THAT(p_eval(d - 1, k, d), WithinRel(std::pow(d, k - 1), 1e-12));
        }
    CHECK(p_i_closed(0, 4) == 1);
    CHECK(p_i_closed(1, 4) == 0);
    CHECK(p_i_closed(2, 4) == mpq_class(1, 3));
    for (int d = 2; d <= 5; ++d)
        for (int i = 0; i < 20; ++i) {
            mpq_class next = (1 - p_i_closed(i, d)) / (d - 1);
            next.canonicalize();
            REQUIRE(p_i_closed(i + 1, d) == next);
        }
    // exact: C(k,i) p_i is the z^i coefficient of (1/d)[(1+z)^k + (d-1)(1 - z/(d-1))^k]
    for (int d = 2; d <= 5; ++d)
        for (int k = 1; k <= 20; ++k)
            for (int i = 0; i <= k; ++i) {
                mpq_class neg(-1, d - 1);
                mpq_class coef = mpq_class(binomial(k, i)) * (1 + (d - 1) * mpq_class(ipow(neg.get_num(), i), ipow(neg.get_den(), i)));
                coef /= d;
                coef.canonicalize();
                REQUIRE(coef == mpq_class(binomial(k, i)) * p_i_closed(i, d));
            }
    for (int k = 3; k <= 20; ++k) {
        const int d = 4;
        CHECK_THAT(P_map(d - 1, k, d), WithinRel(k * (1 - 1.0 / d), 1e-12));
        CHECK(dP_map(d - 1, k, d) > 0);
        CHECK_THAT(P_inverse(k * (1 - 1.0 / d), k, d), WithinAbs(d - 1.0, 1e-9));
        auto P = [&](double z) { return P_map(z, k, d); };
        CHECK_THAT(dP_map(2.5, k, d), WithinRel(central(P, 2.5, 1e-5), 1e-6));
        auto pv = [&](double z) { return p_eval(z, k, d); };
        CHECK_THAT(p_full(2.5, k, d).d1, WithinRel(central(pv, 2.5, 1e-5), 1e-6));
    }
}

TEST_CASE("ModelParams invariants", "[genfn]") {
    const auto p = ModelParams::make(Model::Mod3, 15, 0.9);
    CHECK(std::abs(Q_eval(p.s) - 13.5) <= 1e-12);
    CHECK(p.d == 3);
    CHECK(ModelParams::make(Model::UniqueExt, 10, 0.5).d == 4);
    CHECK(ModelParams::make(Model::Mod2, 10, 0.5).d == 2);
    CHECK_THROWS_AS(ModelParams::make(Model::Mod3, 3, 0.6), domain_error);  // k gamma <= 2
    CHECK_THROWS_AS(ModelParams::make(Model::Mod3, 2, 0.9), domain_error);
}
