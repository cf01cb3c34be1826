#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "kcsp/exact.hpp"
#include "kcsp/genfn.hpp"

using namespace kcsp;

namespace {

// Oracle: M(m, n) by enumerating every map of m slots onto n variables.
std::uint64_t M_brute(int m, int n) {
    std::uint64_t total = 0;
    std::vector<int> slot(m, 0), cnt(n, 0);
    std::function<void(int)> rec = [&](int i) {
        if (i == m) {
            for (int c : cnt)
                if (c < 2) return;
            ++total;
            return;
        }
        for (int v = 0; v < n; ++v) {
            ++cnt[v];
            rec(i + 1);
            --cnt[v];
        }
    };
    rec(0);
    return total;
}

// Oracle: K(l) for mod 3 by enumerating the class pattern of every clause slot;
// a clause is admissible when (#class-1 slots - #class-2 slots) = 0 mod 3.
std::uint64_t K_brute(std::array<int, 3> l, int k, int m) {
    std::uint64_t total = 0;
    std::vector<int> cls(static_cast<std::size_t>(k) * m, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == cls.size()) {
            std::array<int, 3> c{};
            for (int x : cls) ++c[x];
            if (c != l) return;
            for (int j = 0; j < m; ++j) {
                int a = 0, b = 0;
                for (int t = 0; t < k; ++t) a += cls[j * k + t] == 1, b += cls[j * k + t] == 2;
                if ((a - b) % 3 != 0) return;
            }
            ++total;
            return;
        }
        for (int x = 0; x < 3; ++x) {
            cls[i] = x;
            rec(i + 1);
        }
    };
    rec(0);
    return total;
}

}  // namespace

TEST_CASE("M(m,n): examples and both paths", "[exact]") {
    CHECK(exact_M(2, 1).value == 1);
    CHECK(exact_M(4, 2).value == 6);
    CHECK(exact_M(5, 2).value == 20);
    CHECK(exact_M(6, 3).value == 90);
    for (int n = 1; n <= 5; ++n)
        for (int m = 0; m < 2 * n; ++m) CHECK(exact_M(m, n).value == 0);
    for (int n = 1; n <= 4; ++n)
        for (int m = 0; m <= 8; ++m) REQUIRE(exact_M(m, n).value == M_brute(m, n));
    for (int n = 0; n <= 20; ++n)
        for (int m = 0; m <= 60; ++m) REQUIRE(exact_M_coeff_dp(m, n) == exact_M_inclusion_exclusion(m, n));
}

TEST_CASE("K(l) mod 3 against slot enumeration", "[exact]") {
    CHECK(exact_K_mod3({3, 0, 0}, 3, 1).value == 1);
    CHECK(exact_K_mod3({1, 1, 1}, 3, 1).value == 6);
    CHECK(exact_K_mod3({4, 1, 1}, 3, 2).value == 12);
    for (int k = 2; k <= 3; ++k)
        for (int m = 1; m <= 3; ++m)
            for (int l1 = 0; l1 <= k * m; ++l1)
                for (int l2 = 0; l1 + l2 <= k * m; ++l2) {
                    const std::array<int, 3> l{k * m - l1 - l2, l1, l2};
                    REQUIRE(exact_K_mod3(l, k, m).value == K_brute(l, k, m));
                }
    // column sums: sum over l of K(l) = r(1,1,1)^m = 3^{(k-1)m}
    for (int k = 3; k <= 6; ++k)
        for (int m = 1; m <= 4; ++m) {
            mpz_class s = 0;
            for (int l1 = 0; l1 <= k * m; ++l1)
                for (int l2 = 0; l1 + l2 <= k * m; ++l2) s += exact_K_mod3({k * m - l1 - l2, l1, l2}, k, m).value;
            REQUIRE(s == ipow(3, static_cast<unsigned long>((k - 1) * m)));
        }
    CHECK_THROWS_AS(exact_K_mod3({1, 1, 1}, 3, 2), domain_error);
}

TEST_CASE("N and N-hat", "[exact]") {
    for (int n = 2; n <= 4; ++n) {
        const int k = 3, m = 3;
        const SlotVector sv{{k * m, 0, 0}, {n, 0, 0}, n, m, k};
        CHECK(exact_Nhat_mod3(sv).value == exact_M(k * m, n).value);
        CHECK(exact_N_mod3(sv).value == exact_M(k * m, n).value);
    }
    // a class with a single slot and at least one variable cannot be filled
    CHECK(exact_N_mod3(SlotVector{{4, 1, 1}, {1, 1, 1}, 3, 2, 3}).value == 0);
    // N = multinomial(n; w) K(l) prod M(l_i, w_i)
    const SlotVector sv{{2, 2, 2}, {1, 1, 1}, 3, 2, 3};
    CHECK(exact_N_mod3(sv).value == 6 * exact_K_mod3(sv.l, 3, 2).value);
}

TEST_CASE("E[X^2] enumeration equals the counting formula", "[exact]") {
    const auto e = enumerate_EX2_mod3(3, 3, 2);
    CHECK(e.formulas == 810);
    CHECK(e.mismatches.empty());
    CHECK(e.EX == mpq_class(3));
    CHECK(e.EX2 == exact_EX2_mod3(3, 3, 2));
    CHECK(e.EX2 >= e.EX * e.EX);
    mpz_class sum = 0;
    for (const auto& [key, v] : e.buckets) sum += v;
    CHECK(sum == e.pair_total);
    // the diagonal bucket (b = a) holds every satisfying (a, F) pair once
    const auto diag = e.buckets.find({0, 0, 0, 0});
    REQUIRE(diag != e.buckets.end());
    CHECK(diag->second == e.single_total);
    CHECK_THROWS_AS(enumerate_EX2_mod3(6, 3, 4), size_guard);
}

TEST_CASE("UE coefficients, K-tilde, constraint family", "[exact]") {
    for (int d = 2; d <= 5; ++d)
        for (int k = 2; k <= 12; ++k) {
            const auto c = p_coefficients(k, d);
            // p(z) at rational points from the coefficients against the closed form
            for (int num = -3; num <= 3; ++num) {
                const mpq_class z(num, 2);
                mpq_class poly = 0, zp = 1;
                for (int i = 0; i <= k; ++i) poly += c[i] * zp, zp *= z;
                mpq_class u = 1 + z, v = 1 - z / (d - 1), uk = 1, vk = 1;
                for (int i = 0; i < k; ++i) uk *= u, vk *= v;
                mpq_class closed = (uk + (d - 1) * vk) / d;
                closed.canonicalize();
                poly.canonicalize();
                REQUIRE(poly == closed);
            }
        }
    for (int d = 2; d <= 4; ++d)
        for (int k = 2; k <= 8; ++k) {
            CHECK(exact_Ktilde_ue(0, k, 3, d) == 1);
            CHECK(exact_Ktilde_ue(1, k, 1, d) == 0);
            for (int m = 1; m <= 4; ++m) {
                mpq_class total = 0;
                for (int l = 0; l <= k * m; ++l) total += exact_Ktilde_ue(l, k, m, d);
                mpq_class p1 = 0;
                for (const auto& x : p_coefficients(k, d)) p1 += x;
                mpq_class pm = 1;
                for (int i = 0; i < m; ++i) pm *= p1;
                total.canonicalize();
                pm.canonicalize();
                REQUIRE(total == pm);
            }
        }
    CHECK(enumerate_ue_constraints(2, 2).tables.size() == 2);  // the two permutations of {0,1}
    CHECK(enumerate_ue_constraints(3, 2).tables.size() == 6);
    CHECK(enumerate_ue_constraints(4, 2).tables.size() == 24);
    CHECK(enumerate_ue_constraints(3, 3).tables.size() == 12);
    CHECK(enumerate_ue_constraints(4, 3).tables.size() == 576);
    for (auto [d, k] : std::vector<std::pair<int, int>>{{2, 2}, {2, 3}, {2, 4}, {3, 2}, {3, 3}, {4, 2}, {4, 3}})
        CHECK(enumerate_ue_constraints(d, k).matches_closed_form);
}

TEST_CASE("UE second moment over first moment squared on tiny instances", "[exact]") {
    // E[X^2] / E[X]^2 = d^{2m - n} * pair sum, with E[X] = d^{n - m}
    for (int n = 2; n <= 4; ++n) {
        const mpq_class r = exact_ue_pair_ratio(n, 3, n, 4) * mpq_class(ipow(4, static_cast<unsigned long>(n)));
        CHECK(r >= 1);
        CHECK(r <= 10);
    }
}

TEST_CASE("M against its saddle-point approximation stays in a bounded band", "[exact]") {
    for (double ratio : {2.5, 4.0, 8.0}) {
        std::vector<double> logr;
        for (int n : {50, 100, 200, 300}) {
            const int m = static_cast<int>(std::lround(ratio * n));
            const double a = Q_inverse(static_cast<double>(m) / n);
            const double approx = m * (std::log(m) - std::log(a) - 1) + n * log_q(a);
            logr.push_back(log_mpz(exact_M(m, n).value) - approx);
        }
        for (double v : logr) CHECK(std::abs(v) <= std::log(3.0));
        // drift between successive n shrinks
        CHECK(std::abs(logr[3] - logr[2]) < std::abs(logr[2] - logr[1]));
        CHECK(std::abs(logr[2] - logr[1]) < std::abs(logr[1] - logr[0]));
    }
}
