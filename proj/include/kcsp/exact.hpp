#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <gmpxx.h>

#include "kcsp/config.hpp"
#include "kcsp/errors.hpp"
#include "kcsp/genfn.hpp"
#include "kcsp/quasigroup.hpp"

namespace kcsp {

enum class Provenance { CoeffDP, InclusionExclusion, Enumeration };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::CoeffDP: return "coeff-dp";
        case Provenance::InclusionExclusion: return "inclusion-exclusion";
        case Provenance::Enumeration: return "enumeration";
    }
    return "?";
}

struct ExactCount {
    mpz_class value;
    Provenance provenance = Provenance::CoeffDP;
};

/// Slot counts l and variable counts w per class, plus the instance sizes.
struct SlotVector {
    std::array<int, 3> l{};
    std::array<int, 3> w{};
    int n = 0, m = 0, k = 0;

    bool consistent() const {
        return l[0] + l[1] + l[2] == k * m && w[0] + w[1] + w[2] == n && l[0] >= 0 && l[1] >= 0 &&
               l[2] >= 0 && w[0] >= 0 && w[1] >= 0 && w[2] >= 0;
    }
};

// ---------------------------------------------------------------------------
// small exact helpers

inline mpz_class factorial(unsigned long n) {
    mpz_class r;
    mpz_fac_ui(r.get_mpz_t(), n);
    return r;
}

inline mpz_class binomial(unsigned long n, unsigned long k) {
    mpz_class r;
    if (k > n) return 0;
    mpz_bin_uiui(r.get_mpz_t(), n, k);
    return r;
}

inline mpz_class ipow(const mpz_class& b, unsigned long e) {
    mpz_class r;
    mpz_pow_ui(r.get_mpz_t(), b.get_mpz_t(), e);
    return r;
}

inline mpz_class multinomial(const std::vector<int>& parts) {
    long total = 0;
    mpz_class r = 1;
    for (int p : parts) {
        if (p < 0) return 0;
        total += p;
        r *= binomial(static_cast<unsigned long>(total), static_cast<unsigned long>(p));
    }
    return r;
}

/// Natural log of a positive big integer.
inline double log_mpz(const mpz_class& v) {
    if (v <= 0) return -INFINITY;
    long ex = 0;
    const double mant = mpz_get_d_2exp(&ex, v.get_mpz_t());
    return std::log(mant) + static_cast<double>(ex) * std::log(2.0);
}

inline double log_mpq(const mpq_class& v) {
    return log_mpz(v.get_num()) - log_mpz(v.get_den());
}

/// Exact power of a polynomial with rational coefficients, truncated at degree `cap`.
inline std::vector<mpq_class> poly_pow(const std::vector<mpq_class>& p, int e, std::size_t cap) {
    std::vector<mpq_class> acc{mpq_class(1)};
    for (int t = 0; t < e; ++t) {
        std::vector<mpq_class> nxt(std::min(cap + 1, acc.size() + p.size() - 1), mpq_class(0));
        for (std::size_t i = 0; i < acc.size(); ++i) {
            if (acc[i] == 0) continue;
            for (std::size_t j = 0; j < p.size() && i + j < nxt.size(); ++j) {
                if (p[j] == 0) continue;
                nxt[i + j] += acc[i] * p[j];
            }
        }
        acc.swap(nxt);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// M(m, n) = number of ways to fill m slots with n variables, each used >= 2 times

/// m! * Coeff[x^m, (e^x - x - 1)^n] by repeated truncated convolution over Q.
inline mpz_class exact_M_coeff_dp(int m, int n) {
    if (m < 0 || n < 0) throw domain_error("exact_M: m, n must be nonnegative");
    if (m < 2 * n) return 0;
    std::vector<mpq_class> q(static_cast<std::size_t>(m) + 1, mpq_class(0));
    mpz_class f = 1;
    for (int j = 1; j <= m; ++j) {
        f *= j;
        if (j >= 2) q[j] = mpq_class(1) / mpq_class(f);
    }
    const auto pw = poly_pow(q, n, static_cast<std::size_t>(m));
    if (static_cast<std::size_t>(m) >= pw.size()) return 0;
    mpq_class v = pw[m] * mpq_class(factorial(static_cast<unsigned long>(m)));
    v.canonicalize();
    if (v.get_den() != 1) throw std::logic_error("exact_M_coeff_dp: non-integral result");
    return v.get_num();
}

/// Inclusion-exclusion over the bins holding at most one slot:
/// M = sum_{t} sum_{j} (-1)^{n-t} n!/(i! j! t!) m^(j falling) t^{m-j}, i = n - t - j.
inline mpz_class exact_M_inclusion_exclusion(int m, int n) {
    if (m < 0 || n < 0) throw domain_error("exact_M: m, n must be nonnegative");
    if (m < 2 * n) return 0;
    if (n == 0) return m == 0 ? 1 : 0;
    std::vector<mpz_class> fact(static_cast<std::size_t>(n) + 1);
    fact[0] = 1;
    for (int i = 1; i <= n; ++i) fact[i] = fact[i - 1] * i;
    // falling factorials m^(j)
    std::vector<mpz_class> fall(static_cast<std::size_t>(n) + 1);
    fall[0] = 1;
    for (int j = 1; j <= n; ++j) fall[j] = j <= m ? fall[j - 1] * (m - j + 1) : mpz_class(0);

    mpz_class total = 0;
    for (int t = 0; t <= n; ++t) {
        const int jmax = std::min(n - t, m);
        // t^{m - j} for j = jmax down to 0
        mpz_class pw = ipow(mpz_class(t), static_cast<unsigned long>(m - jmax));
        mpz_class part = 0;
        for (int j = jmax; j >= 0; --j) {
            const int i = n - t - j;
            if (pw != 0) part += (fact[n] / (fact[i] * fact[j] * fact[t])) * fall[j] * pw;
            if (j > 0) pw *= t;
        }
        if ((n - t) % 2) total -= part;
        else total += part;
    }
    return total;
}

/// Exact M(m,n). The inclusion-exclusion value is returned; for small sizes the
/// coefficient DP is evaluated too and the two must agree.
inline ExactCount exact_M(int m, int n) {
    ExactCount out{exact_M_inclusion_exclusion(m, n), Provenance::InclusionExclusion};
    if (m <= 64 && n <= 24) {
        const mpz_class dp = exact_M_coeff_dp(m, n);
        if (dp != out.value) throw std::logic_error("exact_M: DP and inclusion-exclusion disagree");
    }
    return out;
}

// ---------------------------------------------------------------------------
// K(l) = Coeff[x^l, r(x0,x1,x2)^m] for equations mod 3

/// Table of K over all (l1, l2) for fixed k, m; l0 = km - l1 - l2.
class K3Table {
public:
    K3Table(int k, int m) : k_(k), m_(m), side_(k * m + 1), v_(static_cast<std::size_t>(side_) * side_, 0) {
        if (k < 1 || m < 0) throw domain_error("K3Table: need k >= 1, m >= 0");
        v_[0] = 1;
        std::vector<std::tuple<int, int, mpz_class>> col;
        for (int a = 0; a <= k; ++a)
            for (int b = 0; a + b <= k; ++b) {
                mpz_class c = r_coeff(a, b, k);
                if (c != 0) col.emplace_back(a, b, c);
            }
        int reach = 0;
        for (int t = 0; t < m; ++t) {
            std::vector<mpz_class> nxt(v_.size(), 0);
            for (int x = 0; x <= reach; ++x)
                for (int y = 0; x + y <= reach; ++y) {
                    const mpz_class& cur = v_[idx(x, y)];
                    if (cur == 0) continue;
                    for (const auto& [a, b, c] : col) nxt[idx(x + a, y + b)] += cur * c;
                }
            reach += k;
            v_.swap(nxt);
        }
    }

    const mpz_class& at(int l1, int l2) const {
        static const mpz_class zero = 0;
        if (l1 < 0 || l2 < 0 || l1 + l2 >= side_) return zero;
        return v_[idx(l1, l2)];
    }

    int k() const { return k_; }
    int m() const { return m_; }

private:
    std::size_t idx(int a, int b) const { return static_cast<std::size_t>(a) * side_ + b; }
    int k_, m_, side_;
    std::vector<mpz_class> v_;
};

inline ExactCount exact_K_mod3(const std::array<int, 3>& l, int k, int m) {
    if (l[0] + l[1] + l[2] != k * m) throw domain_error("exact_K_mod3: slot counts must sum to k*m");
    if (l[0] < 0 || l[1] < 0 || l[2] < 0) return {0, Provenance::CoeffDP};
    K3Table t(k, m);
    return {t.at(l[1], l[2]), Provenance::CoeffDP};
}

inline mpz_class Nhat_from(const K3Table& K, const SlotVector& sv) {
    mpz_class v = K.at(sv.l[1], sv.l[2]);
    if (v == 0) return 0;
    for (int i = 0; i < 3; ++i) {
        v *= exact_M_inclusion_exclusion(sv.l[i], sv.w[i]);
        if (v == 0) return 0;
    }
    return v;
}

inline ExactCount exact_Nhat_mod3(const SlotVector& sv) {
    if (!sv.consistent()) throw domain_error("exact_Nhat_mod3: inconsistent SlotVector");
    K3Table K(sv.k, sv.m);
    return {Nhat_from(K, sv), Provenance::CoeffDP};
}

inline ExactCount exact_N_mod3(const SlotVector& sv) {
    ExactCount nh = exact_Nhat_mod3(sv);
    nh.value *= multinomial({sv.w[0], sv.w[1], sv.w[2]});
    return nh;
}

/// E[X^2] = 3^n sum N(w,l) / (3^m N0) from the counting formula (no enumeration).
inline mpq_class exact_EX2_mod3(int n, int k, int m) {
    K3Table K(k, m);
    const mpz_class N0 = exact_M_inclusion_exclusion(k * m, n);
    if (N0 == 0) throw domain_error("exact_EX2_mod3: no formula has every variable twice (km < 2n)");
    mpz_class sum = 0;
    for (int w1 = 0; w1 <= n; ++w1)
        for (int w2 = 0; w1 + w2 <= n; ++w2)
            for (int l1 = 0; l1 <= k * m; ++l1)
                for (int l2 = 0; l1 + l2 <= k * m; ++l2) {
                    SlotVector sv{{k * m - l1 - l2, l1, l2}, {n - w1 - w2, w1, w2}, n, m, k};
                    mpz_class nh = Nhat_from(K, sv);
                    if (nh != 0) sum += nh * multinomial({sv.w[0], w1, w2});
                }
    mpq_class r(ipow(3, static_cast<unsigned long>(n)) * sum, ipow(3, static_cast<unsigned long>(m)) * N0);
    r.canonicalize();
    return r;
}

struct EX2Enumeration {
    int n = 0, k = 0, m = 0;
    mpz_class formulas;        // |Omega| = N0 * 3^m
    mpz_class pair_total;      // E[X^2] * |Omega|
    mpz_class single_total;    // E[X] * |Omega|
    mpq_class EX2, EX;
    /// (w1, w2, l1, l2) -> number of (a, b, F) with F(a) = F(b) = true
    std::map<std::array<int, 4>, mpz_class> buckets;
    /// buckets whose count differs from 3^n * exact_N_mod3
    std::vector<std::array<int, 4>> mismatches;
};

/// Brute force over every formula and every ordered assignment pair.
inline EX2Enumeration enumerate_EX2_mod3(int n, int k, int m) {
    if (n < 1 || k < 1 || m < 1) throw domain_error("enumerate_EX2_mod3: need n, k, m >= 1");
    const mpz_class N0 = exact_M_inclusion_exclusion(k * m, n);
    const mpz_class space = N0 * ipow(3, static_cast<unsigned long>(m));
    if (space > mpz_class(static_cast<unsigned long>(defaults::enumeration_guard)))
        throw size_guard("enumerate_EX2_mod3: formula space exceeds 10^7");
    if (n > 8) throw size_guard("enumerate_EX2_mod3: n too large for assignment-pair enumeration");

    EX2Enumeration out;
    out.n = n, out.k = k, out.m = m;
    const int slots = k * m;
    int A = 1;
    for (int i = 0; i < n; ++i) A *= 3;
    // assignment digits
    std::vector<std::vector<int>> digit(A, std::vector<int>(n));
    for (int a = 0; a < A; ++a) {
        int x = a;
        for (int i = 0; i < n; ++i) digit[a][i] = x % 3, x /= 3;
    }

    std::vector<int> slot(slots, 0), count(n, 0);
    std::vector<int> rhs(m, 0);
    std::vector<std::uint64_t> bucket_raw;  // dense (w1,w2,l1,l2) counters
    const int L = slots + 1, W = n + 1;
    bucket_raw.assign(static_cast<std::size_t>(W) * W * L * L, 0);
    std::uint64_t formulas = 0, singles = 0;
    std::vector<int> sat;  // assignments satisfying the current formula
    std::vector<int> lhs(static_cast<std::size_t>(A) * m);

    auto process = [&]() {
        // clause sums under every assignment, computed once per slot-assignment
        for (int a = 0; a < A; ++a)
            for (int c = 0; c < m; ++c) {
                int s = 0;
                for (int j = 0; j < k; ++j) s += digit[a][slot[c * k + j]];
                lhs[static_cast<std::size_t>(a) * m + c] = s % 3;
            }
        // every RHS vector, lexicographic
        std::fill(rhs.begin(), rhs.end(), 0);
        while (true) {
            ++formulas;
            sat.clear();
            for (int a = 0; a < A; ++a) {
                bool ok = true;
                for (int c = 0; c < m && ok; ++c) ok = lhs[static_cast<std::size_t>(a) * m + c] == rhs[c];
                if (ok) sat.push_back(a);
            }
            singles += sat.size();
            for (int a : sat)
                for (int b : sat) {
                    int w[3] = {0, 0, 0}, l[3] = {0, 0, 0};
                    std::vector<int> cls(n);
                    for (int i = 0; i < n; ++i) {
                        cls[i] = ((digit[b][i] - digit[a][i]) % 3 + 3) % 3;
                        ++w[cls[i]];
                    }
                    for (int s = 0; s < slots; ++s) ++l[cls[slot[s]]];
                    ++bucket_raw[((static_cast<std::size_t>(w[1]) * W + w[2]) * L + l[1]) * L + l[2]];
                }
            int c = m - 1;
            while (c >= 0 && rhs[c] == 2) rhs[c--] = 0;
            if (c < 0) break;
            ++rhs[c];
        }
    };

    // lexicographic slot assignments in which every variable occurs at least twice
    std::function<void(int, int)> rec = [&](int pos, int deficit) {
        if (slots - pos < deficit) return;
        if (pos == slots) {
            process();
            return;
        }
        for (int v = 0; v < n; ++v) {
            const int before = count[v];
            ++count[v];
            slot[pos] = v;
            rec(pos + 1, deficit - (before < 2 ? 1 : 0));
            --count[v];
        }
    };
    rec(0, 2 * n);

    out.formulas = mpz_class(static_cast<unsigned long>(formulas));
    if (out.formulas != space) throw std::logic_error("enumerate_EX2_mod3: formula count mismatch");
    out.single_total = mpz_class(static_cast<unsigned long>(singles));
    mpz_class total = 0;
    K3Table K(k, m);
    const mpz_class scale = ipow(3, static_cast<unsigned long>(n));
    for (int w1 = 0; w1 <= n; ++w1)
        for (int w2 = 0; w1 + w2 <= n; ++w2)
            for (int l1 = 0; l1 <= slots; ++l1)
                for (int l2 = 0; l1 + l2 <= slots; ++l2) {
                    const std::uint64_t raw = bucket_raw[((static_cast<std::size_t>(w1) * W + w2) * L + l1) * L + l2];
                    const mpz_class got(static_cast<unsigned long>(raw));
                    if (raw) out.buckets[{w1, w2, l1, l2}] = got;
                    total += got;
                    SlotVector sv{{slots - l1 - l2, l1, l2}, {n - w1 - w2, w1, w2}, n, m, k};
                    const mpz_class expect = scale * Nhat_from(K, sv) * multinomial({sv.w[0], w1, w2});
                    if (expect != got) out.mismatches.push_back({w1, w2, l1, l2});
                }
    out.pair_total = total;
    out.EX2 = mpq_class(total, space);
    out.EX2.canonicalize();
    out.EX = mpq_class(out.single_total, space);
    out.EX.canonicalize();
    return out;
}

// ---------------------------------------------------------------------------
// uniquely extendible constraints

/// Coefficients C(k,j) p_j of p(z), exact.
inline std::vector<mpq_class> p_coefficients(int k, int d) {
    std::vector<mpq_class> c(static_cast<std::size_t>(k) + 1);
    for (int j = 0; j <= k; ++j) {
        c[j] = mpq_class(binomial(static_cast<unsigned long>(k), static_cast<unsigned long>(j))) * p_i_closed(j, d);
        c[j].canonicalize();
    }
    return c;
}

/// K(l) / (|Gamma|/d)^m = Coeff[z^l, p(z)^m].
inline mpq_class exact_Ktilde_ue(int l, int k, int m, int d) {
    if (l < 0 || l > k * m) throw domain_error("exact_Ktilde_ue: need 0 <= l <= km");
    const auto pw = poly_pow(p_coefficients(k, d), m, static_cast<std::size_t>(k) * m);
    return static_cast<std::size_t>(l) < pw.size() ? pw[l] : mpq_class(0);
}

struct UEFamily {
    int d = 0, k = 0;
    std::vector<UETable> tables;
    std::vector<mpq_class> p_empirical;  // index i = Hamming distance
    bool matches_closed_form = false;
};

/// Every uniquely extendible k-ary constraint over a d-element domain, with the
/// exact conditional agreement probabilities p_i.
inline UEFamily enumerate_ue_constraints(int d, int k, std::size_t max_family = 1'000'000) {
    if (d < 2 || k < 2) throw domain_error("enumerate_ue_constraints: need d >= 2, k >= 2");
    std::size_t cells = 1;
    for (int i = 0; i + 1 < k; ++i) {
        cells *= d;
        if (cells > 64) throw domain_error("enumerate_ue_constraints: unsupported (d, k), table too large");
    }
    UEFamily fam;
    fam.d = d, fam.k = k;
    for_each_quasigroup(d, k, [&](const UETable& t) {
        fam.tables.push_back(t);
        if (fam.tables.size() > max_family) throw size_guard("enumerate_ue_constraints: family exceeds guard");
        return true;
    });

    // count ordered pairs of satisfying tuples by Hamming distance
    std::vector<mpz_class> agree(static_cast<std::size_t>(k) + 1, 0);
    std::vector<std::uint8_t> u(k), v(k);
    for (const auto& t : fam.tables) {
        std::vector<std::vector<std::uint8_t>> sat;
        for (std::size_t c = 0; c < cells; ++c) {
            std::size_t x = c;
            for (int i = k - 2; i >= 0; --i) u[i] = static_cast<std::uint8_t>(x % d), x /= d;
            u[k - 1] = t.f[c];
            sat.push_back(u);
        }
        std::vector<std::uint64_t> cnt(static_cast<std::size_t>(k) + 1, 0);
        for (const auto& a : sat)
            for (const auto& b : sat) {
                int h = 0;
                for (int i = 0; i < k; ++i) h += a[i] != b[i];
                ++cnt[h];
            }
        for (int i = 0; i <= k; ++i) agree[i] += mpz_class(static_cast<unsigned long>(cnt[i]));
    }
    // denominator: |Gamma| * d^{k-1} reference tuples times C(k,i)(d-1)^i partners
    const mpz_class refs = mpz_class(static_cast<unsigned long>(fam.tables.size())) * mpz_class(static_cast<unsigned long>(cells));
    fam.matches_closed_form = true;
    for (int i = 0; i <= k; ++i) {
        const mpz_class partners = binomial(static_cast<unsigned long>(k), static_cast<unsigned long>(i)) *
                                   ipow(mpz_class(d - 1), static_cast<unsigned long>(i));
        mpq_class p(agree[i], refs * partners);
        p.canonicalize();
        fam.p_empirical.push_back(p);
        if (p != p_i_closed(i, d)) fam.matches_closed_form = false;
    }
    return fam;
}

/// Number of formulas N0 * |Gamma|^m / |Gamma|^m and the pair sum for UE models:
/// sum_{w,l} N(w,l) / (N0 |Gamma|^m), with |Gamma| cancelled symbolically.
inline mpq_class exact_ue_pair_ratio(int n, int k, int m, int d) {
    const mpz_class N0 = exact_M_inclusion_exclusion(k * m, n);
    if (N0 == 0) throw domain_error("exact_ue_pair_ratio: km < 2n");
    const auto pw = poly_pow(p_coefficients(k, d), m, static_cast<std::size_t>(k) * m);
    mpq_class sum = 0;
    const int slots = k * m;
    for (int w = 0; w <= n; ++w)
        for (int l = 0; l <= slots; ++l) {
            if (static_cast<std::size_t>(l) >= pw.size() || pw[l] == 0) continue;
            const mpz_class a = exact_M_inclusion_exclusion(l, w);
            if (a == 0) continue;
            const mpz_class b = exact_M_inclusion_exclusion(slots - l, n - w);
            if (b == 0) continue;
            // N = C(n,w) (d-1)^w M(l,w) M(km-l,n-w) (|Gamma|/d)^m Ktilde(l)
            sum += mpq_class(binomial(static_cast<unsigned long>(n), static_cast<unsigned long>(w)) *
                             ipow(mpz_class(d - 1), static_cast<unsigned long>(w)) * a * b) *
                   pw[l];
        }
    // the ratio sum N / (N0 |Gamma|^m) = sum [...] / (N0 d^m)
    mpq_class r = sum / mpq_class(N0 * ipow(mpz_class(d), static_cast<unsigned long>(m)));
    r.canonicalize();
    return r;
}

}  // namespace kcsp
