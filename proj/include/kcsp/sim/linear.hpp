#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kcsp/errors.hpp"
#include "kcsp/sim/core.hpp"
#include "kcsp/sim/formula.hpp"

namespace kcsp {

using Clock = std::chrono::steady_clock;

struct LinearOptions {
    std::optional<Clock::time_point> deadline;
};

struct LinearResult {
    bool sat = false;
    std::vector<std::uint8_t> witness;  // empty when UNSAT
    std::size_t core_n = 0, core_m = 0;
    std::size_t dense_rows = 0, dense_cols = 0;  // dense kernel: equations x active variables
    std::size_t rank = 0;                        // rank of the dense kernel
};

namespace gf {

inline unsigned add(unsigned a, unsigned b, unsigned q) { return (a + b) % q; }
inline unsigned sub(unsigned a, unsigned b, unsigned q) { return (a + q - b) % q; }
inline unsigned mul(unsigned a, unsigned b, unsigned q) { return (a * b) % q; }
inline unsigned inv(unsigned a, unsigned) { return a; }  // 1 and 2 are self-inverse mod 2 and mod 3

/// Bitsliced GF(3) vectors: plane nz marks nonzero entries, plane sg marks entries equal to 2.
inline void add3(std::uint64_t& nz, std::uint64_t& sg, std::uint64_t bnz, std::uint64_t bsg) {
    const std::uint64_t both = nz & bnz;
    const std::uint64_t same = both & ~(sg ^ bsg);
    const std::uint64_t rnz = (nz ^ bnz) | same;
    const std::uint64_t rsg = (nz & ~bnz & sg) | (bnz & ~nz & bsg) | (same & ~sg);
    nz = rnz;
    sg = rsg;
}

}  // namespace gf

namespace detail {

struct Entry {
    std::uint32_t var;
    std::uint8_t coef;  // nonzero
};

/// Sparse equations in CSR form, with the matching column index.
struct SparseRows {
    std::vector<std::uint32_t> start{0};
    std::vector<Entry> e;
    std::vector<std::uint8_t> rhs;
    std::vector<std::uint32_t> cstart;
    std::vector<std::uint32_t> crow;

    std::size_t size() const { return rhs.size(); }
    std::span<const Entry> row(std::size_t r) const { return {e.data() + start[r], e.data() + start[r + 1]}; }
    std::span<const std::uint32_t> col(std::uint32_t v) const { return {crow.data() + cstart[v], crow.data() + cstart[v + 1]}; }
    unsigned coef(std::size_t r, std::uint32_t v) const {
        for (const auto& x : row(r))
            if (x.var == v) return x.coef;
        return 0;
    }
    void index_columns(int n) {
        cstart.assign(static_cast<std::size_t>(n) + 1, 0);
        for (const auto& x : e) ++cstart[x.var + 1];
        for (int v = 0; v < n; ++v) cstart[v + 1] += cstart[v];
        crow.resize(e.size());
        std::vector<std::uint32_t> pos(cstart.begin(), cstart.end() - 1);
        for (std::size_t r = 0; r < size(); ++r)
            for (const auto& x : row(r)) crow[pos[x.var]++] = static_cast<std::uint32_t>(r);
    }
};

inline void check_deadline(const LinearOptions& o) {
    if (o.deadline && Clock::now() > *o.deadline) throw deadline_exceeded("solve_linear: deadline exceeded");
}

/// A dense system over GF(q) in packed rows: columns 0..D-1 plus the right-hand side
/// in column D. Plane nz marks nonzero entries; for GF(3) plane sg marks entries equal to 2.
struct PackedSystem {
    unsigned q = 2;
    std::size_t R = 0, D = 0, W = 0;
    std::vector<std::uint64_t> nz, sg;

    PackedSystem(unsigned q_, std::size_t R_, std::size_t D_)
        : q(q_), R(R_), D(D_), W((D_ + 1 + 63) / 64), nz(R_ * W, 0), sg(q_ == 3 ? R_ * W : 0, 0) {}

    std::uint64_t* n(std::size_t i) { return nz.data() + i * W; }
    std::uint64_t* s(std::size_t i) { return q == 3 ? sg.data() + i * W : nullptr; }

    unsigned get(std::size_t i, std::size_t j) const {
        const std::size_t w = i * W + (j >> 6);
        const std::uint64_t b = 1ULL << (j & 63);
        if (!(nz[w] & b)) return 0;
        return (q == 3 && (sg[w] & b)) ? 2 : 1;
    }
    void set(std::size_t i, std::size_t j, unsigned a) {
        const std::size_t w = i * W + (j >> 6);
        const std::uint64_t b = 1ULL << (j & 63);
        if (a) nz[w] |= b;
        if (a == 2) sg[w] |= b;
    }
    void swap_rows(std::size_t i, std::size_t k) {
        if (i == k) return;
        std::swap_ranges(n(i), n(i) + W, n(k));
        if (q == 3) std::swap_ranges(s(i), s(i) + W, s(k));
    }
    void negate(std::size_t i) {
        if (q == 3)
            for (std::size_t u = 0; u < W; ++u) sg[i * W + u] ^= nz[i * W + u];
    }
};

/// dst += c src on words [w0, W), c in {1, 2}.
inline void add_packed(unsigned q, std::size_t w0, std::size_t W, std::uint64_t* __restrict dn, std::uint64_t* __restrict ds,
                       const std::uint64_t* __restrict sn, const std::uint64_t* __restrict ss, unsigned c) {
    if (q == 2) {
        for (std::size_t u = w0; u < W; ++u) dn[u] ^= sn[u];
    } else if (c == 1) {
        for (std::size_t u = w0; u < W; ++u) gf::add3(dn[u], ds[u], sn[u], ss[u]);
    } else {
        for (std::size_t u = w0; u < W; ++u) gf::add3(dn[u], ds[u], sn[u], ss[u] ^ sn[u]);
    }
}

/// dst += a + b on words [w0, W), where a and b already carry their multipliers.
inline void add_packed2(unsigned q, std::size_t w0, std::size_t W, std::uint64_t* __restrict dn, std::uint64_t* __restrict ds,
                        const std::uint64_t* __restrict an, const std::uint64_t* __restrict as,
                        const std::uint64_t* __restrict bn, const std::uint64_t* __restrict bs) {
    if (q == 2) {
        for (std::size_t u = w0; u < W; ++u) dn[u] ^= an[u] ^ bn[u];
    } else {
        for (std::size_t u = w0; u < W; ++u) {
            gf::add3(dn[u], ds[u], an[u], as[u]);
            gf::add3(dn[u], ds[u], bn[u], bs[u]);
        }
    }
}

/// Row echelon form by blocks of columns: pivots for a block are found and reduced
/// against each other, then two tables of their combinations clear the block from
/// every lower row with a single row addition (the "Four Russians" trick). Returns
/// false when inconsistent; otherwise x gets a solution with free columns set to 0.
inline bool eliminate(PackedSystem& M, std::vector<std::uint8_t>& x, std::size_t& rank, const LinearOptions& opt) {
    const unsigned q = M.q;
    const std::size_t R = M.R, D = M.D, W = M.W;
    const std::size_t gs = q == 2 ? 8 : 5, kb = 2 * gs;  // two lookup tables per block
    std::vector<std::size_t> pivcol;
    std::vector<std::uint64_t> tn[2], ts[2];
    auto neg = [q](unsigned a) { return gf::sub(0, a, q); };
    auto add_row = [&](std::size_t dst, std::size_t src, unsigned c, std::size_t w0) {
        add_packed(q, w0, W, M.n(dst), M.s(dst), M.n(src), M.s(src), c);
    };
    std::size_t r = 0;
    for (std::size_t j = 0; j < D && r < R; j += kb) {
        check_deadline(opt);
        const std::size_t jend = std::min(j + kb, D), w0 = j >> 6;
        std::size_t pc[16], t = 0;
        for (std::size_t c = j; c < jend; ++c) {
            std::size_t found = R;
            for (std::size_t i = r + t; i < R && found == R; ++i) {
                unsigned v = M.get(i, c);
                for (std::size_t a = 0; a < t; ++a)
                    if (const unsigned ca = M.get(i, pc[a])) v = gf::sub(v, gf::mul(ca, M.get(r + a, c), q), q);
                if (v) found = i;
            }
            if (found == R) continue;
            for (std::size_t a = 0; a < t; ++a)
                if (const unsigned ca = M.get(found, pc[a])) add_row(found, r + a, neg(ca), w0);
            M.swap_rows(found, r + t);
            if (M.get(r + t, c) == 2) M.negate(r + t);
            for (std::size_t a = 0; a < t; ++a)
                if (const unsigned cb = M.get(r + a, c)) add_row(r + a, r + t, neg(cb), w0);
            pc[t++] = c;
        }
        if (t == 0) continue;

        // per group g of pivots, table_g[idx] = -(sum_a v_a P_a) with idx = sum_a v_a q^(a - first_g);
        // pivot rows are reduced against each other, so the groups clear independently
        const std::size_t groups = (t + gs - 1) / gs;
        std::size_t entries[2] = {1, 1};
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t a0 = g * gs, a1 = std::min(t, a0 + gs);
            for (std::size_t a = a0; a < a1; ++a) entries[g] *= q;
            auto& Tn = tn[g];
            auto& Ts = ts[g];
            Tn.assign(entries[g] * W, 0);
            if (q == 3) Ts.assign(entries[g] * W, 0);
            std::size_t span = 1;
            for (std::size_t a = a0; a < a1; ++a) {
                for (std::size_t v = 1; v < q; ++v)
                    for (std::size_t idx = 0; idx < span; ++idx) {
                        const std::size_t dst = idx + v * span;
                        std::copy(Tn.begin() + idx * W + w0, Tn.begin() + (idx + 1) * W, Tn.begin() + dst * W + w0);
                        if (q == 3) std::copy(Ts.begin() + idx * W + w0, Ts.begin() + (idx + 1) * W, Ts.begin() + dst * W + w0);
                        add_packed(q, w0, W, Tn.data() + dst * W, q == 3 ? Ts.data() + dst * W : nullptr, M.n(r + a),
                                   M.s(r + a), neg(static_cast<unsigned>(v)));
                    }
                span *= q;
            }
        }
        for (std::size_t i = r + t; i < R; ++i) {
            std::size_t idx[2] = {0, 0};
            for (std::size_t g = 0; g < groups; ++g) {
                const std::size_t a0 = g * gs, a1 = std::min(t, a0 + gs);
                for (std::size_t a = a0, mult = 1; a < a1; ++a, mult *= q) idx[g] += M.get(i, pc[a]) * mult;
            }
            auto tn_at = [&](std::size_t g) { return tn[g].data() + idx[g] * W; };
            auto ts_at = [&](std::size_t g) { return q == 3 ? ts[g].data() + idx[g] * W : nullptr; };
            if (idx[0] && idx[1])
                add_packed2(q, w0, W, M.n(i), M.s(i), tn_at(0), ts_at(0), tn_at(1), ts_at(1));
            else if (idx[0] || idx[1]) {
                const std::size_t g = idx[0] ? 0 : 1;
                add_packed(q, w0, W, M.n(i), M.s(i), tn_at(g), ts_at(g), 1);
            }
        }
        for (std::size_t a = 0; a < t; ++a) pivcol.push_back(pc[a]);
        r += t;
    }
    rank = r;
    for (std::size_t i = r; i < R; ++i)
        if (M.get(i, D)) return false;

    // back-substitution; a pivot row is zero on the other pivot columns to its left
    x.assign(D, 0);
    std::vector<std::uint64_t> xn(W, 0), xs(W, 0);
    for (std::size_t i = r; i-- > 0;) {
        const std::size_t j = pivcol[i];
        const std::uint64_t* rn = M.n(i);
        const std::uint64_t* rs = q == 3 ? M.s(i) : nullptr;
        unsigned one = 0, two = 0;
        for (std::size_t u = 0; u < W; ++u) {
            const std::uint64_t both = rn[u] & xn[u];  // the rhs column meets a zero in xn
            const std::uint64_t flip = q == 3 ? (rs[u] ^ xs[u]) : 0;
            one += std::popcount(both & ~flip);
            two += std::popcount(both & flip);
        }
        const unsigned v = gf::sub(M.get(i, D), (one + 2 * two) % q, q);
        x[j] = static_cast<std::uint8_t>(v);
        if (v) xn[j >> 6] |= 1ULL << (j & 63);
        if (v == 2) xs[j >> 6] |= 1ULL << (j & 63);
    }
    return true;
}

}  // namespace detail

namespace detail {

/// Lazy elimination plan: which variables go dense ("active"), which equation solves
/// each remaining core variable, and which equations end up purely over active ones.
struct LazyPlan {
    enum Kind : std::uint8_t { Solve, Dense };
    struct Event {
        Kind kind;
        std::uint32_t row;
        std::uint32_t var;  // solved variable (Solve only)
    };
    std::vector<Event> events;
    std::vector<std::int32_t> active_index;  // -1 unless active
    std::size_t active = 0;
};

/// Symbolic pass. An equation with one idle variable solves it; one with none joins
/// the dense system; when neither exists the idle variable with most pending
/// occurrences is made active.
inline LazyPlan plan_lazy(const SparseRows& rows, int n,
                          const LinearOptions& opt) {
    const std::size_t R = rows.size();
    enum : std::uint8_t { Idle, Active, Solved };
    std::vector<std::uint8_t> state(n, Idle), done(R, 0);
    std::vector<std::uint32_t> idle(R), weight(n, 0);
    std::uint32_t maxw = 0;
    for (std::size_t r = 0; r < R; ++r) {
        idle[r] = static_cast<std::uint32_t>(rows.row(r).size());
        for (const auto& x : rows.row(r)) maxw = std::max(maxw, ++weight[x.var]);
    }
    // bucket queue keyed by weight; weights only fall, so stale entries are skipped
    std::vector<std::vector<std::uint32_t>> bucket(maxw + 1);
    for (int v = 0; v < n; ++v)
        if (weight[v]) bucket[weight[v]].push_back(v);
    std::vector<std::uint32_t> ready;
    for (std::size_t r = 0; r < R; ++r)
        if (idle[r] <= 1) ready.push_back(static_cast<std::uint32_t>(r));

    LazyPlan plan;
    plan.active_index.assign(n, -1);
    auto consume = [&](std::uint32_t r) {
        done[r] = 1;
        for (const auto& x : rows.row(r))
            if (state[x.var] == Idle && --weight[x.var]) bucket[weight[x.var]].push_back(x.var);
    };
    auto leave_idle = [&](std::uint32_t v) {
        for (auto r : rows.col(v))
            if (!done[r] && --idle[r] <= 1) ready.push_back(r);
    };
    std::size_t steps = 0;
    for (;;) {
        while (!ready.empty()) {
            const std::uint32_t r = ready.back();
            ready.pop_back();
            if (done[r]) continue;
            if (idle[r] == 0) {
                consume(r);
                plan.events.push_back({LazyPlan::Dense, r, 0});
                continue;
            }
            std::uint32_t v = 0;
            for (const auto& x : rows.row(r))
                if (state[x.var] == Idle) v = x.var;
            consume(r);
            state[v] = Solved;
            plan.events.push_back({LazyPlan::Solve, r, v});
            leave_idle(v);
        }
        if ((++steps & 255) == 0) check_deadline(opt);
        while (maxw > 0) {
            auto& b = bucket[maxw];
            while (!b.empty() && (state[b.back()] != Idle || weight[b.back()] != maxw)) b.pop_back();
            if (!b.empty()) break;
            --maxw;
        }
        if (maxw == 0) break;
        const std::uint32_t v = bucket[maxw].back();
        bucket[maxw].pop_back();
        state[v] = Active;
        plan.active_index[v] = static_cast<std::int32_t>(plan.active++);
        leave_idle(v);
    }
    return plan;
}

}  // namespace detail

/// Decide a linear system over GF(q), q in {2, 3}, and produce a verified witness.
/// The 2-core is split off first and solved by lazy Gaussian elimination: a symbolic
/// pass picks a small set of active variables, every other core variable is written
/// in terms of them, and a packed dense kernel solves the rest. Peeled variables are
/// then filled in reverse peeling order.
inline LinearResult solve_linear(const Formula& f, unsigned q, const LinearOptions& opt = {}) {
    if (f.model == Model::UniqueExt) throw domain_error("solve_linear: formula is not linear");
    if (q != 2 && q != 3) throw domain_error("solve_linear: q must be 2 or 3");
    if (static_cast<unsigned>(f.d) != q) throw domain_error("solve_linear: q differs from the formula's modulus");
    LinearResult res;
    const CoreReport core = peel_2core(f);
    res.core_n = core.n_core;
    res.core_m = core.m_core;

    // sparse rows of the core, repeated variables merged
    detail::SparseRows rows;
    std::vector<std::uint8_t> coef_buf(f.n, 0);
    for (std::size_t c = 0; c < f.m(); ++c) {
        if (!core.clause_in_core[c]) continue;
        const unsigned rhs = f.payload[c] % q;
        const std::uint32_t* cl = f.clause(c);
        for (int i = 0; i < f.k; ++i) coef_buf[cl[i]] = static_cast<std::uint8_t>((coef_buf[cl[i]] + 1) % q);
        const std::size_t before = rows.e.size();
        for (int i = 0; i < f.k; ++i) {
            const std::uint32_t v = cl[i];
            if (coef_buf[v]) rows.e.push_back({v, coef_buf[v]});
            coef_buf[v] = 0;
        }
        if (rows.e.size() == before) {
            if (rhs) return res;  // 0 = nonzero
            continue;
        }
        rows.start.push_back(static_cast<std::uint32_t>(rows.e.size()));
        rows.rhs.push_back(static_cast<std::uint8_t>(rhs));
    }
    rows.index_columns(f.n);
    const std::size_t R = rows.size();

    const detail::LazyPlan plan = detail::plan_lazy(rows, f.n, opt);
    const std::size_t A = plan.active;
    const std::size_t W = (A + 1 + 63) / 64;  // bit A is the right-hand side

    // every row as a packed vector over the active variables plus its right-hand side
    std::vector<std::uint64_t> nzp(R * W, 0), sgp(q == 3 ? R * W : 0, 0);
    auto put = [&](std::size_t r, std::size_t j, unsigned a) {
        nzp[r * W + (j >> 6)] |= 1ULL << (j & 63);
        if (a == 2) sgp[r * W + (j >> 6)] |= 1ULL << (j & 63);
    };
    for (std::size_t r = 0; r < R; ++r) {
        for (const auto& x : rows.row(r))
            if (plan.active_index[x.var] >= 0) put(r, static_cast<std::size_t>(plan.active_index[x.var]), x.coef);
        if (rows.rhs[r]) put(r, A, rows.rhs[r]);
    }
    // substitute each solved variable into the other rows that still contain it
    std::vector<std::uint64_t> tn(W), ts(W);
    std::size_t steps = 0;
    for (const auto& e : plan.events) {
        if (e.kind != detail::LazyPlan::Solve) continue;
        if ((++steps & 1023) == 0) detail::check_deadline(opt);
        const unsigned cv = rows.coef(e.row, e.var);
        const std::uint64_t* sn = &nzp[e.row * W];
        for (auto r2 : rows.col(e.var)) {
            if (r2 == e.row) continue;
            std::uint64_t* dn = &nzp[static_cast<std::size_t>(r2) * W];
            if (q == 2) {
                for (std::size_t u = 0; u < W; ++u) dn[u] ^= sn[u];
                continue;
            }
            // row2 -= alpha row with alpha = c2 / cv; -alpha is 1 (add row) or 2 (add -row)
            const unsigned alpha = gf::mul(rows.coef(r2, e.var), gf::inv(cv, q), q);
            const std::uint64_t* ss = &sgp[e.row * W];
            std::uint64_t* ds = &sgp[static_cast<std::size_t>(r2) * W];
            for (std::size_t u = 0; u < W; ++u) {
                const std::uint64_t bs = alpha == 2 ? ss[u] : ss[u] ^ sn[u];
                gf::add3(dn[u], ds[u], sn[u], bs);
            }
        }
    }

    // dense kernel
    std::vector<std::uint32_t> dense_rows;
    for (const auto& e : plan.events)
        if (e.kind == detail::LazyPlan::Dense) dense_rows.push_back(e.row);
    res.dense_rows = dense_rows.size();
    res.dense_cols = A;
    detail::PackedSystem M(q, dense_rows.size(), A);
    for (std::size_t i = 0; i < dense_rows.size(); ++i) {
        std::copy_n(nzp.begin() + dense_rows[i] * W, W, M.n(i));
        if (q == 3) std::copy_n(sgp.begin() + dense_rows[i] * W, W, M.s(i));
    }
    std::vector<std::uint8_t> xa;
    const bool ok = detail::eliminate(M, xa, res.rank, opt);
    if (!ok) return res;

    // back-substitution: each solved variable depends on active ones only
    std::vector<std::uint8_t> x(f.n, 0);
    std::vector<std::uint64_t> xn(W, 0), xs(W, 0);
    for (std::size_t j = 0; j < A; ++j) {
        if (xa[j]) xn[j >> 6] |= 1ULL << (j & 63);
        if (xa[j] == 2) xs[j >> 6] |= 1ULL << (j & 63);
    }
    for (int v = 0; v < f.n; ++v)
        if (plan.active_index[v] >= 0) x[v] = xa[plan.active_index[v]];
    const std::uint64_t rbit = 1ULL << (A & 63);
    for (const auto& e : plan.events) {
        if (e.kind != detail::LazyPlan::Solve) continue;
        const std::uint64_t* rn = &nzp[e.row * W];
        unsigned s;
        if (q == 2) {
            unsigned par = (rn[A >> 6] & rbit) ? 1 : 0;
            for (std::size_t u = 0; u < W; ++u) par ^= std::popcount(rn[u] & xn[u]) & 1;  // rhs bit meets a zero in xn
            s = par;
        } else {
            const std::uint64_t* rs = &sgp[e.row * W];
            unsigned one = 0, two = 0;
            for (std::size_t u = 0; u < W; ++u) {
                const std::uint64_t both = rn[u] & xn[u];
                const std::uint64_t flip = rs[u] ^ xs[u];
                one += std::popcount(both & ~flip);
                two += std::popcount(both & flip);
            }
            const unsigned rhs = (rn[A >> 6] & rbit) ? ((rs[A >> 6] & rbit) ? 2 : 1) : 0;
            s = gf::sub(rhs, (one + 2 * two) % 3, 3);
        }
        x[e.var] = static_cast<std::uint8_t>(gf::mul(s, gf::inv(rows.coef(e.row, e.var), q), q));
    }
    for (std::size_t i = core.order.size(); i-- > 0;) {
        const auto [c, v] = core.order[i];
        const std::uint32_t* cl = f.clause(c);
        unsigned s = f.payload[c] % q;
        for (int t = 0; t < f.k; ++t)
            if (cl[t] != v) s = gf::sub(s, x[cl[t]], q);
        x[v] = static_cast<std::uint8_t>(s);  // v occurs once in its peeling clause
    }
    if (!f.satisfied_by(x)) throw std::logic_error("solve_linear: witness failed verification");
    res.sat = true;
    res.witness = std::move(x);
    return res;
}

}  // namespace kcsp
