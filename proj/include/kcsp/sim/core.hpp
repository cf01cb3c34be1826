#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "kcsp/errors.hpp"
#include "kcsp/rng.hpp"
#include "kcsp/sim/formula.hpp"

namespace kcsp {

/// One peeling step: clause `clause` was removed because `var` had no other occurrence.
struct PeelStep {
    std::uint32_t clause;
    std::uint32_t var;
};

struct CoreReport {
    std::size_t n_core = 0;
    std::size_t m_core = 0;
    double density = 0;  // m_core / n_core, 0 for an empty core
    int rounds = 0;      // passes that removed at least one clause
    std::vector<std::uint8_t> var_in_core;
    std::vector<std::uint8_t> clause_in_core;
    std::vector<PeelStep> order;  // in removal order
};

/// Slot-level incidence in CSR form: a variable repeated in a clause is listed twice.
struct Incidence {
    std::vector<std::uint32_t> start;  // size n + 1
    std::vector<std::uint32_t> clause;

    explicit Incidence(const Formula& f) : start(static_cast<std::size_t>(f.n) + 1, 0), clause(f.vars.size()) {
        for (auto v : f.vars) ++start[v + 1];
        for (int v = 0; v < f.n; ++v) start[v + 1] += start[v];
        std::vector<std::uint32_t> pos(start.begin(), start.end() - 1);
        for (std::size_t s = 0; s < f.vars.size(); ++s) clause[pos[f.vars[s]]++] = static_cast<std::uint32_t>(s / f.k);
    }
    std::uint32_t degree(std::uint32_t v) const { return start[v + 1] - start[v]; }
};

namespace detail {

/// Shared peeling state; `pick` chooses which removable variable goes next.
struct Peeler {
    const Formula& f;
    Incidence inc;
    std::vector<std::uint32_t> deg;
    std::vector<std::uint8_t> removed, queued, alive;
    CoreReport rep;

    explicit Peeler(const Formula& f_) : f(f_), inc(f_), deg(f_.n), removed(f_.n, 0), queued(f_.n, 0), alive(f_.m(), 1) {
        for (int v = 0; v < f.n; ++v) deg[v] = inc.degree(v);
    }

    /// Remove v; push newly removable variables through `push`. Returns true if a clause went.
    template <class Push>
    bool remove(std::uint32_t v, Push&& push) {
        removed[v] = 1;
        if (deg[v] == 0) return false;
        std::uint32_t c = 0;
        for (std::uint32_t s = inc.start[v]; s < inc.start[v + 1]; ++s)
            if (alive[inc.clause[s]]) {
                c = inc.clause[s];
                break;
            }
        alive[c] = 0;
        rep.order.push_back({c, v});
        const std::uint32_t* cl = f.clause(c);
        for (int i = 0; i < f.k; ++i) {
            const std::uint32_t u = cl[i];
            --deg[u];
            if (!queued[u] && deg[u] <= 1) {
                queued[u] = 1;
                push(u);
            }
        }
        return true;
    }

    CoreReport finish() {
        rep.var_in_core.assign(f.n, 0);
        for (int v = 0; v < f.n; ++v)
            if (!removed[v]) rep.var_in_core[v] = 1, ++rep.n_core;
        rep.clause_in_core = alive;
        for (auto a : alive) rep.m_core += a;
        rep.density = rep.n_core ? static_cast<double>(rep.m_core) / static_cast<double>(rep.n_core) : 0.0;
        return std::move(rep);
    }
};

}  // namespace detail

/// Iteratively delete variables with at most one occurrence, with their clause.
/// Processed in rounds (breadth-first), linear in the number of slots.
inline CoreReport peel_2core(const Formula& f) {
    detail::Peeler P(f);
    std::vector<std::uint32_t> frontier, next;
    for (int v = 0; v < f.n; ++v)
        if (P.deg[v] <= 1) P.queued[v] = 1, frontier.push_back(v);
    while (!frontier.empty()) {
        bool any = false;
        for (auto v : frontier) any |= P.remove(v, [&](std::uint32_t u) { next.push_back(u); });
        if (any) ++P.rep.rounds;
        frontier.swap(next);
        next.clear();
    }
    return P.finish();
}

/// The same fixed point reached by removing a uniformly random removable variable at
/// each step. Used to check that the core does not depend on removal order.
inline CoreReport peel_2core_random_order(const Formula& f, Stream& rng) {
    detail::Peeler P(f);
    std::vector<std::uint32_t> pool;
    for (int v = 0; v < f.n; ++v)
        if (P.deg[v] <= 1) P.queued[v] = 1, pool.push_back(v);
    while (!pool.empty()) {
        const std::size_t i = rng.below(pool.size());
        const std::uint32_t v = pool[i];
        pool[i] = pool.back();
        pool.pop_back();
        P.remove(v, [&](std::uint32_t u) { pool.push_back(u); });
    }
    return P.finish();
}

/// Fixed point of the peeling process in the Poisson(k gamma) degree limit.
struct CorePrediction {
    double x = 0;        // largest root of x = k gamma (1 - e^{-x})^{k-1}
    double nu = 0;       // core variables / n
    double mu = 0;       // core clauses / n
    double density = 0;  // mu / nu
};

inline CorePrediction predict_core(int k, double gamma) {
    if (k < 3) throw domain_error("predict_core: need k >= 3");
    if (!(gamma > 0)) throw domain_error("predict_core: need gamma > 0");
    const double kg = k * gamma;
    // from x = k gamma the map decreases monotonically onto the largest fixed point
    double x = kg;
    for (int it = 0; it < 10'000'000; ++it) {
        const double nx = kg * std::pow(-std::expm1(-x), k - 1);
        if (std::abs(nx - x) <= 1e-15 * std::max(1.0, x)) {
            x = nx;
            break;
        }
        x = nx;
        if (x < 1e-9) break;
    }
    CorePrediction r;
    if (x < 1e-6) return r;
    r.x = x;
    const double e = std::exp(-x);
    r.nu = 1 - e - x * e;
    r.mu = gamma * std::pow(1 - e, k);
    r.density = r.mu / r.nu;
    return r;
}

/// The clause density gamma at which the predicted core density crosses 1.
inline double analytic_T(int k, double tol = 1e-12) {
    if (k < 3) throw domain_error("analytic_T: need k >= 3");
    double lo = 1e-3, hi = 1.0;
    if (predict_core(k, hi).density <= 1) throw convergence_error("analytic_T: density(1) <= 1");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (predict_core(k, mid).density > 1 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace kcsp
