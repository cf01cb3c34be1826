#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kcsp/config.hpp"
#include "kcsp/errors.hpp"
#include "kcsp/sim/core.hpp"
#include "kcsp/sim/formula.hpp"
#include "kcsp/sim/linear.hpp"

namespace kcsp {

struct UEOptions {
    std::optional<Clock::time_point> deadline;
    std::size_t max_core_n = defaults::ue_backtrack_max_n;
};

struct UEResult {
    bool sat = false;
    std::vector<std::uint8_t> witness;
    std::size_t core_n = 0, core_m = 0;
    std::uint64_t decisions = 0;
    std::uint64_t propagations = 0;
};

namespace detail {

/// Backtracking search over the core. A clause whose only unassigned variable occurs
/// once is completed by its table; a repeated last variable is completed only when
/// exactly one value fits.
class UESearch {
public:
    UESearch(const Formula& f, const std::vector<std::uint8_t>& in_clause, const UEOptions& opt)
        : f_(f), opt_(opt), val_(f.n, kUnset), deg_(f.n, 0) {
        for (std::size_t c = 0; c < f.m(); ++c) {
            if (!in_clause[c]) continue;
            Clause cl{static_cast<std::uint32_t>(c), {}};
            const std::uint32_t* xs = f.clause(c);
            for (int i = 0; i < f.k; ++i)
                if (std::find(cl.vars.begin(), cl.vars.end(), xs[i]) == cl.vars.end()) cl.vars.push_back(xs[i]);
            clauses_.push_back(std::move(cl));
        }
        occ_start_.assign(static_cast<std::size_t>(f.n) + 1, 0);
        for (const auto& cl : clauses_)
            for (auto v : cl.vars) ++occ_start_[v + 1];
        for (int v = 0; v < f.n; ++v) occ_start_[v + 1] += occ_start_[v], deg_[v] = occ_start_[v + 1] - occ_start_[v];
        occ_.resize(occ_start_.back());
        std::vector<std::uint32_t> pos(occ_start_.begin(), occ_start_.end() - 1);
        for (std::size_t i = 0; i < clauses_.size(); ++i)
            for (auto v : clauses_[i].vars) occ_[pos[v]++] = static_cast<std::uint32_t>(i);
        open_.resize(clauses_.size());
        for (std::size_t i = 0; i < clauses_.size(); ++i) open_[i] = static_cast<std::uint32_t>(clauses_[i].vars.size());
    }

    /// Returns true with val() filled on the core variables when satisfiable.
    bool run() {
        for (std::size_t i = 0; i < clauses_.size(); ++i)
            if (open_[i] <= 1) pending_.push_back(static_cast<std::uint32_t>(i));
        if (!propagate()) return false;
        struct Frame {
            std::uint32_t var;
            std::uint8_t next;
            std::size_t trail_mark;
        };
        std::vector<Frame> stack;
        for (;;) {
            const std::int64_t v = pick();
            if (v < 0) return true;
            stack.push_back({static_cast<std::uint32_t>(v), 0, trail_.size()});
            bool placed = false;
            while (!stack.empty()) {
                auto& fr = stack.back();
                if (fr.next >= f_.d) {
                    undo(fr.trail_mark);
                    stack.pop_back();
                    continue;
                }
                undo(fr.trail_mark);
                ++stats.decisions;
                if ((stats.decisions & 1023) == 0) check_deadline();
                const std::uint8_t value = fr.next++;
                if (assign(fr.var, value) && propagate()) {
                    placed = true;
                    break;
                }
            }
            if (!placed) return false;
        }
    }

    const std::vector<std::uint8_t>& val() const { return val_; }
    struct {
        std::uint64_t decisions = 0, propagations = 0;
    } stats;

    static constexpr std::uint8_t kUnset = 0xff;

private:
    struct Clause {
        std::uint32_t id;
        std::vector<std::uint32_t> vars;  // distinct
    };
    const Formula& f_;
    const UEOptions& opt_;
    std::vector<std::uint8_t> val_;
    std::vector<std::uint32_t> deg_;
    std::vector<Clause> clauses_;
    std::vector<std::uint32_t> occ_start_, occ_;
    std::vector<std::uint32_t> open_;  // unassigned distinct variables per clause
    std::vector<std::uint32_t> trail_, pending_;
    bool conflict_ = false;

    void check_deadline() const {
        if (opt_.deadline && Clock::now() > *opt_.deadline) throw deadline_exceeded("solve_ue: deadline exceeded");
    }

    bool assign(std::uint32_t v, std::uint8_t value) {
        val_[v] = value;
        trail_.push_back(v);
        for (std::uint32_t s = occ_start_[v]; s < occ_start_[v + 1]; ++s) {
            const std::uint32_t c = occ_[s];
            if (--open_[c] <= 1) pending_.push_back(c);
        }
        return true;
    }

    void undo(std::size_t mark) {
        while (trail_.size() > mark) {
            const std::uint32_t v = trail_.back();
            trail_.pop_back();
            for (std::uint32_t s = occ_start_[v]; s < occ_start_[v + 1]; ++s) ++open_[occ_[s]];
            val_[v] = kUnset;
        }
        pending_.clear();
    }

    bool accepts(const Clause& cl) const {
        std::uint8_t buf[64];
        const std::uint32_t* xs = f_.clause(cl.id);
        for (int i = 0; i < f_.k; ++i) buf[i] = val_[xs[i]];
        return (*f_.tables)[f_.payload[cl.id]].accepts(buf);
    }

    bool propagate() {
        while (!pending_.empty()) {
            const std::uint32_t c = pending_.back();
            pending_.pop_back();
            const Clause& cl = clauses_[c];
            if (open_[c] == 0) {
                if (!accepts(cl)) return fail();
                continue;
            }
            if (open_[c] != 1) continue;
            std::uint32_t u = 0;
            for (auto v : cl.vars)
                if (val_[v] == kUnset) u = v;
            // values of u that satisfy the clause
            int hits = 0;
            std::uint8_t last = 0;
            for (int a = 0; a < f_.d && hits < 2; ++a) {
                val_[u] = static_cast<std::uint8_t>(a);
                if (accepts(cl)) ++hits, last = static_cast<std::uint8_t>(a);
            }
            val_[u] = kUnset;
            if (hits == 0) return fail();
            if (hits == 1) {
                ++stats.propagations;
                assign(u, last);
            }
        }
        return true;
    }

    bool fail() {
        pending_.clear();
        return false;
    }

    /// Fail-first: the unassigned variable closing the most clauses down to one open
    /// slot, then the one with the most open clauses.
    std::int64_t pick() const {
        std::int64_t best = -1;
        std::uint64_t best_key = 0;
        for (int v = 0; v < f_.n; ++v) {
            if (val_[v] != kUnset || deg_[v] == 0) continue;
            std::uint32_t tight = 0, live = 0;
            for (std::uint32_t s = occ_start_[v]; s < occ_start_[v + 1]; ++s) {
                const std::uint32_t o = open_[occ_[s]];
                tight += o == 2;
                live += o >= 2;
            }
            const std::uint64_t key = (static_cast<std::uint64_t>(tight) << 32) | live;
            if (best < 0 || key > best_key) best = v, best_key = key;
        }
        return best;
    }
};

}  // namespace detail

/// Exact satisfiability of a UE system: the 2-core is searched with propagation and
/// chronological backtracking, then peeled variables are completed clause by clause
/// in reverse peeling order (each such clause has exactly one completion).
inline UEResult solve_ue(const Formula& f, const UEOptions& opt = {}) {
    if (f.model != Model::UniqueExt || !f.tables) throw domain_error("solve_ue: formula is not UE or has no tables");
    UEResult res;
    const CoreReport core = peel_2core(f);
    res.core_n = core.n_core;
    res.core_m = core.m_core;
    if (core.n_core > opt.max_core_n)
        throw size_guard("solve_ue: core has " + std::to_string(core.n_core) + " variables, backtracking guard is " +
                         std::to_string(opt.max_core_n));
    detail::UESearch search(f, core.clause_in_core, opt);
    const bool ok = search.run();
    res.decisions = search.stats.decisions;
    res.propagations = search.stats.propagations;
    if (!ok) return res;

    std::vector<std::uint8_t> x(f.n, 0);
    for (int v = 0; v < f.n; ++v)
        if (search.val()[v] != detail::UESearch::kUnset) x[v] = search.val()[v];
    std::uint8_t buf[64];
    for (std::size_t i = core.order.size(); i-- > 0;) {
        const auto [c, v] = core.order[i];
        const std::uint32_t* cl = f.clause(c);
        int slot = 0;
        for (int t = 0; t < f.k; ++t) {
            buf[t] = x[cl[t]];
            if (cl[t] == v) slot = t;
        }
        x[v] = (*f.tables)[f.payload[c]].complete(buf, slot);
    }
    if (!f.satisfied_by(x)) throw std::logic_error("solve_ue: witness failed verification");
    res.sat = true;
    res.witness = std::move(x);
    return res;
}

}  // namespace kcsp
