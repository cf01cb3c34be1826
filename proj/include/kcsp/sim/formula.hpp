#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kcsp/errors.hpp"
#include "kcsp/genfn.hpp"
#include "kcsp/quasigroup.hpp"
#include "kcsp/rng.hpp"

namespace kcsp {

inline bool operator==(const UETable& a, const UETable& b) { return a.d == b.d && a.k == b.k && a.f == b.f; }

/// Parameters of the random system as the simulator sees them. Unlike ModelParams
/// this carries no saddle-point scale, and allows arity 2 and any domain size.
struct SimParams {
    Model model = Model::Mod3;
    int k = 3;
    int d = 3;
    double gamma = 0.9;
    bool poisson_m = false;  // m ~ Poisson(gamma n) instead of round(gamma n)

    static SimParams of(Model m, int k, double gamma, int d = 0) {
        SimParams p;
        p.model = m;
        p.k = k;
        p.d = d > 0 ? d : model_domain(m);
        p.gamma = gamma;
        return p;
    }
    static SimParams of(const ModelParams& mp) { return of(mp.model, mp.k, mp.gamma, mp.d); }

    void validate() const {
        if (k < 2 || k > 32) throw domain_error("SimParams: need 2 <= k <= 32");
        if (!(gamma >= 0) || !std::isfinite(gamma)) throw domain_error("SimParams: gamma must be finite and >= 0");
        if (model == Model::Mod2 && d != 2) throw domain_error("SimParams: mod2 needs d = 2");
        if (model == Model::Mod3 && d != 3) throw domain_error("SimParams: mod3 needs d = 3");
        if (model == Model::UniqueExt && (d < 2 || d > 8)) throw domain_error("SimParams: UE needs 2 <= d <= 8");
    }
};

/// A random system: m clauses of arity k over n variables. For linear models the
/// payload is the right-hand side; for UE it indexes `tables`.
struct Formula {
    Model model = Model::Mod3;
    int n = 0;
    int k = 0;
    int d = 0;
    std::vector<std::uint32_t> vars;  // clause c occupies [c k, (c+1) k)
    std::vector<std::uint32_t> payload;
    std::shared_ptr<const std::vector<UETable>> tables;

    std::size_t m() const { return payload.size(); }
    const std::uint32_t* clause(std::size_t c) const { return vars.data() + c * k; }

    void add(const std::vector<std::uint32_t>& xs, std::uint32_t rhs) {
        if (static_cast<int>(xs.size()) != k) throw domain_error("Formula::add: arity mismatch");
        for (auto v : xs)
            if (v >= static_cast<std::uint32_t>(n)) throw domain_error("Formula::add: variable out of range");
        vars.insert(vars.end(), xs.begin(), xs.end());
        payload.push_back(rhs);
    }

    /// Does the assignment x satisfy clause c?
    bool satisfies(std::size_t c, const std::vector<std::uint8_t>& x) const {
        const std::uint32_t* cl = clause(c);
        if (model == Model::UniqueExt) {
            std::uint8_t buf[64];
            for (int i = 0; i < k; ++i) buf[i] = x[cl[i]];
            return (*tables)[payload[c]].accepts(buf);
        }
        unsigned s = 0;
        for (int i = 0; i < k; ++i) s += x[cl[i]];
        return s % d == payload[c];
    }

    bool satisfied_by(const std::vector<std::uint8_t>& x) const {
        if (x.size() != static_cast<std::size_t>(n)) return false;
        for (auto v : x)
            if (v >= d) return false;
        for (std::size_t c = 0; c < m(); ++c)
            if (!satisfies(c, x)) return false;
        return true;
    }

    /// The subformula on the clauses with keep[c] != 0 (variables keep their indices).
    Formula restrict(const std::vector<std::uint8_t>& keep) const {
        Formula g;
        g.model = model, g.n = n, g.k = k, g.d = d, g.tables = tables;
        for (std::size_t c = 0; c < m(); ++c) {
            if (!keep[c]) continue;
            g.vars.insert(g.vars.end(), clause(c), clause(c) + k);
            g.payload.push_back(payload[c]);
        }
        return g;
    }

    bool operator==(const Formula& o) const {
        return model == o.model && n == o.n && k == o.k && d == o.d && vars == o.vars && payload == o.payload &&
               (tables == o.tables || (tables && o.tables && *tables == *o.tables));
    }
};

namespace detail {

/// Every quasigroup of order d and the given arity, enumerated once per process.
inline std::shared_ptr<const std::vector<UETable>> quasigroup_family(int d, int arity) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<UETable>>> cache;
    std::lock_guard<std::mutex> lk(mu);
    auto& slot = cache[{d, arity}];
    if (!slot) {
        auto fam = std::make_shared<std::vector<UETable>>();
        for_each_quasigroup(d, arity + 1, [&](const UETable& t) {
            fam->push_back(t);
            return true;
        });
        slot = fam;
    }
    return slot;
}

/// Enumerate the family only while it stays small; beyond that, sample isotopes.
inline bool family_enumerable(int d, int arity) { return arity == 1 ? d <= 8 : (arity == 2 && d <= 5); }

inline std::vector<std::uint8_t> random_permutation(int d, Stream& rng) {
    std::vector<std::uint8_t> p(d);
    std::iota(p.begin(), p.end(), 0);
    for (int i = d - 1; i > 0; --i) std::swap(p[i], p[rng.below(i + 1)]);
    return p;
}

/// A random Latin square of order d: uniform when d <= 5, otherwise a random isotope
/// of the cyclic group (rows, columns and symbols independently permuted).
inline UETable random_latin_square(int d, Stream& rng) {
    if (family_enumerable(d, 2)) {
        auto fam = quasigroup_family(d, 2);
        return (*fam)[rng.below(fam->size())];
    }
    const auto r = random_permutation(d, rng), c = random_permutation(d, rng), s = random_permutation(d, rng);
    UETable t;
    t.d = d, t.k = 3;
    t.f.resize(static_cast<std::size_t>(d) * d);
    for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y) t.f[x * d + y] = s[(r[x] + c[y]) % d];
    return t;
}

/// A k-ary UE table for k >= 4: f(x_1..x_{k-1}) = L_{k-2}(...L_1(x_1, x_2)..., x_{k-1}).
inline UETable composed_table(int d, int k, Stream& rng) {
    std::vector<UETable> ls;
    for (int j = 0; j + 2 < k; ++j) ls.push_back(random_latin_square(d, rng));
    UETable t;
    t.d = d, t.k = k;
    std::size_t cells = 1;
    for (int i = 0; i + 1 < k; ++i) cells *= d;
    t.f.resize(cells);
    std::vector<int> x(k - 1);
    for (std::size_t c = 0; c < cells; ++c) {
        std::size_t r = c;
        for (int i = k - 2; i >= 0; --i) x[i] = static_cast<int>(r % d), r /= d;
        int acc = ls[0].f[x[0] * d + x[1]];
        for (int j = 1; j + 2 < k; ++j) acc = ls[j].f[acc * d + x[j + 1]];
        t.f[c] = static_cast<std::uint8_t>(acc);
    }
    return t;
}

}  // namespace detail

/// Draw the formula for trial `trial` under `seed`. Variable slots, payloads and the
/// clause count each use their own stream, so the output is fixed by (p, n, seed, trial).
inline Formula generate(const SimParams& p, int n, std::uint64_t seed, std::uint64_t trial = 0) {
    p.validate();
    if (n < p.k) throw domain_error("generate: need n >= k");
    Formula f;
    f.model = p.model, f.n = n, f.k = p.k, f.d = p.d;

    std::size_t m = static_cast<std::size_t>(std::llround(p.gamma * n));
    if (p.poisson_m) {
        // count unit-rate arrivals in [0, gamma n]
        Stream rc(seed, Purpose::Count, trial);
        const double lam = p.gamma * n;
        double t = 0;
        m = 0;
        for (;;) {
            t -= std::log1p(-rc.uniform());
            if (t > lam) break;
            ++m;
        }
    }

    Stream rv(seed, Purpose::Formula, trial);
    f.vars.resize(m * p.k);
    for (auto& v : f.vars) v = static_cast<std::uint32_t>(rv.below(static_cast<std::uint64_t>(n)));

    Stream rp(seed, Purpose::Payload, trial);
    f.payload.resize(m);
    if (p.model != Model::UniqueExt) {
        for (auto& b : f.payload) b = static_cast<std::uint32_t>(rp.below(p.d));
        return f;
    }
    const int arity = p.k - 1;
    if (detail::family_enumerable(p.d, arity)) {
        f.tables = detail::quasigroup_family(p.d, arity);
        for (auto& b : f.payload) b = static_cast<std::uint32_t>(rp.below(f.tables->size()));
        return f;
    }
    auto own = std::make_shared<std::vector<UETable>>();
    own->reserve(m);
    for (std::size_t c = 0; c < m; ++c) {
        own->push_back(arity == 2 ? detail::random_latin_square(p.d, rp) : detail::composed_table(p.d, p.k, rp));
        f.payload[c] = static_cast<std::uint32_t>(c);
    }
    f.tables = own;
    return f;
}

}  // namespace kcsp
