#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kcsp/errors.hpp"

namespace kcsp {

/// A uniquely extendible k-ary constraint over {0..d-1}, stored as the function
/// f(x_1..x_{k-1}) = x_k. Its satisfying set is {(x, f(x))}; f is a (k-1)-ary
/// quasigroup, i.e. a bijection in each argument with the others fixed.
struct UETable {
    int d = 0;
    int k = 0;
    std::vector<std::uint8_t> f;  // size d^{k-1}, mixed radix with x_1 most significant

    int cells() const { return static_cast<int>(f.size()); }

    /// Is the full tuple x (length k) satisfying?
    bool accepts(const std::uint8_t* x) const { return f[index(x)] == x[k - 1]; }

    std::size_t index(const std::uint8_t* x) const {
        std::size_t idx = 0;
        for (int i = 0; i + 1 < k; ++i) idx = idx * d + x[i];
        return idx;
    }

    /// Value for slot `slot` given the other k-1 values (x[slot] ignored).
    std::uint8_t complete(const std::uint8_t* x, int slot) const {
        if (slot == k - 1) return f[index(x)];
        std::uint8_t buf[64];
        for (int i = 0; i < k; ++i) buf[i] = x[i];
        for (int v = 0; v < d; ++v) {
            buf[slot] = static_cast<std::uint8_t>(v);
            if (accepts(buf)) return static_cast<std::uint8_t>(v);
        }
        return 0xff;  // unreachable for a valid table
    }
};

/// Check the unique-extension property of f directly (every line is a permutation).
inline bool is_quasigroup(const UETable& t) {
    const int a = t.k - 1;
    const std::size_t cells = t.f.size();
    std::vector<std::size_t> stride(a, 1);
    for (int i = a - 2; i >= 0; --i) stride[i] = stride[i + 1] * t.d;
    for (int axis = 0; axis < a; ++axis) {
        for (std::size_t c = 0; c < cells; ++c) {
            if ((c / stride[axis]) % t.d != 0) continue;  // line start only
            unsigned seen = 0;
            for (int v = 0; v < t.d; ++v) seen |= 1u << t.f[c + v * stride[axis]];
            if (seen != (1u << t.d) - 1) return false;
        }
    }
    return true;
}

/// Visit every (k-1)-ary quasigroup of order d in lexicographic order of f.
/// Stops early (returning false) if `visit` returns false.
inline bool for_each_quasigroup(int d, int k, const std::function<bool(const UETable&)>& visit) {
    if (d < 2 || d > 8 || k < 2) throw domain_error("for_each_quasigroup: need 2 <= d <= 8, k >= 2");
    const int a = k - 1;
    std::size_t cells = 1;
    for (int i = 0; i < a; ++i) {
        cells *= d;
        if (cells > 64) throw size_guard("for_each_quasigroup: more than 64 cells");
    }
    std::vector<std::size_t> stride(a, 1);
    std::size_t run = 1;
    for (int i = a - 1; i >= 0; --i, run *= d) stride[i] = run;
    UETable t;
    t.d = d;
    t.k = k;
    t.f.assign(cells, 0);
    // used[axis][line id] bitmask of values already placed on that line
    std::vector<std::vector<unsigned>> used(a, std::vector<unsigned>(cells, 0));
    auto line_of = [&](std::size_t c, int axis) { return c - ((c / stride[axis]) % d) * stride[axis]; };

    std::function<bool(std::size_t)> rec = [&](std::size_t c) -> bool {
        if (c == cells) return visit(t);
        unsigned blocked = 0;
        for (int ax = 0; ax < a; ++ax) blocked |= used[ax][line_of(c, ax)];
        for (int v = 0; v < d; ++v) {
            if (blocked & (1u << v)) continue;
            t.f[c] = static_cast<std::uint8_t>(v);
            for (int ax = 0; ax < a; ++ax) used[ax][line_of(c, ax)] |= 1u << v;
            const bool go = rec(c + 1);
            for (int ax = 0; ax < a; ++ax) used[ax][line_of(c, ax)] &= ~(1u << v);
            if (!go) return false;
        }
        return true;
    };
    return rec(0);
}

}  // namespace kcsp
