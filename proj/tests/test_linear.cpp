#include <catch_amalgamated.hpp>

#include <random>

#include "kcsp/sim/linear.hpp"

using namespace kcsp;

namespace {

// Oracle: try every assignment.
bool brute_sat(const Formula& f) {
    std::vector<std::uint8_t> x(f.n, 0);
    for (;;) {
        if (f.satisfied_by(x)) return true;
        int i = 0;
        while (i < f.n && ++x[i] == f.d) x[i++] = 0;
        if (i == f.n) return false;
    }
}

// Oracle: textbook Gaussian elimination on an unpacked matrix; true when consistent.
bool naive_consistent(std::vector<std::vector<unsigned>> A, unsigned q) {
    const std::size_t R = A.size(), D = A.empty() ? 0 : A[0].size() - 1;
    std::size_t r = 0;
    for (std::size_t c = 0; c < D && r < R; ++c) {
        std::size_t p = r;
        while (p < R && A[p][c] == 0) ++p;
        if (p == R) continue;
        std::swap(A[p], A[r]);
        const unsigned inv = A[r][c];  // 1 and 2 are self-inverse
        for (auto& v : A[r]) v = v * inv % q;
        for (std::size_t i = 0; i < R; ++i)
            if (i != r && A[i][c]) {
                const unsigned f = A[i][c];
                for (std::size_t j = 0; j <= D; ++j) A[i][j] = (A[i][j] + q * q - f * A[r][j]) % q;
            }
        ++r;
    }
    for (std::size_t i = r; i < R; ++i)
        if (A[i][D]) return false;
    return true;
}

}  // namespace

TEST_CASE("GF(3) packed addition", "[linear]") {
    for (unsigned a = 0; a < 3; ++a)
        for (unsigned b = 0; b < 3; ++b) {
            std::uint64_t nz = a != 0, sg = a == 2;
            gf::add3(nz, sg, b != 0, b == 2);
            const unsigned got = nz ? (sg ? 2 : 1) : 0;
            REQUIRE(got == (a + b) % 3);
        }
}

TEST_CASE("Trivial systems", "[linear]") {
    Formula f;
    f.model = Model::Mod2, f.n = 3, f.k = 3, f.d = 2;
    CHECK(solve_linear(f, 2).sat);
    f.add({0, 1, 2}, 0);
    f.add({0, 1, 2}, 1);
    const auto r = solve_linear(f, 2);
    CHECK_FALSE(r.sat);
    CHECK(r.witness.empty());
    // x + x + y = 1 mod 2 fixes y
    Formula g;
    g.model = Model::Mod2, g.n = 2, g.k = 3, g.d = 2;
    g.add({0, 0, 1}, 1);
    const auto s = solve_linear(g, 2);
    REQUIRE(s.sat);
    CHECK(s.witness[1] == 1);
}

TEST_CASE("solve_linear agrees with brute force on small instances", "[linear]") {
    for (auto [model, q, n] : std::vector<std::tuple<Model, unsigned, int>>{{Model::Mod2, 2, 12}, {Model::Mod3, 3, 8}})
        for (double g : {0.5, 0.9, 1.1, 1.5}) {
            const auto p = SimParams::of(model, 3, g);
            for (std::uint64_t t = 0; t < 40; ++t) {
                const Formula f = generate(p, n, 1234, t);
                const auto r = solve_linear(f, q);
                REQUIRE(r.sat == brute_sat(f));
                if (r.sat) REQUIRE(f.satisfied_by(r.witness));
                // the 2-core decides satisfiability
                REQUIRE(solve_linear(f.restrict(peel_2core(f).clause_in_core), q).sat == r.sat);
            }
        }
}

TEST_CASE("Dense kernel against naive elimination", "[linear]") {
    std::mt19937_64 rng(77);
    for (unsigned q : {2u, 3u})
        for (auto [R, D] : std::vector<std::pair<std::size_t, std::size_t>>{
                 {1, 1}, {5, 3}, {3, 5}, {40, 40}, {70, 63}, {64, 64}, {130, 129}, {200, 190}, {190, 200}}) {
            for (int rep = 0; rep < 6; ++rep) {
                // rank-deficient systems from combinations of a few base rows keep both outcomes common
                const std::size_t base = std::max<long>(1, static_cast<long>(std::min(R, D)) - rep % 3);
                std::vector<std::vector<unsigned>> B(base, std::vector<unsigned>(D + 1));
                for (auto& row : B)
                    for (auto& v : row) v = rng() % q;
                std::vector<std::vector<unsigned>> A(R, std::vector<unsigned>(D + 1, 0));
                for (auto& row : A) {
                    for (const auto& b : B) {
                        const unsigned c = rng() % q;
                        for (std::size_t j = 0; j <= D; ++j) row[j] = (row[j] + c * b[j]) % q;
                    }
                    if (rng() % 8 == 0) row[D] = rng() % q;
                }
                detail::PackedSystem M(q, R, D);
                for (std::size_t i = 0; i < R; ++i)
                    for (std::size_t j = 0; j <= D; ++j) M.set(i, j, A[i][j]);
                std::vector<std::uint8_t> x;
                std::size_t rank = 0;
                const bool ok = detail::eliminate(M, x, rank, {});
                REQUIRE(ok == naive_consistent(A, q));
                if (!ok) continue;
                for (std::size_t i = 0; i < R; ++i) {
                    unsigned s = 0;
                    for (std::size_t j = 0; j < D; ++j) s = (s + A[i][j] * x[j]) % q;
                    REQUIRE(s == A[i][D]);
                }
            }
        }
}

TEST_CASE("Below the threshold large instances are satisfiable", "[linear]") {
    for (auto [model, q] : std::vector<std::pair<Model, unsigned>>{{Model::Mod2, 2}, {Model::Mod3, 3}}) {
        const auto p = SimParams::of(model, 3, 0.85);
        int sat = 0;
        const int trials = 40;
        for (int t = 0; t < trials; ++t) {
            const Formula f = generate(p, 10000, 8, t);
            const auto r = solve_linear(f, q);
            if (r.sat) {
                REQUIRE(f.satisfied_by(r.witness));
                ++sat;
            }
        }
        CHECK(sat >= 38);
    }
    // far above, unsatisfiable
    const Formula f = generate(SimParams::of(Model::Mod2, 3, 1.2), 10000, 8);
    CHECK_FALSE(solve_linear(f, 2).sat);
}

TEST_CASE("Deadline is honoured", "[linear]") {
    const Formula f = generate(SimParams::of(Model::Mod3, 3, 0.95), 20000, 3);
    LinearOptions o;
    o.deadline = Clock::now() - std::chrono::seconds(1);
    CHECK_THROWS_AS(solve_linear(f, 3, o), deadline_exceeded);
}
