#include <catch_amalgamated.hpp>

#include "kcsp/sim/ue.hpp"

using namespace kcsp;

namespace {

bool brute_sat(const Formula& f) {
    std::vector<std::uint8_t> x(f.n, 0);
    for (;;) {
        if (f.satisfied_by(x)) return true;
        int i = 0;
        while (i < f.n && ++x[i] == f.d) x[i++] = 0;
        if (i == f.n) return false;
    }
}

}  // namespace

TEST_CASE("solve_ue agrees with brute force", "[ue]") {
    for (auto [k, d, n] : std::vector<std::tuple<int, int, int>>{{2, 3, 8}, {3, 3, 8}, {3, 4, 7}, {4, 3, 8}, {4, 2, 12}})
        for (double g : {0.6, 0.9, 1.2}) {
            const auto p = SimParams::of(Model::UniqueExt, k, g, d);
            for (std::uint64_t t = 0; t < 30; ++t) {
                const Formula f = generate(p, n, 4321, t);
                const auto r = solve_ue(f);
                INFO("k " << k << " d " << d << " gamma " << g << " trial " << t);
                REQUIRE(r.sat == brute_sat(f));
                if (r.sat) REQUIRE(f.satisfied_by(r.witness));
            }
        }
}

TEST_CASE("solve_ue edge cases", "[ue]") {
    const auto p = SimParams::of(Model::UniqueExt, 3, 0.01, 4);
    const Formula one = generate(p, 100, 1);
    REQUIRE(one.m() == 1);
    const auto r = solve_ue(one);
    CHECK(r.sat);
    CHECK(r.core_m == 0);
    CHECK(r.decisions == 0);

    // a sparse instance below the core threshold is decided by peeling alone
    const Formula sparse = generate(SimParams::of(Model::UniqueExt, 3, 0.6, 4), 3000, 2);
    const auto s = solve_ue(sparse);
    CHECK(s.sat);
    CHECK(s.core_n == 0);

    Formula mod2 = generate(SimParams::of(Model::Mod2, 3, 0.5), 30, 1);
    CHECK_THROWS_AS(solve_ue(mod2), domain_error);

    UEOptions o;
    o.max_core_n = 10;
    const Formula dense = generate(SimParams::of(Model::UniqueExt, 3, 1.0, 4), 400, 3);
    CHECK_THROWS_AS(solve_ue(dense, o), size_guard);
}

TEST_CASE("Small-n UE sweep is monotone in gamma on average", "[ue]") {
    const int n = 40, trials = 60;
    std::vector<int> sat;
    for (double g : {0.5, 0.9, 1.3}) {
        const auto p = SimParams::of(Model::UniqueExt, 3, g, 4);
        int s = 0;
        for (int t = 0; t < trials; ++t) s += solve_ue(generate(p, n, 9, t)).sat;
        sat.push_back(s);
    }
    INFO(sat[0] << " " << sat[1] << " " << sat[2]);
    CHECK(sat[0] >= sat[1]);
    CHECK(sat[1] >= sat[2]);
    CHECK(sat[0] > sat[2]);
}
