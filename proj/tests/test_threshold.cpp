#include <catch_amalgamated.hpp>

#include "kcsp/parallel.hpp"
#include "kcsp/sim/threshold.hpp"

using namespace kcsp;
using Catch::Matchers::WithinAbs;

TEST_CASE("Wilson interval known values", "[threshold]") {
    const auto a = wilson(50, 100);
    CHECK_THAT(a.p, WithinAbs(0.5, 1e-15));
    CHECK_THAT(a.low, WithinAbs(0.40383, 1e-5));
    CHECK_THAT(a.high, WithinAbs(0.59617, 1e-5));
    const auto b = wilson(0, 10);
    CHECK(b.low == 0);
    CHECK_THAT(b.high, WithinAbs(0.27753, 1e-5));
    const auto c = wilson(10, 10);
    CHECK_THAT(c.high, WithinAbs(1.0, 1e-12));
    CHECK_THAT(c.low, WithinAbs(1 - 0.27753, 1e-5));
}

TEST_CASE("Points are reproducible across thread counts", "[threshold]") {
    ThresholdOptions o;
    o.n = 3000, o.trials = 50, o.seed = 5;
    const auto p = SimParams::of(Model::Mod3, 3, 0.92);
    std::vector<TrialRecord> l1, l2;
    thread_cap = 1;
    const auto a = run_point(p, o, &l1);
    thread_cap = 2;
    const auto b = run_point(p, o, &l2);
    thread_cap = 0;
    CHECK(a.sat == b.sat);
    REQUIRE(l1.size() == l2.size());
    for (std::size_t i = 0; i < l1.size(); ++i) {
        CHECK(l1[i].trial == l2[i].trial);
        CHECK(l1[i].sat == l2[i].sat);
        CHECK(l1[i].core_n == l2[i].core_n);
        CHECK(l1[i].core_m == l2[i].core_m);
    }
    CHECK(point_seed(5, 0.9) != point_seed(5, 0.91));
}

TEST_CASE("Threshold search guards", "[threshold]") {
    const auto p = SimParams::of(Model::Mod2, 3, 0.9);
    ThresholdOptions o;
    o.n = 2000, o.trials = 49;
    CHECK_THROWS_AS(estimate_threshold(p, o), domain_error);
    o.trials = 50, o.gamma_low = 0.95, o.gamma_high = 0.9;
    CHECK_THROWS_AS(estimate_threshold(p, o), domain_error);
    o.gamma_low = 0.5, o.gamma_high = 0.6;
    try {
        estimate_threshold(p, o);
        FAIL("expected bracket_error");
    } catch (const bracket_error& e) {
        CHECK(e.p_low == 1.0);
        CHECK(e.p_high > 0.5);
    }
}

TEST_CASE("Threshold estimate at small n", "[threshold]") {
    const auto p = SimParams::of(Model::Mod2, 3, 0.9);
    ThresholdOptions o;
    o.n = 2000, o.trials = 60, o.seed = 3, o.gamma_low = 0.8, o.gamma_high = 1.05, o.gamma_tol = 0.01;
    const auto e = estimate_threshold(p, o);
    CHECK(e.ci_low < e.ci_high);
    CHECK(e.gamma_hat >= e.ci_low);
    CHECK(e.gamma_hat <= e.ci_high);
    CHECK(e.ci_low > 0.8);
    CHECK(e.ci_high < 1.05);
    CHECK(e.log.size() == e.points.size() * 60);
    const auto j = nlohmann::json::parse(e.log_jsonl().substr(0, e.log_jsonl().find('\n')));
    for (const char* key : {"trial", "gamma", "n", "seed", "sat", "core_n", "core_m", "wall_ms"}) CHECK(j.contains(key));
    CHECK(e.sweep_csv().rfind("gamma,p_sat,ci_low,ci_high,trials\n", 0) == 0);
    CHECK(e.to_json()["points"].size() == e.points.size());
}

TEST_CASE("The transition sharpens with n", "[threshold]") {
    auto p_sat = [](int n, double g) {
        ThresholdOptions o;
        o.n = n, o.trials = 100, o.seed = 12;
        auto p = SimParams::of(Model::Mod2, 3, g);
        return run_point(p, o).ci.p;
    };
    const double lo1 = p_sat(1000, 0.90), hi1 = p_sat(1000, 0.93);
    const double lo2 = p_sat(10000, 0.90), hi2 = p_sat(10000, 0.93);
    INFO(lo1 << " " << hi1 << " " << lo2 << " " << hi2);
    CHECK(lo2 - hi2 > lo1 - hi1);
    CHECK(lo2 >= 0.95);
    CHECK(hi2 <= 0.05);
}
