#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "kcsp/rng.hpp"

using namespace kcsp;

// Known answers from numpy.random.Philox (Philox4x64-10). numpy bumps the counter
// before each block, so its counter c corresponds to block(c + 1) here.
TEST_CASE("Philox4x64-10 known answers", "[rng]") {
    const auto a = Philox4x64::block({1, 0, 0, 0}, {0, 0});
    CHECK(a[0] == 0x02f4ba6408e4d89bULL);
    CHECK(a[1] == 0x3dd62b0b9ca8c5b2ULL);
    CHECK(a[2] == 0x1c8667a55d902e79ULL);
    CHECK(a[3] == 0x907d7a052fd5b4dcULL);
    const auto b = Philox4x64::block({2, 2, 3, 4}, {0x0123456789abcdefULL, 0xfedcba9876543210ULL});
    CHECK(b[0] == 0x88e941281d6fe907ULL);
    CHECK(b[1] == 0x5823687dd5272472ULL);
    CHECK(b[2] == 0x246fd1b93a04f59dULL);
    CHECK(b[3] == 0x5f18e9daf3d87de6ULL);
    // a keyed stream walks the counter from zero
    Stream s(Philox4x64::Key{0, 0});
    CHECK(s.next_u64() == 0x16554d9eca36314cULL);
    for (int i = 0; i < 3; ++i) s.next_u64();
    CHECK(s.next_u64() == a[0]);
}

TEST_CASE("Streams are reproducible and separated", "[rng]") {
    Stream a(42, Purpose::Formula, 7), b(42, Purpose::Formula, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    std::set<std::uint64_t> firsts;
    for (auto p : {Purpose::Formula, Purpose::Payload, Purpose::Table, Purpose::Order, Purpose::Count})
        for (std::uint64_t t = 0; t < 50; ++t) firsts.insert(Stream(42, p, t).next_u64());
    CHECK(firsts.size() == 250);
    CHECK(Stream(1, Purpose::Test).next_u64() != Stream(2, Purpose::Test).next_u64());
}

TEST_CASE("below and uniform are unbiased", "[rng]") {
    Stream s(9, Purpose::Test);
    const int bins = 7, draws = 700000;
    std::vector<int> cnt(bins, 0);
    for (int i = 0; i < draws; ++i) {
        const auto v = s.below(bins);
        REQUIRE(v < static_cast<std::uint64_t>(bins));
        ++cnt[v];
    }
    double chi2 = 0;
    const double e = static_cast<double>(draws) / bins;
    for (int c : cnt) chi2 += (c - e) * (c - e) / e;
    CHECK(chi2 < 22.46);  // 0.999 quantile, 6 degrees of freedom
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0);
        REQUIRE(u < 1);
        sum += u;
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.005);
    CHECK(s.below(1) == 0);
}
