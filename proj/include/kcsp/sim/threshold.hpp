#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kcsp/config.hpp"
#include "kcsp/errors.hpp"
#include "kcsp/parallel.hpp"
#include "kcsp/sim/core.hpp"
#include "kcsp/sim/formula.hpp"
#include "kcsp/sim/linear.hpp"
#include "kcsp/sim/ue.hpp"

namespace kcsp {

struct TrialRecord {
    std::uint64_t trial = 0;
    double gamma = 0;
    int n = 0;
    std::uint64_t seed = 0;
    bool sat = false;
    std::size_t core_n = 0, core_m = 0;
    double wall_ms = 0;

    nlohmann::json to_json() const {
        return {{"trial", trial}, {"gamma", gamma}, {"n", n},       {"seed", seed},
                {"sat", sat},     {"core_n", core_n}, {"core_m", core_m}, {"wall_ms", wall_ms}};
    }
};

/// Wilson score interval for k successes in n trials.
struct Wilson {
    double p = 0, low = 0, high = 1;
};

inline Wilson wilson(std::size_t k, std::size_t n, double z = defaults::wilson_z) {
    if (n == 0) return {};
    const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn, z2 = z * z;
    const double denom = 1 + z2 / nn;
    const double centre = (p + z2 / (2 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
    return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct PointResult {
    double gamma = 0;
    std::size_t trials = 0, sat = 0;
    Wilson ci;
    bool sat_side() const { return ci.low > 0.5; }
    bool unsat_side() const { return ci.high < 0.5; }
};

struct ThresholdEstimate {
    Model model = Model::Mod2;
    int k = 3, d = 2, n = 0;
    std::uint64_t seed = 0;
    std::size_t trials_per_point = 0;
    double gamma_hat = 0, ci_low = 0, ci_high = 0;
    std::vector<PointResult> points;  // in evaluation order
    std::vector<TrialRecord> log;

    nlohmann::json to_json() const {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : points)
            pts.push_back({{"gamma", p.gamma}, {"trials", p.trials}, {"sat", p.sat}, {"p_sat", p.ci.p},
                           {"ci_low", p.ci.low}, {"ci_high", p.ci.high}});
        return {{"model", model_name(model)}, {"k", k}, {"d", d}, {"n", n}, {"seed", seed},
                {"trials_per_point", trials_per_point}, {"gamma_hat", gamma_hat}, {"ci_low", ci_low},
                {"ci_high", ci_high}, {"points", pts}};
    }

    /// Sweep table sorted by gamma: gamma, p_sat, ci_low, ci_high, trials.
    std::string sweep_csv() const {
        auto pts = points;
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.gamma < b.gamma; });
        std::ostringstream os;
        os.precision(17);
        os << "gamma,p_sat,ci_low,ci_high,trials\n";
        for (const auto& p : pts) os << p.gamma << ',' << p.ci.p << ',' << p.ci.low << ',' << p.ci.high << ',' << p.trials << '\n';
        return os.str();
    }

    std::string log_jsonl() const {
        std::string out;
        for (const auto& r : log) out += r.to_json().dump() + "\n";
        return out;
    }
};

/// The endpoints of a bracket did not separate the two regimes.
struct bracket_error : domain_error {
    double p_low, p_high;
    bracket_error(const std::string& what, double pl, double ph) : domain_error(what), p_low(pl), p_high(ph) {}
};

struct ThresholdOptions {
    int n = 100000;
    std::size_t trials = defaults::threshold_trials;
    double gamma_low = 0.88, gamma_high = 0.96;
    std::uint64_t seed = 1;
    int max_points = defaults::threshold_max_points;
    double gamma_tol = defaults::threshold_gamma_tol;
    double z = defaults::wilson_z;
    std::optional<std::chrono::milliseconds> solve_budget;  // wall-clock cap per instance
};

/// Seed for the trials at one gamma: distinct gammas never share streams.
inline std::uint64_t point_seed(std::uint64_t seed, double gamma) {
    return splitmix64(seed ^ splitmix64(std::bit_cast<std::uint64_t>(gamma)));
}

/// Generate and decide one instance.
inline TrialRecord run_trial(const SimParams& p, int n, std::uint64_t seed, std::uint64_t trial,
                             std::optional<std::chrono::milliseconds> budget = std::nullopt) {
    const auto t0 = Clock::now();
    std::optional<Clock::time_point> deadline;
    if (budget) deadline = t0 + *budget;
    const Formula f = generate(p, n, point_seed(seed, p.gamma), trial);
    TrialRecord rec;
    rec.trial = trial, rec.gamma = p.gamma, rec.n = n, rec.seed = seed;
    if (p.model == Model::UniqueExt) {
        UEOptions o;
        o.deadline = deadline;
        const auto r = solve_ue(f, o);
        rec.sat = r.sat, rec.core_n = r.core_n, rec.core_m = r.core_m;
    } else {
        LinearOptions o;
        o.deadline = deadline;
        const auto r = solve_linear(f, static_cast<unsigned>(p.d), o);
        rec.sat = r.sat, rec.core_n = r.core_n, rec.core_m = r.core_m;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    return rec;
}

/// Monte Carlo at one gamma. Trials run in parallel; records come back in trial order.
inline PointResult run_point(const SimParams& p, const ThresholdOptions& o, std::vector<TrialRecord>* log = nullptr) {
    std::vector<TrialRecord> recs(o.trials);
    parallel_for(o.trials, [&](std::size_t t) {
        recs[t] = run_trial(p, o.n, o.seed, t, o.solve_budget);
    });
    PointResult pr;
    pr.gamma = p.gamma;
    pr.trials = o.trials;
    for (const auto& r : recs) pr.sat += r.sat;
    pr.ci = wilson(pr.sat, pr.trials, o.z);
    if (log) log->insert(log->end(), recs.begin(), recs.end());
    return pr;
}

/// Locate Pr[SAT] = 1/2 in gamma. Both endpoints must be decisive (Wilson interval
/// entirely above, resp. below, 1/2). Probes then bisect the widest gap between the
/// innermost decisive points and any undecided points between them. The interval
/// reported is [largest decisive-SAT gamma, smallest decisive-UNSAT gamma]; gamma_hat
/// interpolates the 1/2 crossing inside it.
inline ThresholdEstimate estimate_threshold(SimParams tmpl, const ThresholdOptions& o) {
    tmpl.validate();
    if (o.trials < static_cast<std::size_t>(defaults::threshold_min_trials))
        throw domain_error("estimate_threshold: need at least 50 trials per point");
    if (!(o.gamma_low < o.gamma_high)) throw domain_error("estimate_threshold: need gamma_low < gamma_high");
    ThresholdEstimate est;
    est.model = tmpl.model, est.k = tmpl.k, est.d = tmpl.d, est.n = o.n, est.seed = o.seed;
    est.trials_per_point = o.trials;
    auto eval = [&](double g) {
        SimParams p = tmpl;
        p.gamma = g;
        est.points.push_back(run_point(p, o, &est.log));
        return est.points.back();
    };
    const PointResult a = eval(o.gamma_low), b = eval(o.gamma_high);
    if (!a.sat_side() || !b.unsat_side()) {
        std::ostringstream os;
        os << "estimate_threshold: bracket does not straddle the transition: Pr[SAT](" << o.gamma_low << ") = " << a.ci.p
           << " [" << a.ci.low << ", " << a.ci.high << "], Pr[SAT](" << o.gamma_high << ") = " << b.ci.p << " ["
           << b.ci.low << ", " << b.ci.high << "]";
        throw bracket_error(os.str(), a.ci.p, b.ci.p);
    }
    auto bounds = [&] {
        double lo = o.gamma_low, hi = o.gamma_high;
        for (const auto& p : est.points) {
            if (p.sat_side()) lo = std::max(lo, p.gamma);
        }
        for (const auto& p : est.points)
            if (p.unsat_side() && p.gamma > lo) hi = std::min(hi, p.gamma);
        return std::pair{lo, hi};
    };
    while (static_cast<int>(est.points.size()) < o.max_points) {
        const auto [lo, hi] = bounds();
        std::vector<double> undecided;
        for (const auto& p : est.points)
            if (!p.sat_side() && !p.unsat_side() && p.gamma > lo && p.gamma < hi) undecided.push_back(p.gamma);
        std::sort(undecided.begin(), undecided.end());
        double a0 = lo, a1 = hi;
        if (!undecided.empty()) {
            const double left = undecided.front() - lo, right = hi - undecided.back();
            if (left >= right) a1 = undecided.front();
            else a0 = undecided.back();
        }
        if (a1 - a0 <= o.gamma_tol) break;
        eval(0.5 * (a0 + a1));
    }
    const auto [lo, hi] = bounds();
    est.ci_low = lo, est.ci_high = hi;

    std::vector<PointResult> inside;
    for (const auto& p : est.points)
        if (p.gamma >= lo && p.gamma <= hi) inside.push_back(p);
    std::sort(inside.begin(), inside.end(), [](const auto& x, const auto& y) { return x.gamma < y.gamma; });
    est.gamma_hat = 0.5 * (lo + hi);
    for (std::size_t i = 0; i + 1 < inside.size(); ++i) {
        const auto &x = inside[i], &y = inside[i + 1];
        if (x.ci.p >= 0.5 && y.ci.p < 0.5) {
            const double t = (x.ci.p - 0.5) / (x.ci.p - y.ci.p);
            est.gamma_hat = std::clamp(x.gamma + t * (y.gamma - x.gamma), lo, hi);
            break;
        }
    }
    return est;
}

}  // namespace kcsp
