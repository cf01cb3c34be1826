#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

namespace kcsp {

inline constexpr int report_schema_version = 1;

/// One named check inside a report: an observed number against a bound.
struct CheckLine {
    std::string name;
    bool pass = true;
    double observed = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
    bool gating = true;  // false: recorded as a finding, does not affect the report verdict
};

/// A grid point where a check failed.
struct Violation {
    std::string check;
    std::vector<double> at;
    double value = 0;
};

struct VerificationReport {
    std::string id;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json range = nlohmann::json::object();
    int grid = 0;
    double max_observed = -std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::quiet_NaN();
    std::vector<CheckLine> checks;
    std::vector<Violation> violations;
    std::size_t violation_count = 0;
    nlohmann::json extra = nlohmann::json::object();
    bool pass = true;

    static constexpr std::size_t max_listed = 200;

    CheckLine& check(std::string name, bool ok, double observed, double bound, std::string detail = {}) {
        checks.push_back({std::move(name), ok, observed, bound, std::move(detail)});
        if (!ok) pass = false;
        return checks.back();
    }

    /// A non-gating check: shows up in the report with its own pass flag only.
    CheckLine& note(std::string name, bool ok, double observed, double bound, std::string detail = {}) {
        checks.push_back({std::move(name), ok, observed, bound, std::move(detail), false});
        return checks.back();
    }

    void violate(const std::string& name, std::vector<double> at, double value) {
        ++violation_count;
        pass = false;
        if (violations.size() < max_listed) violations.push_back({name, std::move(at), value});
    }

    void observe(double v) { max_observed = std::max(max_observed, v); }

    const CheckLine* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }

    /// Fold another report in as a sub-report (checks are prefixed by its id).
    void absorb(const VerificationReport& o) {
        for (auto c : o.checks) {
            c.name = o.id + "." + c.name;
            checks.push_back(std::move(c));
        }
        for (auto v : o.violations) {
            v.check = o.id + "." + v.check;
            if (violations.size() < max_listed) violations.push_back(std::move(v));
        }
        violation_count += o.violation_count;
        max_observed = std::max(max_observed, o.max_observed);
        if (!o.pass) pass = false;
        extra[o.id] = o.to_json();
    }

    nlohmann::json to_json() const {
        auto num = [](double v) -> nlohmann::json {
            if (std::isfinite(v)) return v;
            return nullptr;
        };
        nlohmann::json j;
        j["schema_version"] = report_schema_version;
        j["id"] = id;
        j["params"] = params;
        j["range"] = range;
        j["grid"] = grid;
        j["max_observed"] = num(max_observed);
        j["margin"] = num(margin);
        j["pass"] = pass;
        j["checks"] = nlohmann::json::array();
        for (const auto& c : checks)
            j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"observed", num(c.observed)},
                                   {"bound", num(c.bound)}, {"detail", c.detail}, {"gating", c.gating}});
        j["violation_count"] = violation_count;
        j["violations"] = nlohmann::json::array();
        for (const auto& v : violations) {
            nlohmann::json at = nlohmann::json::array();
            for (double x : v.at) at.push_back(num(x));
            j["violations"].push_back({{"check", v.check}, {"at", at}, {"value", num(v.value)}});
        }
        if (!extra.empty()) j["details"] = extra;
        return j;
    }
};

}  // namespace kcsp
