// kcsp: verification, surfaces, exact counts and simulation from the command line.
//
// Exit codes: 0 pass, 1 finding (a check failed, a guard was hit), 2 usage.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kcsp/config.hpp"
#include "kcsp/exact.hpp"
#include "kcsp/genfn.hpp"
#include "kcsp/momed3.hpp"
#include "kcsp/momue.hpp"
#include "kcsp/parallel.hpp"
#include "kcsp/report.hpp"
#include "kcsp/sim.hpp"

namespace {

using json = nlohmann::json;
using namespace kcsp;

constexpr const char* kToolVersion = "1.0.0";

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_num(double v) { return std::isfinite(v) ? num(v) : ""; }

/// Options every subcommand shares.
struct Common {
    std::string format = "json";
    std::string out;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--out", c.out, "Output path (default stdout)");
    sub->add_option("--seed", c.seed, "Seed");
    sub->add_option("--threads", c.threads, "Worker cap (0 = all cores)");
}

/// The effective run configuration; `argv` replays the run exactly.
json make_config(const std::string& sub, const std::vector<std::string>& argv, json params, const Common& c) {
    std::vector<std::string> full = argv;
    full.insert(full.end(), {"--format", c.format, "--seed", std::to_string(c.seed)});
    return {{"tool", "kcsp"},        {"version", kToolVersion}, {"schema_version", report_schema_version},
            {"subcommand", sub},     {"params", std::move(params)}, {"seed", c.seed},
            {"format", c.format},    {"argv", full}};
}

void emit(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw usage_error("cannot open output file " + c.out);
    f << text;
}

std::string json_doc(const json& config, const std::string& key, const json& body) {
    json doc = {{"config", config}, {key, body}};
    return doc.dump(2) + "\n";
}

std::string csv_doc(const json& config, const std::string& table) { return "# config: " + config.dump() + "\n" + table; }

Model parse_model(const std::string& m) {
    if (m == "mod2") return Model::Mod2;
    if (m == "mod3") return Model::Mod3;
    if (m == "ue") return Model::UniqueExt;
    throw usage_error("unknown model " + m);
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
    std::string id;
    std::optional<double> s;
    std::string s_range;  // a:b:count
    int grid = defaults::grid_1d;
    int grid2 = defaults::grid_2d;
    std::optional<int> N;
    double eps = defaults::eps_neighborhood;
    std::optional<int> k;
    std::optional<double> gamma;
    std::vector<int> ns{200, 400, 800, 1600};
    Common c;
};

const std::vector<std::string> kVerifyIds = {"lem1",    "lem1a",   "lem1b",  "lem2",  "lem3",    "lem4",  "lem4a",
                                             "lem4b",   "opt-mod3", "hessian", "laplace", "flagekl", "stgekl", "einmi",
                                             "pukl",    "lagr",    "unopt",  "critical-ue"};

double default_s(const std::string& id) {
    if (id.rfind("lem1", 0) == 0) return 8;
    if (id == "lem2" || id == "lem3") return 7;
    if (id.rfind("lem4", 0) == 0 || id == "opt-mod3") return 15;
    if (id == "flagekl" || id == "einmi" || id == "unopt" || id == "critical-ue") return 7;
    if (id == "stgekl" || id == "pukl") return 6;
    if (id == "lagr") return 5;
    return 0;
}

std::vector<VerificationReport> run_verify(const VerifyArgs& a, json& params) {
    const GridSpec g{a.grid, a.grid2};
    std::vector<double> svals;
    if (!a.s_range.empty()) {
        double s0, s1;
        int cnt;
        char c1, c2;
        std::istringstream is(a.s_range);
        if (!(is >> s0 >> c1 >> s1 >> c2 >> cnt) || c1 != ':' || c2 != ':' || cnt < 1)
            throw usage_error("--s-range expects a:b:count");
        for (int i = 0; i < cnt; ++i) svals.push_back(cnt == 1 ? s0 : s0 + (s1 - s0) * i / (cnt - 1));
    } else {
        svals.push_back(a.s.value_or(default_s(a.id)));
    }
    params = {{"id", a.id}, {"s", svals}, {"grid", a.grid}, {"grid2", a.grid2}, {"eps", a.eps}};
    std::vector<VerificationReport> out;
    const bool lemma3 = a.id.rfind("lem", 0) == 0;
    const bool lemma_ue = a.id == "flagekl" || a.id == "stgekl" || a.id == "einmi" || a.id == "pukl" || a.id == "lagr";
    if (lemma3 || lemma_ue) {
        for (double s : svals) out.push_back(lemma3 ? verify_lemma(a.id, s, g) : verify_lemma_ue(a.id, s, g));
        return out;
    }
    if (a.id == "opt-mod3") {
        const int k = a.k.value_or(20), N = a.N.value_or(200);
        params["k"] = k, params["N"] = N;
        for (double s : svals) out.push_back(verify_theorem_opt(N, ModelParams::from_scale(Model::Mod3, k, s), a.eps));
    } else if (a.id == "unopt" || a.id == "critical-ue") {
        const int k = a.k.value_or(10), N = a.N.value_or(defaults::grid_1d);
        params["k"] = k;
        if (a.id == "unopt") params["N"] = N;
        for (double s : svals) {
            const auto p = ModelParams::from_scale(Model::UniqueExt, k, s);
            out.push_back(a.id == "unopt" ? verify_theorem_unopt(N, p, a.eps) : critical_point_check_ue(p));
        }
    } else if (a.id == "hessian" || a.id == "laplace") {
        std::vector<std::pair<int, double>> kg;
        if (a.k || a.gamma) kg.push_back({a.k.value_or(15), a.gamma.value_or(0.9)});
        else if (a.id == "hessian") kg = {{15, 0.9}, {20, 0.5}};
        else kg = {{15, 0.9}};
        params.erase("s");
        params["k_gamma"] = json::array();
        for (auto [k, gm] : kg) {
            params["k_gamma"].push_back({k, gm});
            const auto p = ModelParams::make(Model::Mod3, k, gm);
            if (a.id == "hessian") {
                out.push_back(verify_hessian(p));
            } else {
                params["ns"] = a.ns;
                params["eps"] = defaults::laplace_eps;
                out.push_back(laplace_sum_check(p, a.ns));
            }
        }
    } else {
        throw usage_error("unknown verify id " + a.id);
    }
    return out;
}

std::string verify_csv(const std::vector<VerificationReport>& rs) {
    std::string t = "id,s,check,pass,gating,observed,bound,detail\n";
    for (const auto& r : rs) {
        const double s = r.params.contains("s") && r.params["s"].is_number() ? r.params["s"].get<double>() : NAN;
        for (const auto& c : r.checks)
            t += csv_field(r.id) + "," + csv_num(s) + "," + csv_field(c.name) + "," + (c.pass ? "1" : "0") + "," +
                 (c.gating ? "1" : "0") + "," + csv_num(c.observed) + "," + csv_num(c.bound) + "," + csv_field(c.detail) +
                 "\n";
    }
    return t;
}

int cmd_verify(const VerifyArgs& a) {
    json params;
    const auto reports = run_verify(a, params);
    std::vector<std::string> argv = {"verify", a.id, "--grid", std::to_string(a.grid), "--grid2", std::to_string(a.grid2),
                                     "--eps", num(a.eps)};
    if (!a.s_range.empty()) argv.insert(argv.end(), {"--s-range", a.s_range});
    else argv.insert(argv.end(), {"--s", num(a.s.value_or(default_s(a.id)))});
    if (a.N) argv.insert(argv.end(), {"--N", std::to_string(*a.N)});
    if (a.k) argv.insert(argv.end(), {"--k", std::to_string(*a.k)});
    if (a.gamma) argv.insert(argv.end(), {"--gamma", num(*a.gamma)});
    if (a.id == "laplace") {
        argv.push_back("--ns");
        for (int n : a.ns) argv.push_back(std::to_string(n));
    }
    const json cfg = make_config("verify", argv, params, a.c);
    bool pass = true;
    for (const auto& r : reports) pass = pass && r.pass;
    if (a.c.format == "csv") {
        emit(a.c, csv_doc(cfg, verify_csv(reports)));
    } else {
        json body = json::array();
        for (const auto& r : reports) body.push_back(r.to_json());
        json doc = {{"config", cfg}, {"pass", pass}, {"reports", body}};
        emit(a.c, doc.dump(2) + "\n");
    }
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// surface

struct SurfaceArgs {
    std::string which;
    std::vector<double> s{3, 14};
    int resolution = defaults::grid_2d;
    Common c;
};

int cmd_surface(const SurfaceArgs& a) {
    const bool f3 = a.which == "fig3";
    std::string table = std::string("figure,s,") + (f3 ? "b" : "a") + ",c,opt\n";
    json rows = json::array();
    for (double s : a.s) {
        const auto pts = a.which == "fig1" ? surface_fig1(s, a.resolution)
                         : a.which == "fig2" ? surface_fig2(s, a.resolution)
                                             : surface_fig3(s, a.resolution);
        for (const auto& p : pts) {
            if (a.c.format == "csv") table += a.which + "," + num(p.s) + "," + num(p.p1) + "," + num(p.p2) + "," + num(p.value) + "\n";
            else rows.push_back({p.s, p.p1, p.p2, p.value});
        }
    }
    std::vector<std::string> argv = {"surface", a.which, "--resolution", std::to_string(a.resolution), "--s"};
    for (double s : a.s) argv.push_back(num(s));
    const json cfg = make_config("surface", argv, {{"which", a.which}, {"s", a.s}, {"resolution", a.resolution}}, a.c);
    if (a.c.format == "csv") emit(a.c, csv_doc(cfg, table));
    else emit(a.c, json_doc(cfg, "surface", {{"columns", {"s", f3 ? "b" : "a", "c", "opt"}}, {"rows", rows}}));
    return 0;
}

// ---------------------------------------------------------------------------
// exact

struct ExactArgs {
    std::string quantity;
    int m = 0, n = 0, k = 3, d = 3;
    std::array<int, 3> l{}, w{};
    int k1 = 0, k2 = 0;
    Common c;
};

std::string q_str(const mpq_class& q) { return q.get_str(); }

int cmd_exact(const ExactArgs& a) {
    json v;
    json params = {{"quantity", a.quantity}};
    std::vector<std::string> argv = {"exact", a.quantity};
    auto arg = [&](const std::string& name, int val) {
        params[name] = val;
        argv.insert(argv.end(), {"--" + name, std::to_string(val)});
    };
    const std::string& qn = a.quantity;
    if (qn == "M") {
        arg("m", a.m), arg("n", a.n);
        const auto r = exact_M(a.m, a.n);
        v = {{"value", r.value.get_str()}, {"provenance", provenance_name(r.provenance)}, {"log_value", log_mpz(r.value)}};
    } else if (qn == "K") {
        arg("k", a.k), arg("m", a.m), arg("l0", a.l[0]), arg("l1", a.l[1]), arg("l2", a.l[2]);
        const auto r = exact_K_mod3(a.l, a.k, a.m);
        v = {{"value", r.value.get_str()}, {"provenance", provenance_name(r.provenance)}};
    } else if (qn == "N") {
        arg("k", a.k), arg("m", a.m), arg("n", a.n);
        arg("w0", a.w[0]), arg("w1", a.w[1]), arg("w2", a.w[2]), arg("l0", a.l[0]), arg("l1", a.l[1]), arg("l2", a.l[2]);
        const SlotVector sv{a.l, a.w, a.n, a.m, a.k};
        const auto r = exact_N_mod3(sv);
        v = {{"value", r.value.get_str()}, {"provenance", provenance_name(r.provenance)}};
    } else if (qn == "EX2") {
        arg("n", a.n), arg("k", a.k), arg("m", a.m);
        const mpq_class ex2 = exact_EX2_mod3(a.n, a.k, a.m);
        mpq_class ex(ipow(3, static_cast<unsigned long>(std::max(a.n - a.m, 0))), ipow(3, static_cast<unsigned long>(std::max(a.m - a.n, 0))));
        ex.canonicalize();
        mpq_class ratio = ex2 / (ex * ex);
        ratio.canonicalize();
        v = {{"EX2", q_str(ex2)}, {"EX", q_str(ex)}, {"ratio", q_str(ratio)}, {"ratio_value", ratio.get_d()}};
    } else if (qn == "EX2-enum") {
        arg("n", a.n), arg("k", a.k), arg("m", a.m);
        const auto e = enumerate_EX2_mod3(a.n, a.k, a.m);
        v = {{"formulas", e.formulas.get_str()}, {"EX2", q_str(e.EX2)}, {"EX", q_str(e.EX)},
             {"buckets", e.buckets.size()},      {"mismatches", e.mismatches.size()}};
    } else if (qn == "p-coeffs") {
        arg("k", a.k), arg("d", a.d);
        json arr = json::array();
        for (const auto& c : p_coefficients(a.k, a.d)) arr.push_back(q_str(c));
        v = {{"coefficients", arr}};
    } else if (qn == "r-coeff") {
        arg("k1", a.k1), arg("k2", a.k2), arg("k", a.k);
        v = {{"value", r_coeff(a.k1, a.k2, a.k).get_str()}};
    } else if (qn == "ue-family") {
        arg("d", a.d), arg("k", a.k);
        const auto fam = enumerate_ue_constraints(a.d, a.k);
        json p = json::array();
        for (const auto& x : fam.p_empirical) p.push_back(q_str(x));
        v = {{"size", fam.tables.size()}, {"p_empirical", p}, {"matches_closed_form", fam.matches_closed_form}};
    } else if (qn == "ue-pair") {
        arg("n", a.n), arg("k", a.k), arg("m", a.m), arg("d", a.d);
        const mpq_class r = exact_ue_pair_ratio(a.n, a.k, a.m, a.d);
        v = {{"value", q_str(r)}, {"value_double", r.get_d()}};
    } else {
        throw usage_error("unknown exact quantity " + qn);
    }
    const json cfg = make_config("exact", argv, params, a.c);
    if (a.c.format == "csv") {
        std::string t = "quantity,field,value\n";
        for (auto it = v.begin(); it != v.end(); ++it)
            t += csv_field(qn) + "," + csv_field(it.key()) + "," + csv_field(it->is_string() ? it->get<std::string>() : it->dump()) + "\n";
        emit(a.c, csv_doc(cfg, t));
    } else {
        emit(a.c, json_doc(cfg, "result", v));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimArgs {
    std::string mode;
    std::string model = "mod2";
    int k = 3, d = 0, n = 100000;
    double gamma = 0.85;
    std::uint64_t trial = 0;
    std::size_t trials = defaults::threshold_trials;
    double lo = 0.88, hi = 0.96;
    int max_points = defaults::threshold_max_points;
    double tol = defaults::threshold_gamma_tol;
    bool poisson_m = false;
    bool witness = false;
    long budget_ms = 0;
    std::string log;
    Common c;
};

int cmd_simulate(const SimArgs& a) {
    SimParams p = SimParams::of(parse_model(a.model), a.k, a.gamma, a.d);
    p.poisson_m = a.poisson_m;
    std::vector<std::string> argv = {"simulate", a.mode,  "--model", a.model, "--k", std::to_string(a.k), "--d",
                                     std::to_string(p.d), "--n", std::to_string(a.n)};
    if (a.poisson_m) argv.push_back("--poisson-m");
    json params = {{"mode", a.mode}, {"model", a.model}, {"k", a.k}, {"d", p.d}, {"n", a.n}, {"poisson_m", a.poisson_m}};
    std::optional<std::chrono::milliseconds> budget;
    if (a.budget_ms > 0) budget = std::chrono::milliseconds(a.budget_ms);

    if (a.mode == "core" || a.mode == "solve") {
        argv.insert(argv.end(), {"--gamma", num(a.gamma), "--trial", std::to_string(a.trial)});
        params["gamma"] = a.gamma, params["trial"] = a.trial;
        const Formula f = generate(p, a.n, a.c.seed, a.trial);
        json v = {{"n", f.n}, {"m", f.m()}};
        if (a.mode == "core") {
            const auto rep = peel_2core(f);
            v["n_core"] = rep.n_core, v["m_core"] = rep.m_core, v["density"] = rep.density, v["rounds"] = rep.rounds;
            v["core_fraction"] = static_cast<double>(rep.n_core) / a.n;
            v["clause_core_fraction"] = static_cast<double>(rep.m_core) / a.n;
            if (a.k >= 3) {
                const auto pr = predict_core(a.k, a.gamma);
                v["predicted"] = {{"x", pr.x}, {"nu", pr.nu}, {"mu", pr.mu}, {"density", pr.density}};
            }
        } else {
            if (a.witness) argv.push_back("--witness");
            if (a.budget_ms > 0) argv.insert(argv.end(), {"--budget-ms", std::to_string(a.budget_ms)});
            std::vector<std::uint8_t> wit;
            if (p.model == Model::UniqueExt) {
                UEOptions o;
                if (budget) o.deadline = Clock::now() + *budget;
                const auto r = solve_ue(f, o);
                v["sat"] = r.sat, v["core_n"] = r.core_n, v["core_m"] = r.core_m, v["decisions"] = r.decisions,
                v["propagations"] = r.propagations;
                wit = r.witness;
            } else {
                LinearOptions o;
                if (budget) o.deadline = Clock::now() + *budget;
                const auto r = solve_linear(f, static_cast<unsigned>(p.d), o);
                v["sat"] = r.sat, v["core_n"] = r.core_n, v["core_m"] = r.core_m, v["dense_rows"] = r.dense_rows,
                v["dense_cols"] = r.dense_cols, v["dense_rank"] = r.rank;
                wit = r.witness;
            }
            if (a.witness && !wit.empty()) {
                std::string sw(wit.size(), '0');
                for (std::size_t i = 0; i < wit.size(); ++i) sw[i] = static_cast<char>('0' + wit[i]);
                v["witness"] = sw;
            }
        }
        const json cfg = make_config("simulate", argv, params, a.c);
        if (a.c.format == "csv") {
            std::string head, row;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (it->is_object()) continue;
                head += (head.empty() ? "" : ",") + it.key();
                row += (row.empty() ? "" : ",") + csv_field(it->is_string() ? it->get<std::string>() : it->dump());
            }
            emit(a.c, csv_doc(cfg, head + "\n" + row + "\n"));
        } else {
            emit(a.c, json_doc(cfg, a.mode == "core" ? "core" : "solve", v));
        }
        return 0;
    }
    if (a.mode != "threshold") throw usage_error("simulate mode must be threshold, core or solve");
    ThresholdOptions o;
    o.n = a.n, o.trials = a.trials, o.gamma_low = a.lo, o.gamma_high = a.hi, o.seed = a.c.seed;
    o.max_points = a.max_points, o.gamma_tol = a.tol, o.solve_budget = budget;
    argv.insert(argv.end(), {"--trials", std::to_string(a.trials), "--lo", num(a.lo), "--hi", num(a.hi), "--max-points",
                             std::to_string(a.max_points), "--tol", num(a.tol)});
    if (a.budget_ms > 0) argv.insert(argv.end(), {"--budget-ms", std::to_string(a.budget_ms)});
    params.update({{"trials", a.trials}, {"lo", a.lo}, {"hi", a.hi}, {"max_points", a.max_points}, {"tol", a.tol}});
    const auto est = estimate_threshold(p, o);
    if (!a.log.empty()) {
        std::ofstream lf(a.log, std::ios::binary);
        if (!lf) throw usage_error("cannot open log file " + a.log);
        lf << est.log_jsonl();
    }
    const json cfg = make_config("simulate", argv, params, a.c);
    if (a.c.format == "csv") {
        emit(a.c, csv_doc(cfg, est.sweep_csv()));
    } else {
        json body = est.to_json();
        if (a.k >= 3) body["analytic_T"] = analytic_T(a.k);
        emit(a.c, json_doc(cfg, "threshold", body));
    }
    return 0;
}

// ---------------------------------------------------------------------------

int run(std::vector<std::string> args);

/// Re-run from the config embedded in an earlier output.
int cmd_replay(const std::string& path, const std::string& out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw usage_error("cannot open " + path);
    std::string first;
    std::getline(f, first);
    json cfg;
    const std::string tag = "# config: ";
    if (first.rfind(tag, 0) == 0) {
        cfg = json::parse(first.substr(tag.size()));
    } else {
        std::stringstream ss;
        ss << first << "\n" << f.rdbuf();
        cfg = json::parse(ss.str()).at("config");
    }
    auto argv = cfg.at("argv").get<std::vector<std::string>>();
    if (!out.empty()) argv.insert(argv.end(), {"--out", out});
    return run(argv);
}

int run(std::vector<std::string> args) {
    CLI::App app{"k-CSP second-moment verification and random-system simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    VerifyArgs va;
    auto* v = app.add_subcommand("verify", "Check a lemma or theorem on a grid");
    v->add_option("id", va.id, "Lemma or theorem id")->required()->check(CLI::IsMember(kVerifyIds));
    v->add_option("--s", va.s, "Scale parameter s");
    v->add_option("--s-range", va.s_range, "Sweep s as a:b:count");
    v->add_option("--grid", va.grid, "1-D grid size");
    v->add_option("--grid2", va.grid2, "2-D grid size per axis");
    v->add_option("--N", va.N, "Theorem sweep grid");
    v->add_option("--eps", va.eps, "Excluded neighbourhood of the symmetric point");
    v->add_option("--k", va.k, "Arity k");
    v->add_option("--gamma", va.gamma, "Clause density gamma");
    v->add_option("--ns", va.ns, "Lattice sizes for laplace");
    add_common(v, va.c);

    SurfaceArgs sa;
    auto* s = app.add_subcommand("surface", "Emit an OPT surface grid");
    s->add_option("which", sa.which, "fig1, fig2 or fig3")->required()->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
    s->add_option("--s", sa.s, "Scale values");
    s->add_option("--resolution", sa.resolution, "Points per axis")->check(CLI::Range(2, 1 << 14));
    add_common(s, sa.c);

    ExactArgs ea;
    auto* e = app.add_subcommand("exact", "Exact counts in arbitrary precision");
    e->add_option("quantity", ea.quantity, "M, K, N, EX2, EX2-enum, p-coeffs, r-coeff, ue-family, ue-pair")
        ->required()
        ->check(CLI::IsMember({"M", "K", "N", "EX2", "EX2-enum", "p-coeffs", "r-coeff", "ue-family", "ue-pair"}));
    e->add_option("--m", ea.m);
    e->add_option("--n", ea.n);
    e->add_option("--k", ea.k);
    e->add_option("--d", ea.d);
    e->add_option("--l0", ea.l[0]);
    e->add_option("--l1", ea.l[1]);
    e->add_option("--l2", ea.l[2]);
    e->add_option("--w0", ea.w[0]);
    e->add_option("--w1", ea.w[1]);
    e->add_option("--w2", ea.w[2]);
    e->add_option("--k1", ea.k1);
    e->add_option("--k2", ea.k2);
    add_common(e, ea.c);

    SimArgs ma;
    auto* m = app.add_subcommand("simulate", "Random systems: threshold search, 2-core, single solve");
    m->add_option("mode", ma.mode, "threshold, core or solve")->required()->check(CLI::IsMember({"threshold", "core", "solve"}));
    m->add_option("--model", ma.model, "mod2, mod3 or ue")->check(CLI::IsMember({"mod2", "mod3", "ue"}));
    m->add_option("--k", ma.k, "Arity")->check(CLI::Range(2, 32));
    m->add_option("--d", ma.d, "Domain size (UE only; default from model)");
    m->add_option("--n", ma.n, "Variables")->check(CLI::PositiveNumber);
    m->add_option("--gamma", ma.gamma, "Clauses per variable (core, solve)");
    m->add_option("--trial", ma.trial, "Trial index (core, solve)");
    m->add_option("--trials", ma.trials, "Trials per point (threshold)");
    m->add_option("--lo", ma.lo, "Lower gamma of the bracket");
    m->add_option("--hi", ma.hi, "Upper gamma of the bracket");
    m->add_option("--max-points", ma.max_points, "Most gamma values to evaluate");
    m->add_option("--tol", ma.tol, "Stop when decisive points are this close");
    m->add_flag("--poisson-m", ma.poisson_m, "Draw m ~ Poisson(gamma n)");
    m->add_flag("--witness", ma.witness, "Include the satisfying assignment (solve)");
    m->add_option("--budget-ms", ma.budget_ms, "Wall-clock cap per solve");
    m->add_option("--log", ma.log, "JSON-lines trial log (threshold)");
    add_common(m, ma.c);

    std::string replay_path, replay_out;
    auto* r = app.add_subcommand("replay", "Re-run the configuration embedded in an output file");
    r->add_option("file", replay_path)->required();
    r->add_option("--out", replay_out);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }
    auto cap = [](const Common& c) { thread_cap.store(c.threads); };
    if (*v) return cap(va.c), cmd_verify(va);
    if (*s) return cap(sa.c), cmd_surface(sa);
    if (*e) return cap(ea.c), cmd_exact(ea);
    if (*m) return cap(ma.c), cmd_simulate(ma);
    if (*r) return cmd_replay(replay_path, replay_out);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(args);
    } catch (const usage_error& e) {
        std::cerr << "usage: " << e.what() << "\n";
        return 2;
    } catch (const kcsp::bracket_error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const kcsp::domain_error& e) {
        std::cerr << "usage: " << e.what() << "\n";
        return 2;
    } catch (const kcsp::size_guard& e) {
        std::cerr << "size guard: " << e.what() << "\n";
        return 1;
    } catch (const kcsp::deadline_exceeded& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
