#pragma once

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aux_fields.hpp"
#include "monitor.hpp"
#include "solver.hpp"

namespace bllab {

// ---- configuration -------------------------------------------------------------

struct RunConfig {
    int nx = 64;
    double lx = 6.283185307179586;
    int ny = 65;
    double ymax = 8.0;
    double theta_e = 1.0;
    double nu = 1e-2;
    double epsilon = 1e-3;
    double amplitude = 1e-3;
    double delta = 0.1;
    double gamma = 2.0;
    double s = 2.6;
    double splus_offset = 0.01;
    double dt = 0;        // 0 -> use the advective limit once at t=0
    double dt_max = 1e-3;
    double t_end = 0.01;
    bool linear_mode = false;
    double eta = 0;       // 0 -> theta_e / 16
    double zeta = 0;      // 0 -> 2 epsilon
    double k_coupling = 0; // 0 -> explicit formula at t=0
    double c_cal = 1.0;   // calibrated stand-in constant
    double spectral_tail = 0;
    std::string out_dir = "out";
    int snapshot_every = 10;
    std::string resume_from;
    unsigned seed = 0;
};

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for key '" + key + "': " + v);
}

inline RunConfig parse_config(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, v] : kv) {
        try {
            if (key == "nx") c.nx = std::stoi(v);
            else if (key == "lx") c.lx = std::stod(v);
            else if (key == "ny") c.ny = std::stoi(v);
            else if (key == "ymax") c.ymax = std::stod(v);
            else if (key == "theta_e") c.theta_e = std::stod(v);
            else if (key == "nu") c.nu = std::stod(v);
            else if (key == "epsilon") c.epsilon = std::stod(v);
            else if (key == "amplitude") c.amplitude = std::stod(v);
            else if (key == "delta") c.delta = std::stod(v);
            else if (key == "gamma") c.gamma = std::stod(v);
            else if (key == "s") c.s = std::stod(v);
            else if (key == "splus_offset") c.splus_offset = std::stod(v);
            else if (key == "dt") c.dt = std::stod(v);
            else if (key == "dt_max") c.dt_max = std::stod(v);
            else if (key == "t_end") c.t_end = std::stod(v);
            else if (key == "linear_mode") c.linear_mode = parse_bool(v, key);
            else if (key == "eta") c.eta = std::stod(v);
            else if (key == "zeta") c.zeta = std::stod(v);
            else if (key == "k_coupling") c.k_coupling = std::stod(v);
            else if (key == "c_cal") c.c_cal = std::stod(v);
            else if (key == "spectral_tail") c.spectral_tail = std::stod(v);
            else if (key == "out_dir") c.out_dir = v;
            else if (key == "snapshot_every") c.snapshot_every = std::stoi(v);
            else if (key == "resume_from") c.resume_from = v;
            else if (key == "seed") c.seed = (unsigned)std::stoul(v);
            else throw ConfigError("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad value for key '" + key + "': " + v);
        } catch (const std::out_of_range&) {
            throw ConfigError("value out of range for key '" + key + "': " + v);
        }
    }
    if (const char* e = std::getenv("BLLAB_OUT_DIR")) c.out_dir = e;
    if (c.t_end <= 0) throw ConfigError("t_end must be positive");
    if (c.snapshot_every <= 0) throw ConfigError("snapshot_every must be positive");
    if (c.gamma <= 0 || c.delta <= 0) throw ConfigError("delta and gamma must be positive");
    return c;
}

// flat key=value lines, '#' comments, blank lines ignored
inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t\r");
            auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
        kv[key] = val;
    }
    return parse_config(kv);
}

// ---- run bookkeeping -------------------------------------------------------------

struct MuRow {
    double t, mu, mu_dot;
    double group[5];
};

struct DecompRow {
    double t;
    std::string identity, term;
    double value;
};

struct RunResult {
    RunConfig cfg;
    EstimateParams params;
    EnergyLedger ledger;
    std::vector<MuRow> mu_rows;
    std::vector<DecompRow> decomp_rows;
    MuState mu;
    SimState state;
    AuxState aux;
    std::string termination; // t_end | t_star | positivity | nan
    double dt_used = 0;
    long steps = 0;
    double wall_ms = 0;
    double radius_fit_u = 0;
};

namespace detail {

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline nlohmann::json field_to_json(const Field& f) {
    const Grid& g = f.grid();
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) {
            a.push_back(f.at(i, j).real());
            a.push_back(f.at(i, j).imag());
        }
    return a;
}

inline Field field_from_json(const nlohmann::json& a, const Grid& g) {
    Field f(g);
    size_t p = 0;
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) {
            double re = a.at(p++), im = a.at(p++);
            f.at(i, j) = {re, im};
        }
    return f;
}

} // namespace detail

// ---- checkpoints -------------------------------------------------------------------

inline void write_checkpoint(const std::string& path, const RunResult& r, long step) {
    nlohmann::json j;
    j["grid"] = {{"nx", r.state.grid.nx}, {"lx", r.state.grid.lx},
                 {"ny", r.state.grid.ny}, {"ymax", r.state.grid.ymax}};
    j["step"] = step;
    j["dt"] = r.dt_used;
    j["t"] = r.state.t;
    j["mu"] = {{"t", r.mu.t}, {"mu", r.mu.mu}, {"mu_dot", r.mu.mu_dot}};
    if (r.mu.t_star) j["mu"]["t_star"] = *r.mu.t_star;
    j["params"] = {{"eta", r.params.eta}, {"zeta", r.params.zeta}, {"M", r.params.M},
                   {"k", r.params.k},     {"c_cal", r.params.c_cal}};
    j["u"] = detail::field_to_json(r.state.u);
    j["theta"] = detail::field_to_json(r.state.theta);
    j["v"] = detail::field_to_json(r.state.v);
    j["W"] = detail::field_to_json(r.aux.W);
    j["init_norms"] = r.ledger.init_norms;
    nlohmann::json ser = nlohmann::json::object();
    for (const auto& [name, ns] : r.ledger.series) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& s : ns.samples)
            arr.push_back({s.t, s.v, s.mudot, s.linf, s.l2, s.l2mu});
        ser[name] = std::move(arr);
    }
    j["series"] = std::move(ser);
    nlohmann::json mr = nlohmann::json::array();
    for (const auto& m : r.mu_rows)
        mr.push_back({m.t, m.mu, m.mu_dot, m.group[0], m.group[1], m.group[2], m.group[3],
                      m.group[4]});
    j["mu_rows"] = std::move(mr);
    nlohmann::json dr = nlohmann::json::array();
    for (const auto& d : r.decomp_rows) dr.push_back({d.t, d.identity, d.term, d.value});
    j["decomp_rows"] = std::move(dr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    out << j.dump();
}

// restores ledger/mu/fields into r; returns the step index to resume from
inline long load_checkpoint(const std::string& path, const RunConfig& cfg, RunResult& r) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    Grid g{j["grid"]["nx"], j["grid"]["lx"], j["grid"]["ny"], j["grid"]["ymax"]};
    Grid want{cfg.nx, cfg.lx, cfg.ny, cfg.ymax};
    if (g != want) throw ConfigError("checkpoint grid does not match the configured grid");
    if (j["mu"].contains("t_star"))
        throw PastTStarError("refusing to resume a run that already reached T*");
    r.state.grid = g;
    r.state.t = j["t"];
    r.state.mu = j["mu"]["mu"];
    r.state.u = detail::field_from_json(j["u"], g);
    r.state.theta = detail::field_from_json(j["theta"], g);
    r.state.v = detail::field_from_json(j["v"], g);
    r.aux = AuxState(g);
    r.aux.W = detail::field_from_json(j["W"], g);
    r.aux.U = dy(r.aux.W);
    r.aux.lambda = compute_lambda(r.state.u, dy(r.state.u), r.aux.W);
    r.aux.varphi = compute_varphi(r.state.theta, dy(r.state.theta), r.aux.W);
    r.mu.t = j["mu"]["t"];
    r.mu.mu = j["mu"]["mu"];
    r.mu.mu_dot = j["mu"]["mu_dot"];
    r.params.eta = j["params"]["eta"];
    r.params.zeta = j["params"]["zeta"];
    r.params.M = j["params"]["M"];
    r.params.k = j["params"]["k"];
    r.params.c_cal = j["params"]["c_cal"];
    r.dt_used = j["dt"];
    r.ledger.init_norms = j["init_norms"].get<std::map<std::string, double>>();
    // keep only rows strictly before the resume time: the loop re-records the
    // sample at t exactly as the original run did, so a final checkpoint does
    // not leave a duplicate behind
    double tcut = r.state.t;
    for (auto it = j["series"].begin(); it != j["series"].end(); ++it) {
        NormSeries ns;
        for (const auto& a : it.value()) {
            LedgerSample s;
            s.t = a[0];
            s.v = a[1];
            s.mudot = a[2];
            s.linf = a[3];
            s.l2 = a[4];
            s.l2mu = a[5];
            if (s.t < tcut - 1e-15) ns.samples.push_back(s);
        }
        r.ledger.series[it.key()] = std::move(ns);
    }
    for (const auto& a : j["mu_rows"]) {
        MuRow m{a[0], a[1], a[2], {a[3], a[4], a[5], a[6], a[7]}};
        if (m.t < tcut - 1e-15) r.mu_rows.push_back(m);
    }
    for (const auto& a : j["decomp_rows"]) {
        DecompRow d{a[0], a[1], a[2], a[3]};
        if (d.t < tcut - 1e-15) r.decomp_rows.push_back(d);
    }
    return j["step"];
}

// ---- output files ------------------------------------------------------------------

inline void write_outputs(const RunResult& r) {
    namespace fs = std::filesystem;
    const std::string& dir = r.cfg.out_dir;
    fs::create_directories(dir);

    {
        std::ofstream out(dir + "/norms.csv");
        out << "t,field,s,k,weighted,value\n";
        for (const auto& [name, ns] : r.ledger.series) {
            // name format: field@s=...,k=...
            auto at = name.find("@s=");
            if (at == std::string::npos) {
                for (const auto& smp : ns.samples)
                    out << detail::fmt_g17(smp.t) << ',' << name << ",0,0,1,"
                        << detail::fmt_g17(smp.v) << '\n';
                continue;
            }
            std::string field = name.substr(0, at);
            auto comma = name.find(",k=", at);
            std::string sval = name.substr(at + 3, comma - at - 3);
            std::string kval = name.substr(comma + 3);
            for (const auto& smp : ns.samples)
                out << detail::fmt_g17(smp.t) << ',' << field << ',' << sval << ',' << kval
                    << ",1," << detail::fmt_g17(smp.v) << '\n';
        }
    }
    {
        std::ofstream out(dir + "/mu.csv");
        out << "t,mu,mu_dot,g1,g2,g3,g4,g5\n";
        for (const auto& m : r.mu_rows) {
            out << detail::fmt_g17(m.t) << ',' << detail::fmt_g17(m.mu) << ','
                << detail::fmt_g17(m.mu_dot);
            for (double g : m.group) out << ',' << detail::fmt_g17(g);
            out << '\n';
        }
    }
    {
        std::ofstream out(dir + "/decomp.csv");
        out << "t,identity,term,value\n";
        for (const auto& d : r.decomp_rows)
            out << detail::fmt_g17(d.t) << ',' << d.identity << ',' << d.term << ','
                << detail::fmt_g17(d.value) << '\n';
    }
    {
        nlohmann::json j;
        for (const char* tag : kInequalities) {
            auto pts = proposition_slack(r.ledger, tag, r.params);
            nlohmann::json arr = nlohmann::json::array();
            bool all_pass = true, all_trivial = true;
            double max_cmin = 0;
            for (const auto& p : pts) {
                arr.push_back({{"t", p.t}, {"lhs", p.lhs}, {"rhs", p.rhs},
                               {"cmin", p.cmin}, {"pass", p.pass}, {"trivial", p.trivial}});
                all_pass = all_pass && p.pass;
                all_trivial = all_trivial && p.trivial;
                max_cmin = std::max(max_cmin, p.cmin);
            }
            j[tag] = {{"points", std::move(arr)}, {"all_pass", all_pass},
                      {"trivially_satisfied", all_trivial}, {"max_cmin", max_cmin}};
        }
        std::ofstream out(dir + "/slack.json");
        out << j.dump(1) << '\n';
    }
    {
        BootstrapReport br = bootstrap_check(r.ledger, r.params);
        nlohmann::json j;
        j["config"] = {{"nx", r.cfg.nx},       {"lx", r.cfg.lx},
                       {"ny", r.cfg.ny},       {"ymax", r.cfg.ymax},
                       {"theta_e", r.cfg.theta_e}, {"nu", r.cfg.nu},
                       {"epsilon", r.cfg.epsilon}, {"amplitude", r.cfg.amplitude},
                       {"delta", r.cfg.delta}, {"gamma", r.cfg.gamma},
                       {"s", r.cfg.s},         {"splus_offset", r.cfg.splus_offset},
                       {"dt", r.dt_used},      {"t_end", r.cfg.t_end},
                       {"linear_mode", r.cfg.linear_mode},
                       {"spectral_tail", r.cfg.spectral_tail},
                       {"snapshot_every", r.cfg.snapshot_every}, {"seed", r.cfg.seed}};
        j["derived"] = {{"eta", r.params.eta}, {"zeta", r.params.zeta}, {"M", r.params.M},
                        {"k", r.params.k},     {"c_cal", r.params.c_cal}};
        j["termination"] = r.termination;
        j["steps"] = r.steps;
        j["t_final"] = r.state.t;
        j["mu_final"] = r.mu.mu;
        if (r.mu.t_star) j["t_star"] = *r.mu.t_star;
        j["wall_ms"] = r.wall_ms;
        j["radius_fit_u"] = r.radius_fit_u;
        j["bootstrap"] = {{"m_bound_held", br.m_bound_held},
                          {"zeta_bound_held", br.zeta_bound_held},
                          {"m_improved_held", br.m_improved_held},
                          {"zeta_improved_held", br.zeta_improved_held},
                          {"max_dyu", br.max_dyu},
                          {"max_dytheta", br.max_dytheta},
                          {"first_violation", br.first_violation},
                          {"positivity_margin", br.positivity_margin}};
        std::ofstream out(dir + "/manifest.json");
        out << j.dump(1) << '\n';
    }
}

// ---- the run loop --------------------------------------------------------------------

namespace detail {

inline void record_norms(RunResult& r, double t, double mudot) {
    WeightParams wp{r.state.theta_e, t};
    PhaseState ph{r.cfg.delta, r.cfg.gamma, r.mu.mu};
    std::map<std::string, Field> lifted;
    lifted.emplace("u", gevrey_lift(r.state.u, ph));
    lifted.emplace("theta", gevrey_lift(r.state.theta, ph));
    lifted.emplace("dyu", dy(lifted.at("u")));
    lifted.emplace("dytheta", dy(lifted.at("theta")));
    lifted.emplace("dy2u", dy(lifted.at("dyu")));
    lifted.emplace("dy2theta", dy(lifted.at("dytheta")));
    lifted.emplace("dy3u", dy(lifted.at("dy2u")));
    lifted.emplace("dy3theta", dy(lifted.at("dy2theta")));
    lifted.emplace("U", gevrey_lift(r.aux.U, ph));
    lifted.emplace("dyU", dy(lifted.at("U")));
    lifted.emplace("lambda", gevrey_lift(r.aux.lambda, ph));
    lifted.emplace("dylambda", dy(lifted.at("lambda")));
    lifted.emplace("varphi", gevrey_lift(r.aux.varphi, ph));
    lifted.emplace("dyvarphi", dy(lifted.at("varphi")));
    for (const auto& [field, sv, k] : tracked_norms(r.cfg.s)) {
        double v = sobolev_norm(lifted.at(field), {sv, k, true}, wp);
        r.ledger.add(series_name(field, sv, k), t, v, mudot);
    }
    double margin = 1e300;
    auto thp = r.state.theta.to_phys();
    for (double x : thp) margin = std::min(margin, (x + r.state.theta_e) / r.state.theta_e);
    r.ledger.add("positivity_margin", t, margin, mudot);
}

inline void record_decomp(RunResult& r, const SimState& s0, const AuxState& a0,
                          const SimState& s1, const AuxState& a1, double dt, double mudot) {
    PhaseState ph{r.cfg.delta, r.cfg.gamma, r.mu.mu};
    auto log_one = [&](const char* ident, const InnerDecomposition& d) {
        r.decomp_rows.push_back({s0.t, ident, "lhs_dt", d.lhs_dt});
        r.decomp_rows.push_back({s0.t, ident, "lhs_mu", d.lhs_mu});
        r.decomp_rows.push_back({s0.t, ident, "lhs_diff", d.lhs_diff});
        for (const auto& [name, v] : d.terms) r.decomp_rows.push_back({s0.t, ident, name, v});
        r.decomp_rows.push_back({s0.t, ident, "mismatch", d.lhs_total() - d.rhs_total()});
    };
    log_one("U", decompose_inner_U(s0, a0, s1, a1, dt, ph, mudot, r.cfg.s));
    log_one("lambda", decompose_inner_lambda(s0, a0, s1, a1, dt, ph, mudot, r.cfg.s));
    log_one("varphi", decompose_inner_varphi(s0, a0, s1, a1, dt, ph, mudot, r.cfg.s));
}

} // namespace detail

inline RunResult run_simulation(const RunConfig& cfg) {
    auto wall0 = std::chrono::steady_clock::now();
    Grid g{cfg.nx, cfg.lx, cfg.ny, cfg.ymax};
    RunResult r;
    r.cfg = cfg;
    long step = 0;

    if (!cfg.resume_from.empty()) {
        step = load_checkpoint(cfg.resume_from, cfg, r);
        r.state.nu = cfg.nu;
        r.state.theta_e = cfg.theta_e;
        r.state.linear_mode = cfg.linear_mode;
        r.params.s = cfg.s;
        r.params.gamma = cfg.gamma;
        r.params.theta_e = cfg.theta_e;
    } else {
        InitSpec spec;
        spec.amplitude = cfg.amplitude;
        spec.delta = cfg.delta;
        spec.epsilon = cfg.epsilon;
        spec.s = cfg.s;
        spec.theta_e = cfg.theta_e;
        spec.spectral_tail = cfg.spectral_tail;
        auto [u0, th0] = make_initial(spec, g);
        r.state = SimState(g);
        r.state.nu = cfg.nu;
        r.state.theta_e = cfg.theta_e;
        r.state.linear_mode = cfg.linear_mode;
        r.state.u = u0;
        r.state.theta = th0;
        r.state.v = reconstruct_v(u0, th0);
        r.aux = AuxState(g);
        r.aux.lambda = dx(u0);
        r.aux.varphi = dx(th0);

        // lifted initial-data norms in the t=0 weight
        PhaseState ph0{cfg.delta, cfg.gamma, 0};
        WeightParams wp0{cfg.theta_e, 0};
        Field u0L = gevrey_lift(u0, ph0), th0L = gevrey_lift(th0, ph0);
        auto init = [&](const std::string& key, const Field& f, double sv) {
            r.ledger.init_norms[init_key(key, sv)] = sobolev_norm(f, {sv, 0, true}, wp0);
        };
        double s = cfg.s;
        init("u0", u0L, s + 1.5);
        init("th0", th0L, s + 1);
        init("dyu0", dy(u0L), s);
        init("dyth0", dy(th0L), s);
        init("dy2u0", dy(dy(u0L)), s - 1);
        init("dy2th0", dy(dy(th0L)), s - 1);
        init("dxu0", dx(u0L), s + 0.5);
        init("dxth0", dx(th0L), s);

        r.params.s = cfg.s;
        r.params.gamma = cfg.gamma;
        r.params.theta_e = cfg.theta_e;
        r.params.eta = cfg.eta > 0 ? cfg.eta : cfg.theta_e / 16.0;
        r.params.zeta = cfg.zeta > 0 ? cfg.zeta : 2 * cfg.epsilon;
        r.params.M = 2 * (r.ledger.init(init_key("dyu0", s)) + r.ledger.init(init_key("dyth0", s)));
        if (r.params.M <= 0) r.params.M = 1e-12;
        if (r.params.zeta <= 0) r.params.zeta = 1e-12;
        r.params.k = cfg.k_coupling > 0
                         ? cfg.k_coupling
                         : coupling_k(cfg.theta_e, r.params.M, r.params.zeta, cfg.c_cal, 0);
        r.params.c_cal = cfg.c_cal;
        r.dt_used = cfg.dt > 0 ? cfg.dt : cfl_dt(r.state, cfg.dt_max);
    }
    const double dt = r.dt_used;
    const long n_steps = (long)std::llround(cfg.t_end / dt);
    if (n_steps < 1) throw ConfigError("t_end shorter than one time step");

    namespace fs = std::filesystem;
    bool writing = !cfg.out_dir.empty();
    if (writing) fs::create_directories(cfg.out_dir);
    auto snap_path = [&](long st) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "/snap_%06ld.bin", st);
        return cfg.out_dir + buf;
    };

    r.termination = "t_end";
    while (true) {
        double t = step * dt;
        r.state.t = t;
        r.state.mu = r.mu.mu;
        PhaseState ph{cfg.delta, cfg.gamma, r.mu.mu};
        Field uL = gevrey_lift(r.state.u, ph), thL = gevrey_lift(r.state.theta, ph);
        MuRhs rhs = mu_rhs(uL, thL, t, cfg.theta_e, cfg.splus_offset);
        detail::record_norms(r, t, rhs.total);
        r.mu_rows.push_back(
            {t, r.mu.mu, rhs.total,
             {rhs.group[0], rhs.group[1], rhs.group[2], rhs.group[3], rhs.group[4]}});

        if (step >= n_steps) break;

        bool want_decomp = (step % cfg.snapshot_every) == 0;
        SimState prev = r.state;
        AuxState prev_aux = r.aux;
        try {
            bllab::step(r.state, dt);
        } catch (const SolverAbort& e) {
            r.termination = e.reason;
            r.state = prev;
            break;
        }
        evolve_W(r.aux, prev, r.state, dt);
        if (want_decomp) detail::record_decomp(r, prev, prev_aux, r.state, r.aux, dt, rhs.total);

        advance_mu(r.mu, rhs.total, dt, ph);
        ++step;
        r.state.t = step * dt;
        r.state.mu = r.mu.mu;

        if (r.mu.t_star) {
            // one final sample at the clamped radius, then stop
            PhaseState phf{cfg.delta, cfg.gamma, r.mu.mu};
            Field uf = gevrey_lift(r.state.u, phf), thf = gevrey_lift(r.state.theta, phf);
            MuRhs rf = mu_rhs(uf, thf, r.state.t, cfg.theta_e, cfg.splus_offset);
            detail::record_norms(r, r.state.t, rf.total);
            r.mu_rows.push_back(
                {r.state.t, r.mu.mu, rf.total,
                 {rf.group[0], rf.group[1], rf.group[2], rf.group[3], rf.group[4]}});
            r.termination = "t_star";
            break;
        }
        if (writing && (step % cfg.snapshot_every) == 0) {
            write_snapshot(snap_path(step), r.state);
            write_checkpoint(cfg.out_dir + "/checkpoint.json", r, step);
        }
    }

    r.steps = step;
    r.radius_fit_u = fit_radius(r.state.u);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0)
                    .count();
    if (writing) {
        write_snapshot(snap_path(step), r.state);
        write_checkpoint(cfg.out_dir + "/checkpoint.json", r, step);
        write_outputs(r);
    }
    return r;
}

// one calibration pass: run quietly, read off the largest constant any
// inequality needs, then set gamma to ten times that and recompute k
inline RunConfig calibrate(RunConfig cfg) {
    RunConfig quiet = cfg;
    quiet.out_dir.clear();
    quiet.resume_from.clear();
    RunResult r = run_simulation(quiet);
    double cmax = 0;
    for (const char* tag : kInequalities) {
        if (std::string_view(tag).substr(0, 4) != "est-") continue; // energies carry no free constant
        for (const auto& p : proposition_slack(r.ledger, tag, r.params))
            cmax = std::max(cmax, p.cmin);
    }
    cfg.c_cal = std::max(1.0, cmax);
    cfg.gamma = 10 * std::max(cmax, 0.1);
    cfg.k_coupling = 0; // recompute from the new constant
    return cfg;
}

} // namespace bllab
