#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aux_fields.hpp"
#include "gevrey.hpp"

namespace bllab {

// ---- Gevrey-radius ODE ---------------------------------------------------------

struct MuState {
    double t = 0;
    double mu = 0;
    double mu_dot = 1;
    std::optional<double> t_star;
};

struct MuRhs {
    double total = 1;
    double group[5] = {0, 0, 0, 0, 0};
};

// u_lift / theta_lift are already Gevrey-lifted fields; splus is the shared
// "slightly above" offset added to every half-integer regularity below.
inline MuRhs mu_rhs(const Field& u_lift, const Field& th_lift, double t, double theta_e,
                    double splus = 0.01) {
    WeightParams wp{theta_e, t};
    auto nrm = [&](const Field& f, double s, int k) {
        double v = sobolev_norm(f, {s + splus, k, true}, wp);
        if (!std::isfinite(v)) throw DomainError("mu_rhs: non-finite norm at s=" + std::to_string(s));
        return v;
    };
    auto pair2 = [](double a, double b) { return a * a + b * b; };

    Field uy = dy(u_lift), thy = dy(th_lift);
    Field uyy = dy(uy), thyy = dy(thy);
    Field uyyy = dy(uyy), thyyy = dy(thyy);

    MuRhs r;
    double q = std::pow(1.0 + t, 0.25);
    r.group[0] = q * (std::sqrt(pair2(nrm(uy, 2.5, 0), nrm(thy, 2.5, 0))) +
                      std::sqrt(pair2(nrm(uyy, 1.5, 1), nrm(thyy, 1.5, 1))));
    r.group[1] = q * q *
                 (std::pow(nrm(u_lift, 2.5, 0), 2) + std::pow(nrm(th_lift, 1.5, 0), 2) +
                  pair2(nrm(uy, 2.5, 0), nrm(thy, 2.5, 0)) +
                  pair2(nrm(uyy, 1.5, 0), nrm(thyy, 1.5, 0)));
    r.group[2] = std::pow(nrm(th_lift, 0.5, 0), 4) +
                 (1.0 + t) * std::pow(pair2(nrm(uy, 1.5, 1), nrm(thy, 1.5, 1)), 2);
    r.group[3] = q * q * nrm(thy, 1.5, 0) * (nrm(uyyy, 1.5, 0) + nrm(thyyy, 1.5, 0));
    r.group[4] = nrm(uyyy, 0.5, 0) * (nrm(uy, 0.5, 0) + nrm(uyy, 0.5, 0) + nrm(th_lift, 0.5, 0)) +
                 nrm(thyyy, 0.5, 0) * nrm(uy, 0.5, 0);
    r.total = 1 + r.group[0] + r.group[1] + r.group[2] + r.group[3] + r.group[4];
    return r;
}

// forward Euler with linear interpolation of the T* crossing
inline void advance_mu(MuState& ms, double rhs, double dt, const PhaseState& phase) {
    if (dt <= 0) throw DomainError("advance_mu: dt must be positive");
    if (rhs < 1.0 - 1e-12) throw DomainError("advance_mu: rhs below the additive constant 1");
    double cap = phase.delta / phase.gamma;
    double mu_new = ms.mu + dt * rhs;
    if (!ms.t_star && mu_new >= cap) {
        ms.t_star = ms.t + (cap - ms.mu) / rhs;
        mu_new = cap;
    }
    ms.mu = mu_new;
    ms.mu_dot = rhs;
    ms.t += dt;
}

// ---- ledger ---------------------------------------------------------------------

struct MissingSeriesError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LedgerSample {
    double t = 0;
    double v = 0;      // instantaneous norm
    double mudot = 1;  // mu' on the interval starting at t
    double linf = 0;   // running max over [0, t]
    double l2 = 0;     // int_0^t v^2 dt, left-endpoint rule
    double l2mu = 0;   // int_0^t mudot v^2 dt
};

struct NormSeries {
    std::vector<LedgerSample> samples;
};

inline std::string init_key(const std::string& field, double s) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%s@s=%.4f", field.c_str(), s);
    return buf;
}

inline std::string series_name(const std::string& field, double s, int k = 0) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%s@s=%.4f,k=%d", field.c_str(), s, k);
    return buf;
}

class EnergyLedger {
public:
    std::map<std::string, NormSeries> series;
    std::map<std::string, double> init_norms; // lifted initial-data norms

    // cumulative integrals exclude the interval that starts at t (left-endpoint rule),
    // so at(name, i) gives sup/integral norms over [0, t_i]
    void add(const std::string& name, double t, double value, double mudot) {
        auto& s = series[name];
        LedgerSample cur;
        cur.t = t;
        cur.v = value;
        cur.mudot = mudot;
        if (s.samples.empty()) {
            cur.linf = value;
        } else {
            const LedgerSample& prev = s.samples.back();
            double dt = t - prev.t;
            if (dt < 0) throw DomainError("EnergyLedger: samples must be time-ordered");
            cur.linf = std::max(prev.linf, value);
            cur.l2 = prev.l2 + prev.v * prev.v * dt;
            cur.l2mu = prev.l2mu + prev.mudot * prev.v * prev.v * dt;
        }
        s.samples.push_back(cur);
    }

    const NormSeries& get(const std::string& name) const {
        auto it = series.find(name);
        if (it == series.end()) throw MissingSeriesError("missing norm series: " + name);
        return it->second;
    }
    const LedgerSample& at(const std::string& name, size_t i) const {
        const auto& s = get(name);
        if (i >= s.samples.size()) throw MissingSeriesError("series too short: " + name);
        return s.samples[i];
    }
    size_t size() const {
        return series.empty() ? 0 : series.begin()->second.samples.size();
    }
    double init(const std::string& key) const {
        auto it = init_norms.find(key);
        if (it == init_norms.end()) throw MissingSeriesError("missing initial norm: " + key);
        return it->second;
    }
};

inline std::string dy_field_name(const std::string& field) {
    if (field == "u") return "dyu";
    if (field == "theta") return "dytheta";
    if (field == "dyu") return "dy2u";
    if (field == "dytheta") return "dy2theta";
    if (field == "dy2u") return "dy3u";
    if (field == "dy2theta") return "dy3theta";
    if (field == "U") return "dyU";
    if (field == "lambda") return "dylambda";
    if (field == "varphi") return "dyvarphi";
    throw MissingSeriesError("no derivative series for field " + field);
}

// The list of lifted weighted norms the run loop must log for the energies,
// the bootstrap monitor and every proposition comparison.
inline std::vector<std::tuple<std::string, double, int>> tracked_norms(double s) {
    std::vector<std::tuple<std::string, double, int>> v = {
        {"U", s, 0},          {"U", s + 0.25, 0},
        {"dyU", s, 0},        {"dyU", s - 0.5, 0},  {"dyU", s - 0.25, 0}, {"dyU", s - 1, 0},
        {"lambda", s + 0.5, 0}, {"lambda", s + 0.75, 0}, {"dylambda", s + 0.5, 0},
        {"u", s + 1, 0},      {"u", s + 1.25, 0},   {"u", s, 1},
        {"dyu", s + 1, 0},    {"dyu", s, 0},        {"dyu", s + 0.5, 0},  {"dyu", s + 0.25, 0},
        {"dy2u", s, 0},       {"dy2u", s - 0.75, 0}, {"dy2u", s - 1, 0},
        {"dy3u", s - 1, 0},
        {"theta", s + 1, 0},  {"theta", s + 1.25, 0}, {"theta", s - 1, 0},
        {"dytheta", s + 1, 0}, {"dytheta", s, 0},    {"dytheta", s + 0.5, 0},
        {"dytheta", s + 0.25, 0},
        {"dy2theta", s, 0},   {"dy2theta", s - 0.75, 0}, {"dy2theta", s - 1, 0},
        {"dy3theta", s - 1, 0},
        {"varphi", s, 0},     {"varphi", s + 0.25, 0}, {"dyvarphi", s, 0},
    };
    return v;
}

// ---- energy functional ------------------------------------------------------------

struct EstimateParams {
    double s = 2.6;
    double gamma = 2.0;
    double eta = 1.0 / 16.0;
    double zeta = 0;
    double M = 0;
    double k = 1;
    double theta_e = 1.0;
    double c_cal = 1.0; // calibrated stand-in for the universal constant C
};

inline double energy_functional(const EnergyLedger& led, const std::string& field, double s,
                                double gamma, double theta_e, size_t i) {
    const auto& a = led.at(series_name(field, s), i);
    const auto& b = led.at(series_name(field, s + 0.25), i);
    const auto& c = led.at(series_name(dy_field_name(field), s), i);
    return a.linf * a.linf + gamma * b.l2mu + theta_e / 16.0 * c.l2;
}

inline double energy_functional(const EnergyLedger& led, const std::string& field, double s,
                                double gamma, double theta_e) {
    if (led.size() == 0) return 0;
    return energy_functional(led, field, s, gamma, theta_e, led.size() - 1);
}

// ---- bootstrap monitor -------------------------------------------------------------

struct BootstrapReport {
    bool m_bound_held = true;
    bool zeta_bound_held = true;
    bool m_improved_held = true;    // max <= (sqrt6/4) M
    bool zeta_improved_held = true; // max <= (sqrt3/2) zeta
    double max_dyu = 0, max_dytheta = 0;
    long first_violation = -1; // sample index of first zeta violation
    double positivity_margin = 1; // min over time of min(theta+theta_E)/theta_E
};

inline BootstrapReport bootstrap_check(const EnergyLedger& led, const EstimateParams& p) {
    BootstrapReport r;
    const auto& du = led.get(series_name("dyu", p.s)).samples;
    const auto& dth = led.get(series_name("dytheta", p.s)).samples;
    for (size_t i = 0; i < dth.size(); ++i) {
        r.max_dyu = std::max(r.max_dyu, du[i].v);
        r.max_dytheta = std::max(r.max_dytheta, dth[i].v);
        if (du[i].v > p.M) r.m_bound_held = false;
        if (dth[i].v > p.zeta && r.first_violation < 0) {
            r.zeta_bound_held = false;
            r.first_violation = (long)i;
        }
    }
    r.m_improved_held = r.max_dyu <= std::sqrt(6.0) / 4.0 * p.M + 1e-300;
    r.zeta_improved_held = r.max_dytheta <= std::sqrt(3.0) / 2.0 * p.zeta + 1e-300;
    if (led.series.count("positivity_margin")) {
        r.positivity_margin = 1e300;
        for (const auto& smp : led.get("positivity_margin").samples)
            r.positivity_margin = std::min(r.positivity_margin, smp.v);
    }
    return r;
}

// ---- proposition slack --------------------------------------------------------------

struct SlackPoint {
    double t = 0;
    double lhs = 0;  // constant-free left side
    double rhs = 0;  // rhs_base + c_cal * c_terms
    double cmin = 0; // minimal C making lhs <= rhs_base + C * c_terms
    bool pass = true;
    bool trivial = false; // 0 <= 0
};

namespace detail {

struct Ineq {
    double lhs_base = 0; // |f(t)|^2 + 2 gamma l2mu + (thE - 2 eta) l2(dyf)
    double rhs_base = 0;
    double c_terms = 0; // everything multiplied by an unknown constant
};

inline void add_lhs(Ineq& q, const EnergyLedger& led, const EstimateParams& p,
                    const std::string& f, double sf, size_t i, double t) {
    const auto& inst = led.at(series_name(f, sf), i);
    q.lhs_base += inst.v * inst.v + 2 * p.gamma * led.at(series_name(f, sf + 0.25), i).l2mu +
                  (p.theta_e - 2 * p.eta) * led.at(series_name(dy_field_name(f), sf), i).l2;
    // the -2 C_eta and -C zeta (1+t)^{1/4} pieces of the left side, moved right
    q.c_terms += 2 * led.at(series_name(f, sf + 0.25), i).l2mu +
                 p.zeta * std::pow(1 + t, 0.25) * led.at(series_name(dy_field_name(f), sf), i).l2;
}

} // namespace detail

inline SlackPoint proposition_slack_at(const EnergyLedger& led, const std::string& which,
                                       const EstimateParams& p, size_t i) {
    const double s = p.s, thE = p.theta_e, eta = p.eta;
    double t = led.at(series_name("u", s + 1), i).t;
    auto l2 = [&](const std::string& f, double sf) { return led.at(series_name(f, sf), i).l2; };
    auto l2mu = [&](const std::string& f, double sf, int k = 0) {
        return led.at(series_name(f, sf, k), i).l2mu;
    };
    auto q14 = [&] { return std::pow(1 + t, 0.25); };
    auto q12 = [&] { return std::sqrt(1 + t); };

    SlackPoint out;
    out.t = t;
    detail::Ineq q;

    if (which == "est-U") {
        detail::add_lhs(q, led, p, "U", s, i, t);
        q.rhs_base = 2 * eta * l2("dyu", s + 1) + 5.0 / thE * l2("dytheta", s + 1);
        q.c_terms += l2mu("lambda", s + 0.75);
    } else if (which == "est-lambda") {
        detail::add_lhs(q, led, p, "lambda", s + 0.5, i, t);
        q.rhs_base = std::pow(led.init(init_key("dxu0", s + 0.5)), 2) +
                     2 * eta * (l2("dyu", s + 0.5) + l2("dytheta", s + 0.5) + l2("dyU", s - 0.5));
        q.c_terms += l2mu("u", s + 1.25) + p.zeta * q14() * l2("dyu", s + 0.5) +
                     l2mu("theta", s + 1.25) + l2mu("U", s + 0.25);
    } else if (which == "est-varphi") {
        detail::add_lhs(q, led, p, "varphi", s, i, t);
        q.rhs_base = std::pow(led.init(init_key("dxth0", s)), 2) +
                     2 * eta * (l2("dyu", s + 1) + l2("dytheta", s + 1) + l2("dyU", s - 1));
        q.c_terms += l2mu("u", s + 1) + l2mu("theta", s + 1) +
                     p.zeta * q14() * l2("dytheta", s + 1) + l2mu("U", s);
    } else if (which == "est-u") {
        detail::add_lhs(q, led, p, "u", s + 1, i, t);
        q.rhs_base = std::pow(led.init(init_key("u0", s + 1.5)), 2) +
                     2 * eta * l2("dyu", s + 1) + 4 * eta * l2("dytheta", s + 1) +
                     2 * eta * l2("dyU", s - 0.25);
        q.c_terms += l2mu("u", s + 1.25) + p.zeta * q14() * l2("dyu", s + 1) +
                     l2mu("theta", s + 1) + l2mu("U", s + 0.25) +
                     q12() * p.M * p.M *
                         (2 * eta * l2("dyu", s + 1) + l2mu("lambda", s + 0.75) +
                          5.0 / thE * l2("dytheta", s + 1));
    } else if (which == "est-theta") {
        detail::add_lhs(q, led, p, "theta", s + 1, i, t);
        q.rhs_base = std::pow(led.init(init_key("th0", s + 1)), 2) +
                     4 * eta * l2("dyu", s + 1) + 2 * eta * l2("dytheta", s + 1) +
                     2 * eta * l2("dyU", s - 1);
        q.c_terms += l2mu("u", s + 1.25) + l2mu("theta", s + 1) +
                     p.zeta * q14() * l2("dytheta", s + 1) + l2mu("U", s) +
                     q12() * p.zeta * p.zeta *
                         (2 * eta * l2("dyu", s + 1) + l2mu("lambda", s + 0.75) +
                          5.0 / thE * l2("dytheta", s + 1));
    } else if (which == "est-dyu") {
        detail::add_lhs(q, led, p, "dyu", s, i, t);
        q.rhs_base = std::pow(led.init(init_key("dyu0", s)), 2) +
                     2 * eta * l2("dy2theta", s);
        q.c_terms += l2mu("u", s + 1) + l2mu("dytheta", s);
    } else if (which == "est-dytheta") {
        detail::add_lhs(q, led, p, "dytheta", s, i, t);
        q.rhs_base = std::pow(led.init(init_key("dyth0", s)), 2) +
                     2 * eta * l2("dy2u", s);
        q.c_terms += l2mu("u", s + 1) + l2mu("dyu", s) + l2mu("theta", s + 1);
    } else if (which == "est-dy2") {
        detail::add_lhs(q, led, p, "dy2u", s - 1, i, t);
        detail::add_lhs(q, led, p, "dy2theta", s - 1, i, t);
        q.rhs_base = std::pow(led.init(init_key("dy2u0", s - 1)), 2) +
                     std::pow(led.init(init_key("dy2th0", s - 1)), 2);
        q.c_terms += l2mu("u", s, 1) + l2mu("theta", s - 1) + l2mu("dytheta", s);
    } else if (which == "energy-total") {
        auto e = [&](const std::string& f, double sf) {
            return energy_functional(led, f, sf, p.gamma, thE, i);
        };
        q.lhs_base = e("U", s) + e("lambda", s + 0.5) + e("u", s + 1) + p.k * e("theta", s + 1);
        q.rhs_base = 2 * std::pow(led.init(init_key("u0", s + 1.5)), 2) +
                     p.k * std::pow(led.init(init_key("th0", s + 1)), 2);
    } else if (which == "energy-dy") {
        auto e = [&](const std::string& f, double sf) {
            return energy_functional(led, f, sf, p.gamma, thE, i);
        };
        q.lhs_base = e("dyu", s) + e("dytheta", s);
        q.rhs_base = 1.5 * (std::pow(led.init(init_key("dyu0", s)), 2) +
                            std::pow(led.init(init_key("dyth0", s)), 2));
    } else if (which == "energy-dy2") {
        auto e = [&](const std::string& f, double sf) {
            return energy_functional(led, f, sf, p.gamma, thE, i);
        };
        q.lhs_base = e("dy2u", s - 1) + e("dy2theta", s - 1);
        q.rhs_base = 1.5 * (std::pow(led.init(init_key("dy2u0", s - 1)), 2) +
                            std::pow(led.init(init_key("dy2th0", s - 1)), 2));
    } else {
        throw MissingSeriesError("unknown inequality tag: " + which);
    }

    out.lhs = q.lhs_base;
    out.rhs = q.rhs_base + p.c_cal * q.c_terms;
    if (q.lhs_base == 0 && q.rhs_base == 0 && q.c_terms == 0) {
        out.trivial = true;
        out.pass = true;
        out.cmin = 0;
    } else if (q.c_terms > 0) {
        out.cmin = std::max(0.0, (q.lhs_base - q.rhs_base) / q.c_terms);
        out.pass = q.lhs_base <= out.rhs * (1 + 1e-12) + 1e-300;
    } else {
        out.cmin = 0;
        out.pass = q.lhs_base <= q.rhs_base * (1 + 1e-12) + 1e-300;
    }
    return out;
}

inline std::vector<SlackPoint> proposition_slack(const EnergyLedger& led, const std::string& which,
                                                 const EstimateParams& p) {
    std::vector<SlackPoint> v;
    for (size_t i = 0; i < led.size(); ++i) v.push_back(proposition_slack_at(led, which, p, i));
    return v;
}

inline const char* const kInequalities[] = {"est-U",   "est-lambda",  "est-varphi",  "est-u", "est-theta", "est-dyu",
                                            "est-dytheta", "est-dy2", "energy-total", "energy-dy", "energy-dy2"};

// k per the explicit coupling formula at time t (calibrated C plugged in)
inline double coupling_k(double theta_e, double M, double zeta, double c, double t = 0) {
    double num = 3 * theta_e / 8 + 5 / theta_e + c * std::sqrt(1 + t) * M * M * 5 / theta_e;
    double den = 5 * theta_e / 16 - c * std::sqrt(1 + t) * zeta * zeta * 5 / theta_e;
    if (den <= 0) throw DomainError("coupling_k: denominator not positive; data too large");
    return num / den;
}

// least-squares decay exponent of -log|u^(xi, y*)| against sqrt(<xi>),
// over resolved modes; y* is the row with the largest spectral mass
inline double fit_radius(const Field& f) {
    const Grid& g = f.grid();
    int best_row = 1;
    double best_mass = -1;
    for (int i = 0; i < g.ny; ++i) {
        double m = 0;
        for (int j = 1; j < g.nx / 2; ++j) m += std::norm(f.at(i, j));
        if (m > best_mass) {
            best_mass = m;
            best_row = i;
        }
    }
    if (best_mass <= 0) return 0;
    double peak = 0;
    for (int j = 1; j < g.nx / 2; ++j) peak = std::max(peak, std::abs(f.at(best_row, j)));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int j = 1; j < g.nx / 2; ++j) {
        double a = std::abs(f.at(best_row, j));
        if (a < peak * 1e-13 || a == 0) continue;
        double x = std::sqrt(angle_bracket(g.xi(j)));
        double y = -std::log(a);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0;
    double den = n * sxx - sx * sx;
    return den == 0 ? 0 : (n * sxy - sx * sy) / den;
}

} // namespace bllab
