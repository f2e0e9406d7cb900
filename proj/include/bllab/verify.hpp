#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dyadic.hpp"
#include "run.hpp"

namespace bllab {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace detail {

inline CheckResult check(const std::string& name, bool pass, double got, double bound) {
    std::ostringstream os;
    os << "got " << got << (pass ? " <= " : " > ") << bound;
    return {name, pass, os.str()};
}

inline CheckResult check_le(const std::string& name, double got, double bound) {
    return check(name, got <= bound, got, bound);
}

inline CheckResult check_ge(const std::string& name, double got, double bound) {
    std::ostringstream os;
    bool pass = got >= bound;
    os << "got " << got << (pass ? " >= " : " < ") << bound;
    return {name, pass, os.str()};
}

inline Field random_smooth(const Grid& g, std::mt19937& rng, double decay = 1.5) {
    std::uniform_real_distribution<double> un(-1.0, 1.0);
    Field f(g);
    for (int i = 0; i < g.ny; ++i) {
        double y = g.y(i);
        double env = std::exp(-0.5 * y * y);
        for (int j = 0; j < g.nx; ++j) {
            if (g.nx > 1 && j == g.nx / 2) continue; // keep Nyquist empty
            double w = std::pow(angle_bracket(g.xi(j)), -decay - 1.0);
            f.at(i, j) = cplx(un(rng), un(rng)) * w * env;
        }
    }
    // make the physical field real: c_{-j} = conj(c_j)
    for (int i = 0; i < g.ny; ++i) {
        f.at(i, 0) = f.at(i, 0).real();
        for (int j = 1; j < g.nx / 2; ++j) f.at(i, g.nx - j) = std::conj(f.at(i, j));
    }
    return f;
}

inline double rel_err(const Field& got, const Field& want) {
    double scale = std::max(1e-300, max_abs_coeff(want));
    return max_abs_coeff(got - want) / scale;
}

} // namespace detail

// residual of d_t Psi + 4 theta_E (d_y Psi)^2 = 0 for any candidate weight;
// exposed with function arguments so a deliberately broken weight is detectable
inline double weight_identity_residual(const std::function<double(double, double)>& psi_dt,
                                       const std::function<double(double, double)>& psi_dy,
                                       double theta_e, int nt = 100, int nyy = 100,
                                       double tmax = 5, double ymax = 20) {
    double worst = 0;
    for (int a = 0; a <= nt; ++a)
        for (int b = 0; b <= nyy; ++b) {
            double t = tmax * a / nt, y = ymax * b / nyy;
            double dyv = psi_dy(t, y);
            worst = std::max(worst, std::fabs(psi_dt(t, y) + 4 * theta_e * dyv * dyv));
        }
    return worst;
}

// ---- manufactured solution ---------------------------------------------------------
//
// u_m = a(t) cos(x) y e^{-y^2}, theta_m = b(t) cos(x) e^{-y^2}, with v_m integrated
// exactly from the divergence constraint; all derivatives below are analytic.

struct Manufactured {
    double a0 = 0.05, b0 = 0.05;
    double ra = 0.3, rb = -0.2;

    double a(double t) const { return a0 * std::exp(ra * t); }
    double b(double t) const { return b0 * std::exp(rb * t); }

    static double capS(double y) { return 0.5 * (1 - std::exp(-y * y)); }
    static double capP(double y) {
        double e = std::exp(-2 * y * y);
        return 0.25 * y * e + 0.375 * std::sqrt(M_PI / 2) * std::erf(std::sqrt(2.0) * y) -
               y * y * y * e;
    }

    void fill(const Grid& g, double t, Field& u, Field& th, Field& v) const {
        std::vector<double> up(g.nx * g.ny), tp(g.nx * g.ny), vp(g.nx * g.ny);
        double at = a(t), bt = b(t);
        for (int i = 0; i < g.ny; ++i) {
            double y = g.y(i), e = std::exp(-y * y);
            for (int j = 0; j < g.nx; ++j) {
                double x = g.x(j), c = std::cos(x);
                up[i * g.nx + j] = at * c * y * e;
                tp[i * g.nx + j] = bt * c * e;
                vp[i * g.nx + j] = -2 * bt * c * y * e +
                                   at * at * 0.5 * (1 + std::cos(2 * x)) * capP(y) +
                                   at * std::sin(x) * capS(y);
            }
        }
        u = Field::from_phys(g, up);
        th = Field::from_phys(g, tp);
        v = Field::from_phys(g, vp);
    }

    SimState state(const Grid& g, double t, double nu, double theta_e, bool linear) const {
        SimState s;
        s.grid = g;
        s.t = t;
        s.nu = nu;
        s.theta_e = theta_e;
        s.linear_mode = linear;
        fill(g, t, s.u, s.theta, s.v);
        return s;
    }

    // forcing that makes (u_m, theta_m, v_m) satisfy the regularized system exactly
    void forcing(const Grid& g, double t, double nu, double theta_e, Field& fu,
                 Field& fth) const {
        std::vector<double> fup(g.nx * g.ny), ftp(g.nx * g.ny);
        double at = a(t), bt = b(t);
        double adot = ra * at, bdot = rb * bt;
        for (int i = 0; i < g.ny; ++i) {
            double y = g.y(i), e = std::exp(-y * y);
            for (int j = 0; j < g.nx; ++j) {
                double x = g.x(j), c = std::cos(x), sx = std::sin(x);
                double um = at * c * y * e;
                double tm = bt * c * e;
                double vm = -2 * bt * c * y * e + at * at * 0.5 * (1 + std::cos(2 * x)) * capP(y) +
                            at * sx * capS(y);
                double ux = -at * sx * y * e;
                double uy = at * c * (1 - 2 * y * y) * e;
                double uyy = at * c * (4 * y * y * y - 6 * y) * e;
                double uxx = -um;
                double tx = -bt * sx * e;
                double ty = -2 * bt * c * y * e;
                double tyy = bt * c * (4 * y * y - 2) * e;
                double txx = -tm;
                double coef = tm + theta_e;
                fup[i * g.nx + j] =
                    adot * c * y * e + um * ux + vm * uy - coef * uyy - nu * uxx;
                ftp[i * g.nx + j] =
                    bdot * c * e + um * tx + vm * ty - coef * tyy - coef * uy * uy - nu * txx;
            }
        }
        fu = Field::from_phys(g, fup);
        fth = Field::from_phys(g, ftp);
    }
};

// integrates the manufactured problem on the given grid up to t_end
inline SimState mms_solution(const Grid& g, double dt, double t_end, double nu, double theta_e) {
    Manufactured m;
    SimState s = m.state(g, 0, nu, theta_e, false);
    long n = (long)std::llround(t_end / dt);
    for (long k = 0; k < n; ++k) {
        Field fu, fth;
        m.forcing(g, s.t, nu, theta_e, fu, fth);
        StepForcing sf{&fu, &fth};
        step(s, dt, sf);
        s.t = (k + 1) * dt;
    }
    return s;
}

// max-norm errors in (u, theta) against the closed-form fields
inline std::pair<double, double> mms_error(const Grid& g, double dt, double t_end, double nu,
                                           double theta_e) {
    SimState s = mms_solution(g, dt, t_end, nu, theta_e);
    Manufactured m;
    Field ue, the, ve;
    m.fill(g, s.t, ue, the, ve);
    return {linf(s.u - ue), linf(s.theta - the)};
}

// smallest-mode decay factor of the implicit wall-normal diffusion solve
inline double linear_decay_oracle(const Grid& g, double dt, double theta_e, long n_steps) {
    double q = 2.0 / (g.dy() * g.dy()) * (1 - std::cos(M_PI * g.dy() / g.ymax));
    return std::pow(1.0 / (1.0 + dt * theta_e * q), (double)n_steps);
}

// ---- suites -------------------------------------------------------------------------

inline std::vector<CheckResult> verify_dyadic() {
    std::vector<CheckResult> out;
    Grid g{64, 2 * M_PI, 49, 8.0};
    auto part = make_partition(g);
    std::mt19937 rng(12345);

    double worst = 0;
    for (int j = 0; j <= g.nx / 2; ++j) {
        double xi = g.xi(j) < 0 ? -g.xi(j) : g.xi(j);
        double sum = lp_chi(xi);
        for (int k = 0; k <= part.kmax; ++k) sum += lp_phi(std::ldexp(xi, -k));
        worst = std::max(worst, std::fabs(sum - 1.0));
    }
    out.push_back(detail::check_le("partition-of-unity telescopes to 1", worst, 1e-12));

    Field f = detail::random_smooth(g, rng), h = detail::random_smooth(g, rng);
    Field rec = dyadic_block(f, -1);
    for (int k = 0; k <= part.kmax; ++k) rec += dyadic_block(f, k);
    out.push_back(
        detail::check_le("dyadic blocks resum to the field", detail::rel_err(rec, f), 1e-12));

    Field one(g);
    one.add_const(1.0);
    out.push_back(detail::check_le("paraproduct with the constant 1 recovers the high modes",
                                   detail::rel_err(paraproduct(one, h) + low_freq_cutoff(h, 1), h),
                                   1e-12));

    Field bony = paraproduct(f, h) + paraproduct(h, f) + remainder(f, h);
    out.push_back(detail::check_le("Bony decomposition resums to the product",
                                   detail::rel_err(bony, multiply(f, h)), 1e-10));

    out.push_back(detail::check_le("remainder is symmetric",
                                   detail::rel_err(remainder(f, h), remainder(h, f)), 1e-12));

    PhaseState ph{0.1, 2.0, 0.0};
    auto rep = commutator_suite(f, h, 1.0, 2.0, ph);
    bool fin = std::isfinite(rep.ratio_para) && std::isfinite(rep.ratio_remainder) &&
               std::isfinite(rep.ratio_comm) && std::isfinite(rep.ratio_phase) &&
               !rep.inconsistency;
    out.push_back({"paraproduct/commutator ratios are finite and consistent", fin,
                   fin ? "all ratios finite" : "non-finite ratio or zero-rhs inconsistency"});
    return out;
}

inline std::vector<CheckResult> verify_spaces() {
    std::vector<CheckResult> out;
    Grid g{64, 2 * M_PI, 65, 10.0};
    std::mt19937 rng(777);

    double wres = weight_identity_residual(
        [](double t, double y) { return weight_psi_dt(t, y, 1.0); },
        [](double t, double y) { return weight_psi_dy(t, y, 1.0); }, 1.0);
    out.push_back(detail::check_le("weight solves its Hamilton-Jacobi identity", wres, 1e-12));

    // a corrupted weight must be caught by the same residual
    double bad = weight_identity_residual(
        [](double t, double y) { return weight_psi_dt(t, y, 1.0) * 1.01; },
        [](double t, double y) { return weight_psi_dy(t, y, 1.0); }, 1.0);
    out.push_back(detail::check_ge("identity residual detects a perturbed weight", bad, 1e-6));

    Field f = detail::random_smooth(g, rng);
    WeightParams wp{1.0, 0.7};
    double n1 = sobolev_norm(f, {1.3, 0, true}, wp);
    double n2 = sobolev_norm(2.0 * f, {1.3, 0, true}, wp);
    out.push_back(detail::check_le("weighted norm is homogeneous", std::fabs(n2 - 2 * n1),
                                   1e-12 * std::max(1.0, n1)));

    // decay-to-zero fields: sup-in-y of the x-Sobolev norm against the weighted bound
    double worst_ratio = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Field u = detail::random_smooth(g, rng);
        // enforce u -> 0 at the top so u = -int_y^inf dy u holds on the box
        for (int j = 0; j < g.nx; ++j) u.at(g.ny - 1, j) = 0;
        double t = 0.5 * trial / 19.0;
        WeightParams w{1.0, t};
        double lhs = linf_y_hs_x(u, 1.2);
        double rhs = std::pow(2 * M_PI * 1.0, 0.25) * std::pow(1 + t, 0.25) *
                     sobolev_norm(dy(u), {1.2, 0, true}, w);
        if (rhs > 0) worst_ratio = std::max(worst_ratio, lhs / rhs);
    }
    out.push_back(
        detail::check_le("sup-in-y norm obeys the weighted trace bound", worst_ratio, 1.01));

    // subadditivity of <xi>^{1/2} over every resolved frequency pair
    double sworst = 0;
    for (int j1 = 0; j1 <= g.nx / 2; ++j1)
        for (int j2 = 0; j2 <= g.nx / 2; ++j2) {
            double a = std::sqrt(angle_bracket(g.xi(j1))), b2 = std::sqrt(angle_bracket(g.xi(j2)));
            double c = std::sqrt(angle_bracket(g.xi(j1) + g.xi(j2)));
            sworst = std::max(sworst, c - (a + b2));
        }
    out.push_back(detail::check_le("phase exponent is subadditive in frequency", sworst, 1e-12));

    // the spectral lift commutes with dyadic blocks
    auto part = make_partition(g);
    PhaseState ph{0.1, 2.0, 0.0};
    Field lb = gevrey_lift(dyadic_block(f, 2), ph);
    Field bl = dyadic_block(gevrey_lift(f, ph), 2);
    out.push_back(detail::check_le("lift commutes with frequency blocks",
                                   detail::rel_err(lb, bl), 1e-12));
    return out;
}

inline std::vector<CheckResult> verify_solver() {
    std::vector<CheckResult> out;
    const double nu = 1e-2, theta_e = 1.0, t_end = 0.02, dt = 2.5e-4;

    auto [e1u, e1t] = mms_error(Grid{32, 2 * M_PI, 65, 8.0}, dt, t_end, nu, theta_e);
    auto [e2u, e2t] = mms_error(Grid{32, 2 * M_PI, 129, 8.0}, dt, t_end, nu, theta_e);
    double e1 = e1u + e1t, e2 = e2u + e2t;
    double order = std::log2(e1 / e2);
    out.push_back(detail::check_ge("manufactured solution: wall-normal order", order, 1.5));

    // Richardson differences on a fixed grid, so the spatial error cancels
    Grid gt{32, 2 * M_PI, 129, 8.0};
    SimState s1 = mms_solution(gt, 1e-3, 0.02, nu, theta_e);
    SimState s2 = mms_solution(gt, 2e-3, 0.02, nu, theta_e);
    SimState s4 = mms_solution(gt, 4e-3, 0.02, nu, theta_e);
    double d21 = linf(s2.u - s1.u) + linf(s2.theta - s1.theta);
    double d42 = linf(s4.u - s2.u) + linf(s4.theta - s2.theta);
    double torder = std::log2(d42 / d21);
    out.push_back(detail::check_ge("manufactured solution: time order", torder, 0.8));

    // pure diffusion decay of the slowest mode against the closed-form factor
    Grid gl{16, 2 * M_PI, 129, 8.0};
    SimState s;
    s.grid = gl;
    s.nu = nu;
    s.theta_e = theta_e;
    s.linear_mode = true;
    s.u = Field(gl);
    s.theta = Field(gl);
    s.v = Field(gl);
    std::vector<double> up(gl.nx * gl.ny);
    for (int i = 0; i < gl.ny; ++i)
        for (int j = 0; j < gl.nx; ++j)
            up[i * gl.nx + j] = std::sin(M_PI * gl.y(i) / gl.ymax);
    s.u = Field::from_phys(gl, up);
    double a0 = linf(s.u);
    long nst = 40;
    for (long k = 0; k < nst; ++k) step(s, 1e-3);
    double got = linf(s.u) / a0;
    double want = linear_decay_oracle(gl, 1e-3, theta_e, nst);
    out.push_back(detail::check_le("linear diffusion matches the discrete decay oracle",
                                   std::fabs(got / want - 1), 0.02));

    // the reconstructed v satisfies the divergence constraint to second order
    auto dres = [&](int ny) {
        Grid gg{32, 2 * M_PI, ny, 8.0};
        Manufactured m;
        SimState ss = m.state(gg, 0, nu, theta_e, false);
        ss.v = reconstruct_v(ss.u, ss.theta);
        return linf(divergence_residual(ss));
    };
    double dr = dres(65) / dres(129);
    out.push_back(detail::check_ge("divergence residual refines at second order", dr, 3.5));

    // snapshot round trip
    Grid gs{16, 2 * M_PI, 33, 6.0};
    Manufactured m;
    SimState ss = m.state(gs, 0.125, nu, theta_e, false);
    ss.mu = 0.003;
    write_snapshot("/tmp/bllab_verify_snap.bin", ss);
    SimState back = read_snapshot("/tmp/bllab_verify_snap.bin");
    double rt = linf(back.u - ss.u) + linf(back.theta - ss.theta) + linf(back.v - ss.v) +
                std::fabs(back.t - ss.t) + std::fabs(back.mu - ss.mu);
    out.push_back(detail::check_le("snapshot round trip is exact", rt, 1e-12));
    return out;
}

inline std::vector<CheckResult> verify_aux() {
    std::vector<CheckResult> out;
    const double nu = 1e-2, theta_e = 1.0;

    // x-independent data: every auxiliary field must stay at zero
    {
        Grid g{16, 2 * M_PI, 65, 8.0};
        SimState s;
        s.grid = g;
        s.nu = nu;
        s.theta_e = theta_e;
        s.u = Field(g);
        s.theta = Field(g);
        std::vector<double> up(g.nx * g.ny), tp(g.nx * g.ny);
        for (int i = 0; i < g.ny; ++i) {
            double y = g.y(i);
            for (int j = 0; j < g.nx; ++j) {
                up[i * g.nx + j] = 0.05 * y * std::exp(-y * y);
                tp[i * g.nx + j] = 0.05 * std::exp(-y * y);
            }
        }
        s.u = Field::from_phys(g, up);
        s.theta = Field::from_phys(g, tp);
        s.v = reconstruct_v(s.u, s.theta);
        AuxState aux(g);
        aux.lambda = dx(s.u);
        aux.varphi = dx(s.theta);
        double worst = 0;
        for (int k = 0; k < 5; ++k) {
            SimState prev = s;
            step(s, 1e-3);
            evolve_W(aux, prev, s, 1e-3);
            worst = std::max({worst, linf(aux.W), linf(aux.U), linf(aux.lambda),
                              linf(aux.varphi)});
        }
        out.push_back(
            detail::check_le("auxiliary fields vanish on x-independent data", worst, 1e-12));
    }

    // the derived-equation residuals shrink under joint (dt, dy) refinement
    {
        auto res_at = [&](int ny, double dt) {
            Grid g{32, 2 * M_PI, ny, 8.0};
            Manufactured m;
            SimState s = m.state(g, 0, nu, theta_e, false);
            AuxState aux(g);
            aux.lambda = dx(s.u);
            aux.varphi = dx(s.theta);
            // a few spin-up steps so W is nontrivial
            for (int k = 0; k < 3; ++k) {
                SimState prev = s;
                step(s, dt);
                evolve_W(aux, prev, s, dt);
            }
            SimState prev = s;
            AuxState pa = aux;
            step(s, dt);
            evolve_W(aux, prev, s, dt);
            return linf(residual_U(prev, pa, s, aux, dt)) +
                   linf(residual_lambda(prev, pa, s, aux, dt)) +
                   linf(residual_varphi(prev, pa, s, aux, dt));
        };
        double r1 = res_at(65, 2e-3), r2 = res_at(129, 1e-3);
        out.push_back(detail::check_ge("derived-equation residuals refine at first order",
                                       std::log2(r1 / r2), 0.8));
    }

    // the inner-product decomposition matches its term-by-term sum
    {
        Grid g{32, 2 * M_PI, 65, 8.0};
        Manufactured m;
        SimState s = m.state(g, 0, nu, theta_e, false);
        AuxState aux(g);
        aux.lambda = dx(s.u);
        aux.varphi = dx(s.theta);
        double dt = 1e-3;
        SimState prev = s;
        AuxState pa = aux;
        step(s, dt);
        evolve_W(aux, prev, s, dt);
        PhaseState ph{0.1, 2.0, 0.0};
        auto d = decompose_inner_lambda(prev, pa, s, aux, dt, ph, 1.0, 1.0);
        double scale = std::fabs(d.lhs_dt) + std::fabs(d.lhs_mu) + std::fabs(d.lhs_diff);
        for (const auto& [n, v] : d.terms) scale += std::fabs(v);
        double mis = std::fabs(d.lhs_total() - d.rhs_total());
        out.push_back(detail::check_le("decomposition terms resum to the left side",
                                       mis / std::max(scale, 1e-300), 0.5));
    }
    return out;
}

inline std::vector<CheckResult> verify_monitor() {
    std::vector<CheckResult> out;
    Grid g{16, 2 * M_PI, 33, 6.0};

    MuRhs r0 = mu_rhs(Field(g), Field(g), 0.0, 1.0);
    out.push_back(detail::check_le("radius ODE right side is 1 on zero fields",
                                   std::fabs(r0.total - 1.0), 1e-14));

    MuState ms;
    PhaseState ph{0.1, 2.0, 0.0};
    advance_mu(ms, 1.0, 0.01, ph);
    advance_mu(ms, 2.0, 0.01, ph);
    out.push_back(detail::check_le("radius ODE integrates with the explicit Euler rule",
                                   std::fabs(ms.mu - 0.03), 1e-15));

    MuState z;
    bool crossed = false;
    for (int k = 0; k < 200 && !z.t_star; ++k) advance_mu(z, 1.0, 0.001, ph);
    crossed = z.t_star.has_value() && std::fabs(*z.t_star - 0.05) < 1e-12;
    out.push_back({"unit right side reaches the radius cap at delta/gamma", crossed,
                   z.t_star ? "t* = " + std::to_string(*z.t_star) : "no crossing"});

    EnergyLedger led;
    led.add("x@s=1.0000,k=0", 0.0, 2.0, 3.0);
    led.add("x@s=1.0000,k=0", 0.5, 4.0, 1.0);
    led.add("x@s=1.0000,k=0", 1.0, 1.0, 1.0);
    const auto& smp = led.at("x@s=1.0000,k=0", 2);
    bool ok = std::fabs(smp.l2 - (4 * 0.5 + 16 * 0.5)) < 1e-15 &&
              std::fabs(smp.l2mu - (3 * 4 * 0.5 + 1 * 16 * 0.5)) < 1e-15 && smp.linf == 4.0;
    out.push_back({"ledger accumulates left-endpoint time integrals", ok,
                   ok ? "closed form reproduced" : "accumulator mismatch"});

    // a zero-amplitude run terminates exactly at T* = delta/gamma with trivial estimates
    RunConfig cfg;
    cfg.nx = 16;
    cfg.ny = 33;
    cfg.ymax = 6.0;
    cfg.amplitude = 0;
    cfg.epsilon = 0;
    cfg.delta = 0.1;
    cfg.gamma = 2.0;
    cfg.dt = 0.0025;
    cfg.t_end = 0.1;
    cfg.out_dir.clear();
    RunResult rr = run_simulation(cfg);
    bool tstar_ok = rr.termination == "t_star" && rr.mu.t_star &&
                    std::fabs(*rr.mu.t_star - 0.05) < 1e-12;
    out.push_back({"zero data exhausts the radius at exactly delta/gamma", tstar_ok,
                   rr.mu.t_star ? "t* = " + std::to_string(*rr.mu.t_star)
                                : "terminated: " + rr.termination});
    bool all_triv = true;
    for (const char* tag : kInequalities) {
        for (const auto& p : proposition_slack(rr.ledger, tag, rr.params))
            all_triv = all_triv && p.pass;
    }
    out.push_back({"every tracked estimate holds on the zero run", all_triv,
                   all_triv ? "all inequalities pass" : "an inequality failed on zero data"});
    return out;
}

inline std::vector<CheckResult> verify_all() {
    std::vector<CheckResult> out;
    for (auto* fn : {verify_dyadic, verify_spaces, verify_solver, verify_aux, verify_monitor}) {
        auto v = fn();
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

inline std::vector<CheckResult> verify_suite(const std::string& name) {
    if (name == "dyadic") return verify_dyadic();
    if (name == "spaces") return verify_spaces();
    if (name == "solver") return verify_solver();
    if (name == "aux") return verify_aux();
    if (name == "monitor") return verify_monitor();
    if (name == "all") return verify_all();
    throw ConfigError("unknown verify suite: " + name +
                      " (expected dyadic|spaces|solver|aux|monitor|all)");
}

} // namespace bllab
