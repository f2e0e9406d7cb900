#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "dyadic.hpp"
#include "field.hpp"
#include "gevrey.hpp"

namespace bllab {

struct SolverAbort : std::runtime_error {
    std::string reason; // "positivity" | "nan"
    SolverAbort(std::string r, const std::string& msg)
        : std::runtime_error(msg), reason(std::move(r)) {}
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimState {
    Grid grid;
    double t = 0;
    double mu = 0;
    double nu = 0;
    double theta_e = 1.0;
    bool linear_mode = false;
    Field u, theta, v;

    explicit SimState(const Grid& g) : grid(g), u(g), theta(g), v(g) {}
    SimState() = default;
};

// ---- boundary conditions -----------------------------------------------------

// u = v = 0 at the wall, one-sided zero-slope for theta at the wall,
// homogeneous Dirichlet for u and theta at Ymax.
inline void apply_boundary(SimState& s) {
    const Grid& g = s.grid;
    int top = g.ny - 1;
    for (int j = 0; j < g.nx; ++j) {
        s.u.at(0, j) = 0;
        s.u.at(top, j) = 0;
        if (!s.v.empty()) s.v.at(0, j) = 0;
        s.theta.at(0, j) = (4.0 * s.theta.at(1, j) - s.theta.at(2, j)) / 3.0;
        s.theta.at(top, j) = 0;
    }
}

// ---- diagnostic v from the divergence constraint ------------------------------

inline Field reconstruct_v(const Field& u, const Field& theta) {
    Field thy = dy(theta);
    Field r = cumtrapz_y(multiply(dy(u), dy(u)) - dx(u));
    const Grid& g = u.grid();
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) r.at(i, j) += thy.at(i, j) - thy.at(0, j);
    return r;
}

inline Field divergence_residual(const SimState& s) {
    return dx(s.u) + dy(s.v) - dy2(s.theta) - multiply(dy(s.u), dy(s.u));
}

// ---- time step -----------------------------------------------------------------

inline double cfl_dt(const SimState& s, double dt_max, double c_cfl = 0.4) {
    double best = -1;
    auto consider = [&](double num, double den) {
        if (den > 1e-300) {
            double cand = num / den;
            best = best < 0 ? cand : std::min(best, cand);
        }
    };
    consider(s.grid.dx(), linf(s.u));
    consider(s.grid.dy(), linf(s.v));
    consider(s.grid.dy() * s.grid.dy(), linf(s.theta));
    if (best < 0) return dt_max;
    return std::min(dt_max, c_cfl * best);
}

struct StepForcing {
    const Field* fu = nullptr;
    const Field* ftheta = nullptr;
};

namespace detail {

// Thomas solve of (I - dt a(y) d^2/dy^2) f = rhs on one x-column.
// wall_dirichlet: f(0)=0; otherwise a ghost-node zero-slope wall row.
// Top row is always Dirichlet f(Ymax)=0.
inline void heat_column(std::vector<double>& f, const std::vector<double>& a, double dt,
                        double h, bool wall_dirichlet) {
    int n = (int)f.size();
    std::vector<double> lo(n, 0), di(n, 1), up(n, 0);
    for (int i = 1; i < n - 1; ++i) {
        double al = dt * a[i] / (h * h);
        lo[i] = -al;
        di[i] = 1 + 2 * al;
        up[i] = -al;
    }
    if (wall_dirichlet) {
        di[0] = 1;
        f[0] = 0;
    } else { // ghost f(-1) = f(1): d2f(0) = (2 f1 - 2 f0)/h^2
        double al = dt * a[0] / (h * h);
        di[0] = 1 + 2 * al;
        up[0] = -2 * al;
    }
    di[n - 1] = 1;
    f[n - 1] = 0;
    for (int i = 1; i < n; ++i) {
        double w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        f[i] -= w * f[i - 1];
    }
    f[n - 1] /= di[n - 1];
    for (int i = n - 2; i >= 0; --i) f[i] = (f[i] - up[i] * f[i + 1]) / di[i];
}

inline void check_state(const SimState& s) {
    if (has_nan(s.u) || has_nan(s.theta) || has_nan(s.v))
        throw SolverAbort("nan", "non-finite state detected");
    auto th = s.theta.to_phys();
    double mn = 1e300;
    for (double v : th) mn = std::min(mn, v);
    if (mn + s.theta_e < s.theta_e / 2)
        throw SolverAbort("positivity",
                          "theta + theta_E dropped below theta_E/2 (min margin " +
                              std::to_string((mn + s.theta_e) / s.theta_e) + ")");
}

} // namespace detail

// One IMEX step: explicit advection/source, exact Fourier factor for nu dxx,
// implicit y-diffusion with the coefficient theta + theta_E frozen at step start.
inline void step(SimState& s, double dt, const StepForcing& forcing = {}) {
    const Grid& g = s.grid;
    Field ustar = s.u, thstar = s.theta;

    if (!s.linear_mode) {
        Field uy = dy(s.u), thy = dy(s.theta);
        Field nu_adv = multiply(s.u, dx(s.u)) + multiply(s.v, uy);
        Field nth = multiply(s.u, dx(s.theta)) + multiply(s.v, thy);
        Field thpe = s.theta;
        thpe.add_const(s.theta_e);
        Field src = multiply(thpe, multiply(uy, uy));
        ustar -= dt * nu_adv;
        thstar += dt * (src - nth);
    }
    if (forcing.fu) ustar += dt * *forcing.fu;
    if (forcing.ftheta) thstar += dt * *forcing.ftheta;

    if (s.nu > 0) {
        for (int j = 0; j < g.nx; ++j) {
            double fac = std::exp(-s.nu * g.xi(j) * g.xi(j) * dt);
            for (int i = 0; i < g.ny; ++i) {
                ustar.at(i, j) *= fac;
                thstar.at(i, j) *= fac;
            }
        }
    }

    // frozen-coefficient implicit diffusion, columnwise in physical space
    auto coef = s.theta.to_phys();
    auto up = ustar.to_phys(), thp = thstar.to_phys();
    std::vector<double> a(g.ny), cu(g.ny), cth(g.ny);
    for (int j = 0; j < g.nx; ++j) {
        for (int i = 0; i < g.ny; ++i) {
            a[i] = s.linear_mode ? s.theta_e : coef[size_t(i) * g.nx + j] + s.theta_e;
            cu[i] = up[size_t(i) * g.nx + j];
            cth[i] = thp[size_t(i) * g.nx + j];
        }
        detail::heat_column(cu, a, dt, g.dy(), true);
        detail::heat_column(cth, a, dt, g.dy(), false);
        for (int i = 0; i < g.ny; ++i) {
            up[size_t(i) * g.nx + j] = cu[i];
            thp[size_t(i) * g.nx + j] = cth[i];
        }
    }
    s.u = Field::from_phys(g, up);
    s.theta = Field::from_phys(g, thp);

    // boundary rows are already exact: the Dirichlet solves pin u at both walls
    // and theta at the top, the ghost-node row enforces the zero-slope wall for
    // theta, and the reconstruction below vanishes at y = 0 by construction
    s.t += dt;
    s.v = reconstruct_v(s.u, s.theta);
    detail::check_state(s);
}

// ---- initial data --------------------------------------------------------------

struct InitSpec {
    double amplitude = 0;    // u scale
    double delta = 0.1;      // x-spectrum decay exponent exp(-delta <xi>^{1/2})
    double epsilon = 0;      // target size of the lifted dy(theta0) norm
    double s = 2.6;          // regularity at which epsilon is measured
    double theta_e = 1.0;
    double spectral_tail = 0; // extra <xi>^{-r} factor keeping lifted data in Sobolev
};

inline std::pair<Field, Field> make_initial(const InitSpec& spec, const Grid& g) {
    Field u0(g), th0(g);
    if (spec.amplitude == 0 && spec.epsilon == 0) return {u0, th0};
    std::vector<double> amp(g.nx, 0.0);
    for (int j = 0; j < g.nx; ++j) {
        if (j == g.nx / 2) continue;
        double br = angle_bracket(g.xi(j));
        amp[j] = std::exp(-spec.delta * std::sqrt(br)) * std::pow(br, -spec.spectral_tail);
    }
    for (int i = 0; i < g.ny; ++i) {
        double y = g.y(i);
        double pu = y * std::exp(-y * y);
        double pt = std::exp(-y * y);
        for (int j = 0; j < g.nx; ++j) {
            u0.at(i, j) = spec.amplitude * amp[j] * pu;
            th0.at(i, j) = amp[j] * pt;
        }
    }
    if (spec.epsilon > 0) {
        PhaseState ph{spec.delta, 1.0, 0.0};
        WeightParams w0{spec.theta_e, 0.0};
        double base = sobolev_norm(gevrey_lift(dy(th0), ph), {spec.s, 0, true}, w0);
        if (base <= 0) throw ConfigError("make_initial: epsilon > 0 unreachable on this grid");
        th0 *= spec.epsilon / base;
    } else {
        th0 *= 0.0;
    }
    return {u0, th0};
}

// ---- snapshots ------------------------------------------------------------------

inline void write_snapshot(const std::string& path, const SimState& s) {
    nlohmann::json h;
    h["nx"] = s.grid.nx;
    h["lx"] = s.grid.lx;
    h["ny"] = s.grid.ny;
    h["ymax"] = s.grid.ymax;
    h["t"] = s.t;
    h["mu"] = s.mu;
    h["nu"] = s.nu;
    h["theta_e"] = s.theta_e;
    h["linear_mode"] = s.linear_mode;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open snapshot for writing: " + path);
    f << h.dump() << '\n';
    for (const Field* fld : {&s.u, &s.theta, &s.v}) {
        auto p = fld->to_phys();
        f.write(reinterpret_cast<const char*>(p.data()), sizeof(double) * p.size());
    }
}

inline SimState read_snapshot(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open snapshot: " + path);
    std::string line;
    std::getline(f, line);
    auto h = nlohmann::json::parse(line);
    Grid g(h.at("nx").get<int>(), h.at("lx").get<double>(), h.at("ny").get<int>(),
           h.at("ymax").get<double>());
    SimState s(g);
    s.t = h.at("t").get<double>();
    s.mu = h.at("mu").get<double>();
    s.nu = h.at("nu").get<double>();
    s.theta_e = h.at("theta_e").get<double>();
    s.linear_mode = h.value("linear_mode", false);
    std::vector<double> p(size_t(g.nx) * g.ny);
    for (Field* fld : {&s.u, &s.theta, &s.v}) {
        f.read(reinterpret_cast<char*>(p.data()), sizeof(double) * p.size());
        if (!f) throw ConfigError("snapshot truncated: " + path);
        *fld = Field::from_phys(g, p);
    }
    return s;
}

} // namespace bllab
