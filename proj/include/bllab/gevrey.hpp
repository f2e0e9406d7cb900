#pragma once

#include <cmath>
#include <stdexcept>

#include "field.hpp"

namespace bllab {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PastTStarError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- Gaussian weight --------------------------------------------------------

struct WeightParams {
    double theta_e = 1.0;
    double t = 0.0;
};

inline double weight_psi(double t, double y, double theta_e) {
    if (theta_e <= 0 || t < 0 || y < 0) throw DomainError("weight_psi: invalid input");
    return y * y / (16.0 * theta_e * (1.0 + t));
}

inline double weight_psi_dt(double t, double y, double theta_e) {
    return -y * y / (16.0 * theta_e * (1.0 + t) * (1.0 + t));
}

inline double weight_psi_dy(double t, double y, double theta_e) {
    return y / (8.0 * theta_e * (1.0 + t));
}

// ---- phase ------------------------------------------------------------------

struct PhaseState {
    double delta = 0;
    double gamma = 0;
    double mu = 0;
    double radius() const { return delta - gamma * mu; }
};

inline double angle_bracket(double xi) { return std::sqrt(1.0 + xi * xi); }

inline double phase_symbol(double xi, const PhaseState& p) {
    if (p.radius() < -1e-15) throw PastTStarError("phase_symbol: radius is negative (past T*)");
    return p.radius() * std::sqrt(angle_bracket(xi));
}

inline Field gevrey_lift(const Field& f, const PhaseState& p) {
    const Grid& g = f.grid();
    double mx = p.radius() * std::sqrt(angle_bracket(g.xi_max()));
    if (mx > 700.0)
        throw DomainError("gevrey_lift: multiplier overflow; reduce delta or grid cutoff");
    Field r(g);
    std::vector<double> ph(g.nx);
    for (int j = 0; j < g.nx; ++j) ph[j] = std::exp(phase_symbol(g.xi(j), p));
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) r.at(i, j) = ph[j] * f.at(i, j);
    return r;
}

// ---- norms ------------------------------------------------------------------

struct NormSpec {
    double s = 0;
    int k_order = 0; // number of y-derivative layers summed (0..2)
    bool weighted = true;
};

struct NormResult {
    double value = 0;
    bool boundary_warning = false; // weighted norm with non-decayed far field
};

namespace detail {

inline double layer_norm2(const Field& f, double s, bool weighted, const WeightParams& wp,
                          bool* warn) {
    const Grid& g = f.grid();
    double total = 0;
    std::vector<double> xw(g.nx);
    for (int j = 0; j < g.nx; ++j) xw[j] = std::pow(angle_bracket(g.xi(j)), 2.0 * s);
    for (int i = 0; i < g.ny; ++i) {
        double row = 0;
        for (int j = 0; j < g.nx; ++j) row += xw[j] * std::norm(f.at(i, j));
        double w = weighted ? std::exp(2.0 * weight_psi(wp.t, g.y(i), wp.theta_e)) : 1.0;
        if (warn && weighted && i == g.ny - 1 && w * row * g.lx > 1e-12) *warn = true;
        total += g.wy(i) * w * row;
    }
    return total * g.lx;
}

} // namespace detail

inline NormResult sobolev_norm_full(const Field& f, const NormSpec& spec, const WeightParams& wp) {
    NormResult r;
    Field layer = f;
    for (int l = 0; l <= spec.k_order; ++l) {
        if (l > 0) layer = dy(layer);
        r.value += std::sqrt(detail::layer_norm2(layer, spec.s, spec.weighted, wp, &r.boundary_warning));
    }
    return r;
}

inline double sobolev_norm(const Field& f, const NormSpec& spec, const WeightParams& wp) {
    return sobolev_norm_full(f, spec, wp).value;
}

// weighted H^{s,0}_Psi pairing (real part)
inline double weighted_inner(const Field& a, const Field& b, double s, const WeightParams& wp) {
    a.check(b);
    const Grid& g = a.grid();
    double total = 0;
    std::vector<double> xw(g.nx);
    for (int j = 0; j < g.nx; ++j) xw[j] = std::pow(angle_bracket(g.xi(j)), 2.0 * s);
    for (int i = 0; i < g.ny; ++i) {
        double row = 0;
        for (int j = 0; j < g.nx; ++j)
            row += xw[j] * (a.at(i, j) * std::conj(b.at(i, j))).real();
        total += g.wy(i) * std::exp(2.0 * weight_psi(wp.t, g.y(i), wp.theta_e)) * row;
    }
    return total * g.lx;
}

// sup over y of the (unweighted) H^s_x norm
inline double linf_y_hs_x(const Field& f, double s) {
    const Grid& g = f.grid();
    double best = 0;
    for (int i = 0; i < g.ny; ++i) {
        double row = 0;
        for (int j = 0; j < g.nx; ++j)
            row += std::pow(angle_bracket(g.xi(j)), 2.0 * s) * std::norm(f.at(i, j));
        best = std::max(best, g.lx * row);
    }
    return std::sqrt(best);
}

// ---- time-integrated norms ---------------------------------------------------

struct TimeAccumulator {
    int p = 2;          // 2 or numeric_limits-style infinity flag via p=0
    bool infinity = false;
    double value = 0;

    static TimeAccumulator l2() { return {2, false, 0}; }
    static TimeAccumulator linf() { return {2, true, 0}; }
};

inline void accumulate_time_norm(TimeAccumulator& acc, double norm_value, double dt,
                                 double weight_value = 1.0) {
    if (weight_value < 0) throw DomainError("accumulate_time_norm: negative weight");
    if (acc.infinity) {
        acc.value = std::max(acc.value, norm_value);
    } else {
        if (dt < 0) throw DomainError("accumulate_time_norm: negative dt");
        acc.value += weight_value * norm_value * norm_value * dt;
    }
}

} // namespace bllab
