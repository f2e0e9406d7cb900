#pragma once

#include <map>
#include <string>
#include <vector>

#include "dyadic.hpp"
#include "solver.hpp"

namespace bllab {

// Auxiliary quantities: W is the wall antiderivative of U, evolved by the
// paraproduct transport-diffusion equation with source -dx v; U, lambda and
// varphi are reconstructed from W after every update.
struct AuxState {
    Field W, U, lambda, varphi;
    explicit AuxState(const Grid& g) : W(g), U(g), lambda(g), varphi(g) {}
    AuxState() = default;
};

inline Field compute_lambda(const Field& u, const Field& dy_u, const Field& W) {
    return dx(u) - paraproduct(dy_u, W);
}

inline Field compute_varphi(const Field& theta, const Field& dy_theta, const Field& W) {
    return dx(theta) - paraproduct(dy_theta, W);
}

namespace detail {

// (I - dt theta_E d^2/dy^2) W = rhs per column; W(0)=0 at the wall and
// zero curvature at the top (dy W clamped to its interior slope).
inline void aux_column(std::vector<double>& f, double alpha) {
    int n = (int)f.size();
    std::vector<double> lo(n, 0), di(n, 1), up(n, 0);
    f[0] = 0;
    for (int i = 1; i < n - 2; ++i) {
        lo[i] = -alpha;
        di[i] = 1 + 2 * alpha;
        up[i] = -alpha;
    }
    // row n-2: substituting W_{n-1} = 2W_{n-2} - W_{n-3} zeroes the stencil
    for (int i = 1; i < n - 1; ++i) {
        double w = lo[i] / di[i - 1];
        di[i] -= w * up[i - 1];
        f[i] -= w * f[i - 1];
    }
    f[n - 2] /= di[n - 2];
    for (int i = n - 3; i >= 1; --i) f[i] = (f[i] - up[i] * f[i + 1]) / di[i];
    f[n - 1] = 2 * f[n - 2] - f[n - 3];
}

} // namespace detail

// One IMEX step of dW/dt = -T_u dx W - T_v dy W + T_{theta+theta_E} dy2 W - dx v.
// The constant-coefficient part theta_E dy2 W is implicit, the rest explicit
// with coefficients from the pre-step state; U, lambda, varphi are rebuilt
// from the post-step prognostic fields.
inline void evolve_W(AuxState& aux, const SimState& prev, const SimState& next, double dt) {
    const Grid& g = prev.grid;
    Field rhs = paraproduct(prev.theta, dy2(aux.W)) - paraproduct(prev.u, dx(aux.W)) -
                paraproduct(prev.v, dy(aux.W)) - dx(prev.v);
    Field wstar = aux.W + dt * rhs;

    auto wp = wstar.to_phys();
    std::vector<double> col(g.ny);
    double alpha = dt * prev.theta_e / (g.dy() * g.dy());
    for (int j = 0; j < g.nx; ++j) {
        for (int i = 0; i < g.ny; ++i) col[i] = wp[size_t(i) * g.nx + j];
        detail::aux_column(col, alpha);
        for (int i = 0; i < g.ny; ++i) wp[size_t(i) * g.nx + j] = col[i];
    }
    aux.W = Field::from_phys(g, wp);
    // wall: W = 0 and one-sided zero second derivative (dy U vanishes at y=0)
    for (int j = 0; j < g.nx; ++j) {
        aux.W.at(0, j) = 0;
        aux.W.at(1, j) = (4.0 * aux.W.at(2, j) - aux.W.at(3, j)) / 5.0;
    }
    if (has_nan(aux.W)) throw SolverAbort("nan", "non-finite auxiliary field");

    aux.U = dy(aux.W);
    aux.lambda = compute_lambda(next.u, dy(next.u), aux.W);
    aux.varphi = compute_varphi(next.theta, dy(next.theta), aux.W);
}

// ---- right-hand sides of the derived equations --------------------------------

namespace detail {

// (T_a1 T_b1 - T_{a1 b1})g + (T_a2 T_b2 - T_{a2 b2})g - (T_a3 T_b3 - T_{a3 b3})g
inline Field compose_trio(const Field& a1, const Field& b1, const Field& a2, const Field& b2,
                          const Field& a3, const Field& b3, const Field& g) {
    return para_compose_defect(a1, b1, g) + para_compose_defect(a2, b2, g) -
           para_compose_defect(a3, b3, g);
}

struct Derived {
    Field ux, uy, uyy, uyyy, uxy, uxx, thx, thy, thyy, thyyy, thxy, thxx, vx, vy, thpe;
    explicit Derived(const SimState& s) {
        ux = dx(s.u);
        uy = dy(s.u);
        uyy = dy2(s.u);
        uyyy = dy(uyy);
        uxy = dx(uy);
        uxx = dx(ux);
        thx = dx(s.theta);
        thy = dy(s.theta);
        thyy = dy2(s.theta);
        thyyy = dy(thyy);
        thxy = dx(thy);
        thxx = dx(thx);
        vx = dx(s.v);
        vy = dy(s.v);
        thpe = s.theta;
        thpe.add_const(s.theta_e);
    }
};

} // namespace detail

// Labeled term lists. Each entry is one summand of the derived equation's
// right-hand side (already signed), so the residual is L(f) - sum(terms).
using TermList = std::vector<std::pair<std::string, Field>>;

inline TermList rhs_terms_U(const SimState& s, const AuxState& a) {
    detail::Derived d(s);
    TermList t;
    t.emplace_back("dx_lambda", dx(a.lambda));
    t.emplace_back("T_uxy_W", paraproduct(d.uxy, a.W));
    t.emplace_back("-2uy_uxy", -2.0 * multiply(d.uy, d.uxy));
    t.emplace_back("-dx_thyy", -1.0 * dx(d.thyy));
    t.emplace_back("-T_vy_U", -1.0 * paraproduct(d.vy, a.U));
    t.emplace_back("-T_thy_dyU", -1.0 * paraproduct(d.thy, dy(a.U)));
    return t;
}

inline TermList rhs_terms_lambda(const SimState& s, const AuxState& a) {
    detail::Derived d(s);
    TermList t;
    t.emplace_back("-ux_ux", -1.0 * multiply(d.ux, d.ux));
    t.emplace_back("-T_vx_uy", -1.0 * paraproduct(d.vx, d.uy));
    t.emplace_back("-R_vx_uy", -1.0 * remainder(d.vx, d.uy));
    t.emplace_back("thx_uyy", multiply(d.thx, d.uyy));
    t.emplace_back("-T_uxx_u", -1.0 * paraproduct(d.uxx, s.u));
    t.emplace_back("-R_uxx_u", -1.0 * remainder(d.uxx, s.u));
    t.emplace_back("-T_uxy_v", -1.0 * paraproduct(d.uxy, s.v));
    t.emplace_back("-R_uxy_v", -1.0 * remainder(d.uxy, s.v));
    t.emplace_back("T_dxuyy_th", paraproduct(dx(d.uyy), s.theta));
    t.emplace_back("R_dxuyy_th", remainder(dx(d.uyy), s.theta));
    Field coef = multiply(d.thy, d.uyy) - multiply(d.uy, d.ux) - multiply(d.vy, d.uy);
    t.emplace_back("-T_coef_W", -1.0 * paraproduct(coef, a.W));
    t.emplace_back("-trio_W",
                   -1.0 * detail::compose_trio(s.u, d.uxy, s.v, d.uyy, s.theta, d.uyyy, a.W));
    t.emplace_back("-comm_u_uy_dxW", -1.0 * para_commutator(s.u, d.uy, dx(a.W)));
    t.emplace_back("-comm_v_uy_U", -1.0 * para_commutator(s.v, d.uy, a.U));
    t.emplace_back("comm_th_uy_dyU", para_commutator(s.theta, d.uy, dy(a.U)));
    Field tuyyU = paraproduct(d.uyy, a.U);
    t.emplace_back("2T_thpe_T_uyy_U",
                   2.0 * s.theta_e * tuyyU + 2.0 * paraproduct(s.theta, tuyyU));
    return t;
}

inline TermList rhs_terms_varphi(const SimState& s, const AuxState& a) {
    detail::Derived d(s);
    TermList t;
    t.emplace_back("-ux_thx", -1.0 * multiply(d.ux, d.thx));
    t.emplace_back("-T_vx_thy", -1.0 * paraproduct(d.vx, d.thy));
    t.emplace_back("-R_vx_thy", -1.0 * remainder(d.vx, d.thy));
    t.emplace_back("thx_thyy", multiply(d.thx, d.thyy));
    t.emplace_back("thx_uy2", multiply(d.thx, multiply(d.uy, d.uy)));
    t.emplace_back("2thpe_uy_uxy", 2.0 * multiply(d.thpe, multiply(d.uy, d.uxy)));
    t.emplace_back("-T_thxx_u", -1.0 * paraproduct(d.thxx, s.u));
    t.emplace_back("-R_thxx_u", -1.0 * remainder(d.thxx, s.u));
    t.emplace_back("-T_thxy_v", -1.0 * paraproduct(d.thxy, s.v));
    t.emplace_back("-R_thxy_v", -1.0 * remainder(d.thxy, s.v));
    t.emplace_back("T_dxthyy_th", paraproduct(dx(d.thyy), s.theta));
    t.emplace_back("R_dxthyy_th", remainder(dx(d.thyy), s.theta));
    Field coef = multiply(d.ux, d.thy) - multiply(d.uy, d.thx) +
                 2.0 * multiply(d.thpe, multiply(d.uy, d.uyy));
    t.emplace_back("-T_coef_W", -1.0 * paraproduct(coef, a.W));
    t.emplace_back("-trio_W",
                   -1.0 * detail::compose_trio(s.u, d.thxy, s.v, d.thyy, s.theta, d.thyyy, a.W));
    t.emplace_back("-comm_u_thy_dxW", -1.0 * para_commutator(s.u, d.thy, dx(a.W)));
    t.emplace_back("-comm_v_thy_U", -1.0 * para_commutator(s.v, d.thy, a.U));
    t.emplace_back("comm_th_thy_dyU", para_commutator(s.theta, d.thy, dy(a.U)));
    Field tthyyU = paraproduct(d.thyy, a.U);
    t.emplace_back("2T_thpe_T_thyy_U",
                   2.0 * s.theta_e * tthyyU + 2.0 * paraproduct(s.theta, tthyyU));
    return t;
}

// Prandtl-type transport-diffusion operator applied to f, with the time
// derivative supplied by the caller from consecutive snapshots.
inline Field apply_L(const SimState& s, const Field& f_prev, const Field& f_next, double dt) {
    Field r = (1.0 / dt) * (f_next - f_prev);
    r += paraproduct(s.u, dx(f_prev));
    r += paraproduct(s.v, dy(f_prev));
    // the constant part of the diffusivity acts as a plain multiplier; only the
    // fluctuation goes through the paraproduct (same split as the W evolution)
    Field d2 = dy2(f_prev);
    r -= s.theta_e * d2;
    r -= paraproduct(s.theta, d2);
    return r;
}

namespace detail {

inline Field sum_terms(const TermList& t, const Grid& g) {
    Field r(g);
    for (const auto& [name, f] : t) r += f;
    return r;
}

} // namespace detail

inline Field residual_U(const SimState& s0, const AuxState& a0, const SimState& s1,
                        const AuxState& a1, double dt) {
    if (std::fabs(s1.t - s0.t - dt) > 1e-12 * (1 + std::fabs(s1.t)))
        throw DomainError("residual_U: snapshot spacing mismatch");
    return apply_L(s0, a0.U, a1.U, dt) - detail::sum_terms(rhs_terms_U(s0, a0), s0.grid);
}

inline Field residual_lambda(const SimState& s0, const AuxState& a0, const SimState& s1,
                             const AuxState& a1, double dt) {
    if (std::fabs(s1.t - s0.t - dt) > 1e-12 * (1 + std::fabs(s1.t)))
        throw DomainError("residual_lambda: snapshot spacing mismatch");
    return apply_L(s0, a0.lambda, a1.lambda, dt) -
           detail::sum_terms(rhs_terms_lambda(s0, a0), s0.grid);
}

inline Field residual_varphi(const SimState& s0, const AuxState& a0, const SimState& s1,
                             const AuxState& a1, double dt) {
    if (std::fabs(s1.t - s0.t - dt) > 1e-12 * (1 + std::fabs(s1.t)))
        throw DomainError("residual_varphi: snapshot spacing mismatch");
    return apply_L(s0, a0.varphi, a1.varphi, dt) -
           detail::sum_terms(rhs_terms_varphi(s0, a0), s0.grid);
}

// ---- weighted inner-product decompositions -------------------------------------

struct InnerDecomposition {
    // left side: < dt f_Phi, f_Phi > + gamma mudot < <D>^{1/2} f_Phi, f_Phi >
    //            - theta_E < dy2 f_Phi, f_Phi >, all in H^{s,0}_Psi
    double lhs_dt = 0, lhs_mu = 0, lhs_diff = 0;
    std::vector<std::pair<std::string, double>> terms;
    double lhs_total() const { return lhs_dt + lhs_mu + lhs_diff; }
    double rhs_total() const {
        double s = 0;
        for (auto& [n, v] : terms) s += v;
        return s;
    }
};

namespace detail {

inline InnerDecomposition decompose_generic(const SimState& s0, const Field& f0, const Field& f1,
                                            double dt, const PhaseState& ph, double mudot,
                                            double snorm, const TermList& transport_terms,
                                            const TermList& rhs_terms) {
    if (ph.radius() < 0) throw PastTStarError("decompose: past T*");
    PhaseState ph1{ph.delta, ph.gamma, ph.mu + dt * mudot};
    WeightParams wp{s0.theta_e, s0.t};
    Field fP = gevrey_lift(f0, ph);
    InnerDecomposition d;
    d.lhs_dt = weighted_inner((1.0 / dt) * (gevrey_lift(f1, ph1) - fP), fP, snorm, wp);
    d.lhs_mu = ph.gamma * mudot * weighted_inner(multiplier_Ds(fP, 0.5), fP, snorm, wp);
    d.lhs_diff = -s0.theta_e * weighted_inner(dy2(fP), fP, snorm, wp);
    for (const auto& [name, fld] : transport_terms)
        d.terms.emplace_back(name, weighted_inner(gevrey_lift(fld, ph), fP, snorm, wp));
    for (const auto& [name, fld] : rhs_terms)
        d.terms.emplace_back(name, weighted_inner(gevrey_lift(fld, ph), fP, snorm, wp));
    return d;
}

inline TermList transport_terms(const SimState& s, const Field& f) {
    Field thpe = s.theta;
    thpe.add_const(s.theta_e);
    TermList t;
    t.emplace_back("-T_u_dxf", -1.0 * paraproduct(s.u, dx(f)));
    t.emplace_back("-T_v_dyf", -1.0 * paraproduct(s.v, dy(f)));
    t.emplace_back("T_th_dy2f", paraproduct(s.theta, dy2(f)));
    return t;
}

} // namespace detail

inline InnerDecomposition decompose_inner_U(const SimState& s0, const AuxState& a0,
                                            const SimState& s1, const AuxState& a1, double dt,
                                            const PhaseState& ph, double mudot, double s) {
    return detail::decompose_generic(s0, a0.U, a1.U, dt, ph, mudot, s,
                                     detail::transport_terms(s0, a0.U), rhs_terms_U(s0, a0));
}

inline InnerDecomposition decompose_inner_lambda(const SimState& s0, const AuxState& a0,
                                                 const SimState& s1, const AuxState& a1,
                                                 double dt, const PhaseState& ph, double mudot,
                                                 double s) {
    return detail::decompose_generic(s0, a0.lambda, a1.lambda, dt, ph, mudot, s + 0.5,
                                     detail::transport_terms(s0, a0.lambda),
                                     rhs_terms_lambda(s0, a0));
}

inline InnerDecomposition decompose_inner_varphi(const SimState& s0, const AuxState& a0,
                                                 const SimState& s1, const AuxState& a1,
                                                 double dt, const PhaseState& ph, double mudot,
                                                 double s) {
    return detail::decompose_generic(s0, a0.varphi, a1.varphi, dt, ph, mudot, s,
                                     detail::transport_terms(s0, a0.varphi),
                                     rhs_terms_varphi(s0, a0));
}

} // namespace bllab
