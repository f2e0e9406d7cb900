#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "field.hpp"
#include "gevrey.hpp"

namespace bllab {

// ---- partition of unity ------------------------------------------------------
//
// chi: even, 1 on [0,3/4], 0 on [4/3,inf), smooth mollified-step transition.
// phi(xi) = chi(xi/2) - chi(xi), supported in [3/4, 8/3]; telescoping gives
// chi(xi) + sum_{k>=0} phi(2^{-k} xi) = 1 for every xi once enough blocks
// are summed.

namespace detail {

inline double estep(double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; }

inline double smooth_step(double x) { // 0 for x<=0, 1 for x>=1
    double a = estep(x), b = estep(1.0 - x);
    return a / (a + b);
}

} // namespace detail

inline double lp_chi(double xi) {
    double a = std::fabs(xi);
    if (a <= 0.75) return 1.0;
    if (a >= 4.0 / 3.0) return 0.0;
    return 1.0 - detail::smooth_step((a - 0.75) / (4.0 / 3.0 - 0.75));
}

inline double lp_phi(double xi) { return lp_chi(xi / 2.0) - lp_chi(xi); }

struct DyadicPartition {
    Grid grid;
    int kmax = -1; // blocks -1..kmax cover every grid frequency
};

inline DyadicPartition make_partition(const Grid& g) {
    DyadicPartition p{g, 0};
    // smallest K with chi(2^{-(K+1)} xi_max) = 1, so the telescoped sum is 1
    while (std::ldexp(g.xi_max(), -(p.kmax + 1)) > 0.75) ++p.kmax;
    return p;
}

inline Field apply_multiplier(const Field& f, const std::function<double(double)>& m) {
    const Grid& g = f.grid();
    Field r(g);
    std::vector<double> mv(g.nx);
    for (int j = 0; j < g.nx; ++j) mv[j] = m(std::fabs(g.xi(j)));
    for (int i = 0; i < g.ny; ++i)
        for (int j = 0; j < g.nx; ++j) r.at(i, j) = mv[j] * f.at(i, j);
    return r;
}

// Delta_k
inline Field dyadic_block(const Field& f, int k) {
    if (k <= -2) return Field(f.grid());
    if (k == -1) return apply_multiplier(f, [](double a) { return lp_chi(a); });
    return apply_multiplier(f, [k](double a) { return lp_phi(std::ldexp(a, -k)); });
}

// S_k, with the partial-sum convention: S_k = sum_{j <= k-1} Delta_j, which
// vanishes for k <= -1 (this is what makes the product decomposition exact)
inline Field low_freq_cutoff(const Field& f, int k) {
    if (k <= -1) return Field(f.grid());
    return apply_multiplier(f, [k](double a) { return lp_chi(std::ldexp(a, -k)); });
}

// T_f g
inline Field paraproduct(const Field& f, const Field& g) {
    f.check(g);
    DyadicPartition p = make_partition(f.grid());
    Field acc(f.grid());
    for (int k = 1; k <= p.kmax; ++k) {
        Field dg = dyadic_block(g, k);
        if (max_abs_coeff(dg) == 0) continue;
        acc += multiply(low_freq_cutoff(f, k - 1), dg);
    }
    return acc;
}

// adjoint of T_f with respect to the x inner product:
// (T_f)^* g = sum_k Delta_k (S_{k-1} f . g)
inline Field paraproduct_adjoint(const Field& f, const Field& g) {
    f.check(g);
    DyadicPartition p = make_partition(f.grid());
    Field acc(f.grid());
    for (int k = 1; k <= p.kmax; ++k)
        acc += dyadic_block(multiply(low_freq_cutoff(f, k - 1), g), k);
    return acc;
}

// R(f,g)
inline Field remainder(const Field& f, const Field& g) {
    f.check(g);
    DyadicPartition p = make_partition(f.grid());
    std::vector<Field> fb(p.kmax + 2), gb(p.kmax + 2);
    for (int k = -1; k <= p.kmax; ++k) {
        fb[k + 1] = dyadic_block(f, k);
        gb[k + 1] = dyadic_block(g, k);
    }
    Field acc(f.grid());
    for (int k = -1; k <= p.kmax; ++k)
        for (int kp = std::max(-1, k - 1); kp <= std::min(p.kmax, k + 1); ++kp) {
            if (max_abs_coeff(fb[kp + 1]) == 0 || max_abs_coeff(gb[k + 1]) == 0) continue;
            acc += multiply(fb[kp + 1], gb[k + 1]);
        }
    return acc;
}

// [T_a; T_b] g
inline Field para_commutator(const Field& a, const Field& b, const Field& g) {
    return paraproduct(a, paraproduct(b, g)) - paraproduct(b, paraproduct(a, g));
}

// (T_a T_b - T_{ab}) g
inline Field para_compose_defect(const Field& a, const Field& b, const Field& g) {
    return paraproduct(a, paraproduct(b, g)) - paraproduct(multiply(a, b), g);
}

// ---- operator-norm ratios for the paraproduct/commutator estimates ----------

struct CommutatorReport {
    double ratio_para = 0;       // T_a f at s vs |a|_sigma |f|_s
    double ratio_adjoint = 0;    // (T_a)^* f
    double ratio_remainder = 0;  // R(a,f) at s vs |a|_{s1} |f|_{s2}
    double ratio_compose = 0;    // (T_a T_b - T_{ab}) f, b := f here
    double ratio_multiplier = 0; // [<D>^s; T_a] f in L2
    double ratio_skew = 0;       // (T_a - (T_a)^*) f
    double ratio_comm = 0;       // [T_a; T_b] f, b := f here
    double ratio_phase = 0;      // (T_a dx f)_Phi - T_a dx f_Phi vs radius * ...
    bool inconsistency = false;  // some right side vanished with nonzero left side
};

inline Field multiplier_Ds(const Field& f, double s) {
    return apply_multiplier(f, [s](double a) { return std::pow(angle_bracket(a), s); });
}

inline CommutatorReport commutator_suite(const Field& a, const Field& f, double s, double sigma,
                                         const PhaseState& phase) {
    CommutatorReport rep;
    WeightParams unw{1.0, 0.0};
    NormSpec plain{0, 0, false};
    auto hs = [&](const Field& x, double ss) {
        NormSpec n = plain;
        n.s = ss;
        return sobolev_norm(x, n, unw);
    };
    Field aP = gevrey_lift(a, phase), fP = gevrey_lift(f, phase);
    auto ratio = [&](double lhs, double rhs) {
        if (rhs == 0) {
            if (lhs > 1e-12) rep.inconsistency = true;
            return 0.0;
        }
        return lhs / rhs;
    };

    double na_sig = hs(aP, sigma), nf_s = hs(fP, s), nf_sm1 = hs(fP, s - 1);

    rep.ratio_para = ratio(hs(gevrey_lift(paraproduct(a, f), phase), s), na_sig * nf_s);
    rep.ratio_adjoint = ratio(hs(gevrey_lift(paraproduct_adjoint(a, f), phase), s), na_sig * nf_s);
    // remainder bound with s1 = sigma, s2 = s (s1+s2 > s+1/2 for sigma > 1/2)
    rep.ratio_remainder = ratio(hs(gevrey_lift(remainder(a, f), phase), s), na_sig * nf_s);
    rep.ratio_compose = ratio(hs(gevrey_lift(para_compose_defect(a, f, f), phase), s),
                              na_sig * hs(fP, sigma) * nf_sm1);
    rep.ratio_multiplier =
        ratio(hs(gevrey_lift(multiplier_Ds(paraproduct(a, f), s) - paraproduct(a, multiplier_Ds(f, s)), phase), 0),
              na_sig * nf_sm1);
    rep.ratio_skew = ratio(hs(gevrey_lift(paraproduct(a, f) - paraproduct_adjoint(a, f), phase), s),
                           na_sig * nf_sm1);
    rep.ratio_comm = ratio(hs(gevrey_lift(para_commutator(a, f, f), phase), s),
                           na_sig * hs(fP, sigma) * nf_sm1);
    double radius = phase.radius();
    rep.ratio_phase = ratio(hs(gevrey_lift(paraproduct(a, dx(f)), phase) - paraproduct(a, dx(fP)), s),
                            radius * na_sig * hs(fP, s + 0.5));
    return rep;
}

} // namespace bllab
