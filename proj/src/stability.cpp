#include "shipctl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shipctl/cubic.hpp"
#include "shipctl/error.hpp"
#include "shipctl/parallel.hpp"

namespace shipctl {

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "Stable";
        case Verdict::Unstable: return "Unstable";
        case Verdict::Marginal: return "Marginal";
    }
    return "?";
}

const char* to_string(XtCase c) {
    switch (c) {
        case XtCase::Case1: return "Case1";
        case XtCase::Case2: return "Case2";
        case XtCase::Case3: return "Case3";
        case XtCase::Case4: return "Case4";
        case XtCase::Uncontrollable: return "Uncontrollable";
        case XtCase::DegenerateBoundaryLine: return "DegenerateBoundaryLine";
    }
    return "?";
}

double LinearizationData::max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues) m = std::max(m, l.real());
    return m;
}

LinearizationData linearize(const ThrusterModel& model, const ControlGains& gains, double u0) {
    LinearizationData d;
    d.blocks = model.linear_blocks();
    d.u0 = u0;
    const ThrustSeries ts = model.thrust_series(u0);
    d.tau0 = ts.value;
    d.eps_r = model.scaled(gains.eps_r);
    d.eps_psi = model.scaled(gains.eps_psi);
    const auto& m = model.params().mass;
    const auto& b = d.blocks;

    const double p11 = (2.0 * model.rescaled_hull().X_uu * u0 + ts.d1) / (m.m + m.m_uu);
    const double p22 = b.p22u * u0;
    const double p23 = b.p23u * u0 + b.q23 * d.tau0 * d.eps_r;
    const double p24 = b.q23 * d.tau0 * d.eps_psi;
    const double p32 = b.p32u * u0;
    const double p33 = b.p33u * u0 + b.q33 * d.tau0 * d.eps_r;
    const double p34 = b.q33 * d.tau0 * d.eps_psi;
    d.A << p11, 0, 0, 0,
           0, p22, p23, p24,
           0, p32, p33, p34,
           0, 0, 1, 0;

    d.c0 = p34 * p22 - p24 * p32;
    d.c1 = p22 * p33 - p23 * p32 - p34;
    d.c2 = -p22 - p33;
    const auto roots = cubic_roots(d.c2, d.c1, d.c0);
    d.eigenvalues = {std::complex<double>(p11), roots[0], roots[1], roots[2]};
    return d;
}

RouthHurwitz routh_hurwitz(const LinearizationData& lin) {
    RouthHurwitz rh;
    const double p11 = lin.A(0, 0);
    if (lin.eps_psi == 0.0) {
        rh.structural_zero = true;
        rh.margin = std::min({-p11, lin.c2, lin.c1});
    } else {
        rh.margin = std::min({-p11, lin.c2, lin.c0, lin.c2 * lin.c1 - lin.c0});
    }
    if (std::abs(rh.margin) <= 1e-9)
        rh.verdict = Verdict::Marginal;
    else
        rh.verdict = rh.margin > 0.0 ? Verdict::Stable : Verdict::Unstable;
    return rh;
}

BoundaryCoeffs boundary_coeffs(const ThrusterModel& model, double u0) {
    const LinearBlocks b = model.linear_blocks();
    const double tau = model.thrust(u0);
    const double s22 = b.p22u + b.p33u;
    const double cross = b.p32u * b.q23 - b.p22u * b.q33;
    const double det = b.p23u * b.p32u - b.p22u * b.p33u;
    BoundaryCoeffs K;
    K.K11 = b.q33 * b.q33 * tau * tau;
    K.K02 = b.q33 * cross * u0 * tau * tau;
    K.K01 = (s22 * cross + b.q33 * det) * u0 * u0 * tau;
    K.K10 = (s22 * b.q33 + cross) * u0 * tau;
    K.K00 = s22 * det * u0 * u0 * u0;
    return K;
}

double boundary_eps_psi(const ThrusterModel& model, double u0, double eps_r) {
    const BoundaryCoeffs K = boundary_coeffs(model, u0);
    const double er = model.scaled(eps_r);
    const double den = K.K11 * er + K.K10;
    if (std::abs(den) < 1e-14) throw Error(ErrorKind::AtAsymptote, "at asymptote eps_r*");
    return -(K.K02 * er * er + K.K01 * er + K.K00) / den * model.L_pp();
}

std::pair<double, double> XtClassification::stable_window() const {
    switch (verdict) {
        case XtCase::Case1:
        case XtCase::Case2:
        case XtCase::Case3:
        case XtCase::DegenerateBoundaryLine: return {eps_r1, std::numeric_limits<double>::infinity()};
        case XtCase::Case4: return {eps_r1, eps_r2};
        case XtCase::Uncontrollable: break;
    }
    return {0.0, 0.0};
}

XtClassification classify_xT(const ThrusterModel& model, double u0, double x_T) {
    XtClassification c;
    c.x_T = x_T;
    if (x_T < -0.5 || x_T > 0.5) c.warnings.emplace_back("x_T outside [-0.5, 0.5]");

    const auto& m = model.params().mass;
    const auto& h = model.rescaled_hull();
    const LinearBlocks b = model.linear_blocks();
    const double D = b.D;
    const double tau = model.thrust(u0);
    const double mL = model.m_L();
    const double Izr = m.I_z + m.m_rr, mv = m.m + m.m_vv;

    c.alpha = m.m_rv * tau / D;
    c.beta = -mv * tau / D;
    c.alpha_t = -(m.m_rv * b.p22u + Izr * b.p32u) * u0 * tau / D;
    c.beta_t = (mv * b.p22u + m.m_vr * b.p32u) * u0 * tau / D;
    c.gamma = (m.m_vr * h.N_b - Izr * h.Y_b - mv * h.N_g + m.m_rv * (h.Y_g - mL)) * u0 / D;
    c.delta = ((mv * h.N_g - m.m_rv * (h.Y_g - mL)) * b.p22u + (m.m_vr * h.N_g - Izr * (h.Y_g - mL)) * b.p32u) *
              u0 * u0 / D;

    const double al = c.alpha, be = c.beta, at = c.alpha_t, bt = c.beta_t, ga = c.gamma, de = c.delta;
    c.hypotheses_hold = al > 0 && be < 0 && at > 0 && bt < 0 && ga > 0 && de < 0;
    if (!c.hypotheses_hold) c.warnings.emplace_back("outside theorem hypotheses");

    c.x_T0 = (ga * al - at) / (bt - ga * be);
    c.x_Ts = (de * al - ga * at) / (ga * bt - de * be);

    // eps_r* - eps_r1 = 0  <=>  (at - ga al + (bt - ga be) x)(at + bt x) + de (al + be x)^2 = 0.
    {
        const double P0 = at - ga * al, P1 = bt - ga * be;
        const double qa = P1 * bt + de * be * be;
        const double qb = P0 * bt + P1 * at + 2.0 * de * al * be;
        const double qc = P0 * at + de * al * al;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0 || qa == 0.0) {
            c.thresholds_defined = false;
            c.x_Tminus = c.x_Tplus = std::numeric_limits<double>::quiet_NaN();
            c.warnings.emplace_back("thresholds undefined");
        } else {
            const double sq = std::sqrt(disc);
            const double qq = -0.5 * (qb + std::copysign(sq, qb));
            double r1 = qq / qa, r2 = qc / qq;
            if (r1 > r2) std::swap(r1, r2);
            c.x_Tminus = r1;
            c.x_Tplus = r2;
        }
    }

    const double L = model.L_pp();
    const double inf = std::numeric_limits<double>::infinity();
    const double s1 = at + bt * x_T;  // c0 / eps_psi and d c1 / d eps_r
    const double s2 = al + be * x_T;  // d c2 / d eps_r
    c.eps_r1 = s1 != 0.0 ? -de / s1 * L : inf;
    c.eps_r2 = s2 != 0.0 ? -ga / s2 * L : inf;
    c.eps_r_star = s2 != 0.0 ? (at - ga * al + (bt - ga * be) * x_T) / (s2 * s2) * L : inf;

    if (s2 == 0.0) {
        c.verdict = s1 > 0.0 ? XtCase::DegenerateBoundaryLine : XtCase::Uncontrollable;
        return c;
    }
    const double e1 = c.eps_r1, e2 = c.eps_r2, es = c.eps_r_star;
    if (s1 > 0.0) {
        if (e2 < es && es < 0 && 0 < e1) c.ordering = 1;
        else if (e2 < 0 && 0 <= es && es < e1) c.ordering = 2;
        else if (e2 < 0 && 0 < e1 && e1 < es) c.ordering = 3;
        else if (0 < e1 && e1 < e2 && e2 < es) c.ordering = 4;
        else if (0 < e2 && e2 < e1 && e1 < es) c.ordering = 5;
        else if (0 < e2 && e2 < es && es < e1) c.ordering = 6;
    }
    switch (c.ordering) {
        case 1: c.verdict = XtCase::Case1; break;
        case 2: c.verdict = XtCase::Case2; break;
        case 3: c.verdict = XtCase::Case3; break;
        case 4: c.verdict = XtCase::Case4; break;
        default: c.verdict = XtCase::Uncontrollable; break;
    }
    return c;
}

StabilityMap stability_map(const ThrusterModel& model, double u0, const std::vector<double>& eps_r_grid,
                           const std::vector<double>& eps_psi_grid, int jobs) {
    StabilityMap map;
    const std::size_t nr = eps_r_grid.size();
    map.cells.resize(nr * eps_psi_grid.size());
    parallel_for(map.cells.size(), jobs, [&](std::size_t k) {
        MapCell& cell = map.cells[k];
        cell.eps_r = eps_r_grid[k % nr];
        cell.eps_psi = eps_psi_grid[k / nr];
        const auto lin = linearize(model, {cell.eps_r, cell.eps_psi, ControlLaw::Linear}, u0);
        cell.verdict = routh_hurwitz(lin).verdict;
        cell.max_re = lin.max_real();
    });
    for (double er : eps_r_grid) {
        try {
            const double ep = boundary_eps_psi(model, u0, er);
            if (ep >= 0.0) map.boundary.emplace_back(er, ep);
        } catch (const Error&) {
        }
    }
    return map;
}

}  // namespace shipctl
