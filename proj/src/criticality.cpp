#include "shipctl/criticality.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>

#include "shipctl/cubic.hpp"
#include "shipctl/error.hpp"
#include "shipctl/parallel.hpp"
#include "shipctl/quadrature.hpp"
#include "shipctl/stability.hpp"

namespace shipctl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Kernel of a 2x2 singular matrix, unit norm, first nonzero entry positive.
Eigen::Vector2d kernel2(const Eigen::Matrix2d& M) {
    Eigen::Vector2d k = M.row(0).norm() >= M.row(1).norm() ? Eigen::Vector2d(-M(0, 1), M(0, 0))
                                                            : Eigen::Vector2d(-M(1, 1), M(1, 0));
    k.normalize();
    if (k[0] < 0.0 || (k[0] == 0.0 && k[1] < 0.0)) k = -k;
    return k;
}

using CVec3 = Eigen::Vector3cd;

// Null vector of a rank-2 complex 3x3 matrix from the best-conditioned row cross product.
CVec3 null_vector(const Eigen::Matrix3cd& M) {
    CVec3 best = CVec3::Zero();
    double best_norm = -1.0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const CVec3 ri = M.row(i).transpose(), rj = M.row(j).transpose();
            const CVec3 c(ri[1] * rj[2] - ri[2] * rj[1], ri[2] * rj[0] - ri[0] * rj[2], ri[0] * rj[1] - ri[1] * rj[0]);
            if (c.norm() > best_norm) {
                best_norm = c.norm();
                best = c;
            }
        }
    return best;
}

struct Group {
    double coef;
    bool gamma;  // Gamma (b_ij) instead of Lambda (a_ij)
    int p, w;    // which of (a1,b1) / (a2,b2)
};

std::array<Group, 8> groups(const ExpansionData& ex) {
    return {{{ex.a11, false, 0, 0}, {ex.a12, false, 0, 1}, {ex.a21, false, 1, 0}, {ex.a22, false, 1, 1},
             {ex.b11, true, 0, 0}, {ex.b12, true, 0, 1}, {ex.b21, true, 1, 0}, {ex.b22, true, 1, 1}}};
}

}  // namespace

const char* to_string(Criticality c) { return c == Criticality::Supercritical ? "Supercritical" : "Subcritical"; }

PitchforkData pitchfork_coefficients(const ThrusterModel& model, double u0) {
    const XtClassification cls = classify_xT(model, u0, model.x_T());
    const double s1 = cls.alpha_t + cls.beta_t * model.x_T();
    if (!(s1 > 0.0) || !std::isfinite(cls.eps_r1) || cls.eps_r1 <= 0.0)
        throw Error(ErrorKind::DegeneratePitchfork, "degenerate pitchfork: no positive root of c1");

    PitchforkData pf;
    pf.u0 = u0;
    pf.eps_r1 = cls.eps_r1;
    const auto lin = linearize(model, {pf.eps_r1, 0.0, ControlLaw::Linear}, u0);
    pf.B0 = lin.A.block<2, 2>(1, 1);
    const double tau = lin.tau0;
    pf.B1 << 0.0, lin.blocks.q23 * tau, 0.0, lin.blocks.q33 * tau;
    pf.lambda = pf.B0.trace();
    if (std::abs(pf.lambda) < 1e-12) throw Error(ErrorKind::DegeneratePitchfork, "degenerate pitchfork");

    pf.e0 = kernel2(pf.B0);
    pf.e1 = kernel2(pf.B0 - pf.lambda * Eigen::Matrix2d::Identity());
    Eigen::Vector2d e0s = kernel2(pf.B0.transpose());
    Eigen::Vector2d e1s = kernel2(pf.B0.transpose() - pf.lambda * Eigen::Matrix2d::Identity());
    pf.e0s = e0s / pf.e0.dot(e0s);
    pf.e1s = e1s / pf.e1.dot(e1s);
    pf.biorth_residual = std::max({std::abs(pf.e0.dot(pf.e0s) - 1.0), std::abs(pf.e1.dot(pf.e1s) - 1.0),
                                   std::abs(pf.e0.dot(pf.e1s)), std::abs(pf.e1.dot(pf.e0s))});

    const ExpansionData ex = model.expand_at_equilibrium({pf.eps_r1, 0.0, ControlLaw::Linear}, u0);
    pf.coef_lin = (pf.B1 * pf.e0).dot(pf.e0s);
    pf.coef_quad = ex.modulus_terms(pf.e0[0], pf.e0[1]).dot(pf.e0s);
    pf.criticality = pf.coef_quad < 0.0 ? Criticality::Supercritical : Criticality::Subcritical;
    return pf;
}

double HopfFrame::radius(const Eigen::Vector3d& vrpsi) const {
    const Eigen::Vector3d xi = T.lu().solve(vrpsi);
    return std::hypot(xi[0], xi[1]);
}

HopfFrame hopf_frame(const ThrusterModel& model, const ControlGains& gains, double u0) {
    const auto lin = linearize(model, gains, u0);
    HopfFrame f;
    f.eps_r = gains.eps_r;
    f.eps_psi = gains.eps_psi;
    f.P = lin.P();
    f.lambda1 = lin.A(0, 0);
    const auto& ev = lin.eigenvalues;
    f.lambda4 = ev[1].real();
    f.mu = ev[2].real();
    f.omega = ev[2].imag();
    if (!(f.omega >= 1e-10)) throw Error(ErrorKind::NotOscillatory, "not an oscillatory crossing");

    const std::complex<double> lam(f.mu, f.omega);
    CVec3 zeta = null_vector(f.P.cast<std::complex<double>>() - lam * Eigen::Matrix3cd::Identity());
    int k = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(zeta[i]) > std::abs(zeta[k])) k = i;
    zeta /= zeta[k];

    Eigen::Vector3d s = null_vector((f.P - f.lambda4 * Eigen::Matrix3d::Identity()).cast<std::complex<double>>()).real();
    s.normalize();
    for (int i = 0; i < 3; ++i)
        if (s[i] != 0.0) {
            if (s[i] < 0.0) s = -s;
            break;
        }

    f.T.col(0) = zeta.real();
    f.T.col(1) = -zeta.imag();
    f.T.col(2) = s;
    const Eigen::Vector3d a = f.T.col(0), b = f.T.col(1);
    const double det = f.T.determinant();
    f.Z11 = (b[1] * s[2] - b[2] * s[1]) / det;
    f.Z12 = (-b[0] * s[2] + b[2] * s[0]) / det;
    f.Z21 = (-a[1] * s[2] + a[2] * s[1]) / det;
    f.Z22 = (a[0] * s[2] - a[2] * s[0]) / det;
    return f;
}

namespace {

// g1, g2 at xi = (c, s, 0).
Eigen::Vector2d g_terms(const HopfFrame& f, const ExpansionData& ex, double c, double s) {
    const double v = f.T(0, 0) * c + f.T(0, 1) * s;
    const double r = f.T(1, 0) * c + f.T(1, 1) * s;
    return ex.modulus_terms(v, r);
}

}  // namespace

double chi(const HopfFrame& f, const ExpansionData& ex, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const Eigen::Vector2d g = g_terms(f, ex, c, s);
    const double Lambda = c * f.Z11 + s * f.Z21;
    const double Gamma = c * f.Z12 + s * f.Z22;
    return g[0] * Lambda + g[1] * Gamma;
}

double phase_coefficient(const HopfFrame& f, const ExpansionData& ex, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const Eigen::Vector2d g = g_terms(f, ex, c, s);
    const double h1 = f.Z11 * g[0] + f.Z12 * g[1];
    const double h2 = f.Z21 * g[0] + f.Z22 * g[1];
    return -s * h1 + c * h2;
}

double modulus_integral(const Eigen::Vector2d& z, const Eigen::Vector2d& p, const Eigen::Vector2d& w) {
    const double W = w.norm();
    if (W == 0.0) return 0.0;
    const Eigen::Vector2d wp(-w[1], w[0]);
    return 4.0 / (3.0 * W) * (2.0 * z.dot(w) * p.dot(w) + z.dot(wp) * p.dot(wp));
}

SigmaResult sigma(const HopfFrame& f, const ExpansionData& ex, int gauss_order, int samples) {
    SigmaResult res;
    const GaussRule rule = gauss_legendre(gauss_order);
    const Eigen::Vector2d ab[2] = {{f.T(0, 0), f.T(0, 1)}, {f.T(1, 0), f.T(1, 1)}};  // (a_i, b_i)
    const Eigen::Vector2d zL(f.Z11, f.Z21), zG(f.Z12, f.Z22);

    std::vector<double> kinks;
    for (const auto& w : ab) {
        if (w.norm() == 0.0) continue;
        double phi = std::atan2(-w[0], w[1]);
        if (phi < 0.0) phi += std::numbers::pi;
        phi = std::fmod(phi, std::numbers::pi);
        kinks.push_back(phi);
        kinks.push_back(phi + std::numbers::pi);
    }

    const auto gs = groups(ex);
    for (std::size_t k = 0; k < gs.size(); ++k) {
        const Group& g = gs[k];
        const Eigen::Vector2d& z = g.gamma ? zG : zL;
        const Eigen::Vector2d& p = ab[g.p];
        const Eigen::Vector2d& w = ab[g.w];
        auto term = [&](double phi) {
            const Eigen::Vector2d e(std::cos(phi), std::sin(phi));
            return g.coef * z.dot(e) * p.dot(e) * std::abs(w.dot(e));
        };
        res.term_quadrature[k] = panel_integrate(term, 0.0, kTwoPi, kinks, rule);
        res.term_closed[k] = g.coef * modulus_integral(z, p, w);
    }

    res.sigma = panel_integrate([&](double phi) { return chi(f, ex, phi); }, 0.0, kTwoPi, kinks, rule);
    res.sigma_closed = 0.0;
    for (double t : res.term_closed) res.sigma_closed += t;

    for (int i = 0; i <= samples; ++i) {
        const double phi = kTwoPi * i / samples;
        res.chi_samples.emplace_back(phi, chi(f, ex, phi));
        res.omega_samples.emplace_back(phi, phase_coefficient(f, ex, phi));
    }

    if (std::abs(res.sigma) < 1e-12) throw Error(ErrorKind::DegenerateCriticality, "degenerate criticality, undetermined");
    res.criticality = res.sigma < 0.0 ? Criticality::Supercritical : Criticality::Subcritical;
    res.amplitude_slope = -kTwoPi / res.sigma;
    return res;
}

std::vector<SigmaRow> sigma_sweep(const ThrusterModel& model, double u0, const std::vector<double>& eps_r, int jobs) {
    std::vector<std::optional<SigmaRow>> rows(eps_r.size());
    parallel_for(eps_r.size(), jobs, [&](std::size_t i) {
        double ep = 0.0;
        try {
            ep = boundary_eps_psi(model, u0, eps_r[i]);
        } catch (const Error&) {
            return;
        }
        if (!(ep > 0.0)) return;
        const ControlGains g{eps_r[i], ep, ControlLaw::Linear};
        const HopfFrame f = hopf_frame(model, g, u0);
        const ExpansionData ex = model.expand_at_equilibrium(g, u0);
        const SigmaResult s = sigma(f, ex);
        SigmaRow row;
        row.eps_r = eps_r[i];
        row.eps_psi = ep;
        row.mu = f.mu;
        row.omega = f.omega;
        row.sigma = s.sigma;
        row.amp_slope = s.amplitude_slope;
        row.criticality = s.criticality;
        for (std::size_t k = 0; k < 8; ++k)
            row.closed_form_gap = std::max(row.closed_form_gap, std::abs(s.term_quadrature[k] - s.term_closed[k]));
        rows[i] = row;
    });
    std::vector<SigmaRow> out;
    for (auto& r : rows)
        if (r) out.push_back(*r);
    return out;
}

}  // namespace shipctl
