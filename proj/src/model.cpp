#include "shipctl/model.hpp"

#include <cmath>

#include "shipctl/error.hpp"

namespace shipctl {

namespace {

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

bool finite(const State4& s) {
    return std::isfinite(s.u) && std::isfinite(s.v) && std::isfinite(s.r) && std::isfinite(s.psi);
}

HullCoefficients rescale(const HullCoefficients& h, double L) {
    HullCoefficients out = h;
    for (double HullCoefficients::*c : {&HullCoefficients::X_uu, &HullCoefficients::X_bg, &HullCoefficients::Y_b,
                                        &HullCoefficients::Y_g, &HullCoefficients::Y_bb, &HullCoefficients::Y_gg,
                                        &HullCoefficients::Y_bag, &HullCoefficients::Y_abg, &HullCoefficients::Y_ab,
                                        &HullCoefficients::N_b, &HullCoefficients::N_g, &HullCoefficients::N_bb,
                                        &HullCoefficients::N_gg, &HullCoefficients::N_bbg, &HullCoefficients::N_bgg,
                                        &HullCoefficients::N_upgc, &HullCoefficients::N_ab})
        out.*c = h.*c / L;
    return out;
}

// V^p, with the removable singularity at V = 0 mapped to 0 for negative p.
double vpow(double V, double p) {
    if (p < 0.0 && V < 1e-14) return 0.0;
    return std::pow(V, p);
}

}  // namespace

ThrusterModel::ThrusterModel(ShipParams params) : params_(std::move(params)) {
    params_.validate();
    const auto& m = params_.mass;
    D_ = (m.m + m.m_vv) * (m.I_z + m.m_rr) - m.m_rv * m.m_vr;
    if (!(D_ > 0.0)) throw Error(ErrorKind::SingularMassMatrix, "singular mass matrix (D <= 0)");
    const auto& g = params_.geometry;
    hull_ = rescale(params_.hull, g.L_pp);
    B2_ = 0.5 * g.rho * g.L_pp * g.L_pp * g.draft;
}

Mat4 ThrusterModel::mass_matrix() const {
    const auto& m = params_.mass;
    Mat4 M = Mat4::Zero();
    M(0, 0) = m.m + m.m_uu;
    M(1, 1) = m.m + m.m_vv;
    M(1, 2) = m.m_vr;
    M(2, 1) = m.m_rv;
    M(2, 2) = m.I_z + m.m_rr;
    M(3, 3) = 1.0;
    return M;
}

Vec4 ThrusterModel::apply_inverse_mass(const Vec4& F) const {
    const auto& m = params_.mass;
    return {F[0] / (m.m + m.m_uu),
            ((m.I_z + m.m_rr) * F[1] - m.m_vr * F[2]) / D_,
            (-m.m_rv * F[1] + (m.m + m.m_vv) * F[2]) / D_,
            F[3]};
}

double ThrusterModel::thrust(double u) const { return thrust_series(u).value; }

ThrustSeries ThrusterModel::thrust_series(double u) const {
    if (!std::isfinite(u)) throw Error(ErrorKind::InvalidState, "invalid state: non-finite surge");
    const auto& p = params_.propeller;
    const auto& K = p.K_T;
    const double j = (1.0 - p.wake_fraction) / (p.n_p * p.D_p);
    const double J = u * j;
    // Horner for K_T and its first three derivatives in J.
    double k0 = 0.0, k1 = 0.0, k2 = 0.0, k3 = 0.0;
    for (int i = 5; i >= 0; --i) {
        k3 = k3 * J + 3.0 * k2;
        k2 = k2 * J + 2.0 * k1;
        k1 = k1 * J + k0;
        k0 = k0 * J + K[i];
    }
    const double C = (1.0 - p.thrust_deduction) * params_.geometry.rho * p.n_p * p.n_p * std::pow(p.D_p, 4) / B2_;
    return {C * k0, C * j * k1, C * j * j * k2, C * j * j * j * k3};
}

HullForces ThrusterModel::hull_forces(const State4& s) const {
    if (!finite(s)) throw Error(ErrorKind::InvalidState, "invalid state: non-finite component");
    const auto& h = hull_;
    const double u = s.u, v = s.v, r = s.r;
    const double V = std::hypot(u, v);
    const double av = std::abs(v), ar = std::abs(r);

    HullForces f;
    f.X = h.X_uu * u * u + h.X_bg * v * r;

    f.Y = h.Y_b * u * v + h.Y_g * u * r + h.Y_bb * v * av + h.Y_gg * r * ar + h.Y_bag * v * ar + h.Y_abg * av * r;
    if (h.Y_ab != 0.0)
        f.Y += h.Y_ab * std::pow(u, h.a_y) * std::pow(av, h.b_y) * sgn(v) * vpow(V, 2.0 - h.a_y - h.b_y);

    f.N = h.N_b * u * v + h.N_g * u * r + h.N_gg * r * ar + h.N_bb * v * av;
    if (h.N_upgc != 0.0) f.N += h.N_upgc * u * std::pow(ar, h.c_n) * vpow(V, 1.0 - h.c_n) * sgn(r);
    if (h.N_bbg != 0.0) f.N += h.N_bbg * r * v * v * vpow(V, -1.0);
    if (h.N_bgg != 0.0) f.N += h.N_bgg * v * r * r * vpow(V, -1.0);
    if (h.N_ab != 0.0)
        f.N += h.N_ab * std::pow(u, h.a_n) * std::pow(av, h.b_n) * vpow(V, 2.0 - h.a_n - h.b_n) * sgn(v);
    return f;
}

double ThrusterModel::steering_angle(const ControlGains& gains, const State4& s) const {
    const double L = params_.geometry.L_pp;
    if (gains.law == ControlLaw::Sinusoidal) return gains.eps_r / L * s.r + gains.eps_psi * std::sin(s.psi / L);
    return gains.eps_r / L * s.r + gains.eps_psi / L * s.psi;
}

Vec4 ThrusterModel::forces(const ControlGains& gains, const State4& s) const {
    const HullForces H = hull_forces(s);
    const double tau = thrust(s.u);
    const double eta = steering_angle(gains, s);
    const double mL = m_L();
    const double ts = tau * std::sin(eta);
    return {mL * s.v * s.r + H.X + tau * std::cos(eta),
            -mL * s.u * s.r + H.Y + ts,
            H.N + params_.geometry.x_T * ts,
            s.r};
}

Vec4 ThrusterModel::rhs(const ControlGains& gains, const State4& s) const {
    return apply_inverse_mass(forces(gains, s));
}

LinearBlocks ThrusterModel::linear_blocks() const {
    const auto& m = params_.mass;
    const auto& h = hull_;
    const double mL = m_L();
    const double xT = params_.geometry.x_T;
    LinearBlocks b;
    b.D = D_;
    b.p22u = ((m.I_z + m.m_rr) * h.Y_b - m.m_vr * h.N_b) / D_;
    b.p23u = ((m.I_z + m.m_rr) * (h.Y_g - mL) - m.m_vr * h.N_g) / D_;
    b.q23 = (m.I_z + m.m_rr - m.m_vr * xT) / D_;
    b.p32u = (-m.m_rv * h.Y_b + (m.m + m.m_vv) * h.N_b) / D_;
    b.p33u = (-m.m_rv * (h.Y_g - mL) + (m.m + m.m_vv) * h.N_g) / D_;
    b.q33 = (-m.m_rv + (m.m + m.m_vv) * xT) / D_;
    return b;
}

ExpansionData ThrusterModel::expand_at_equilibrium(const ControlGains& gains, double u0) const {
    const auto& m = params_.mass;
    const auto& h = hull_;
    const LinearBlocks lb = linear_blocks();
    const ThrustSeries ts = thrust_series(u0);
    const double muu = m.m + m.m_uu;

    ExpansionData e;
    e.u0 = u0;
    e.eps_r = scaled(gains.eps_r);
    e.eps_psi = scaled(gains.eps_psi);

    auto& k = e.k;
    k[1] = 2.0 * h.X_uu * u0 / muu;
    k[2] = h.X_uu / muu;
    k[3] = (m_L() + h.X_bg) / muu;
    k[4] = lb.p22u * u0;
    k[5] = lb.p23u * u0;
    k[6] = lb.p22u;
    k[7] = lb.p23u;
    k[8] = lb.p32u * u0;
    k[9] = lb.p33u * u0;
    k[10] = lb.p32u;
    k[11] = lb.p33u;

    const double taylor[3] = {ts.value, ts.d1, 0.5 * ts.d2};
    for (int j = 1; j <= 3; ++j) {
        e.tau[1][j] = taylor[j - 1] / muu;
        e.tau[2][j] = lb.q23 * taylor[j - 1];
        e.tau[3][j] = lb.q33 * taylor[j - 1];
    }

    e.p11 = k[1] + e.tau[1][2];
    e.p22 = k[4];
    e.p23 = k[5] + e.tau[2][1] * e.eps_r;
    e.p24 = e.tau[2][1] * e.eps_psi;
    e.p32 = k[8];
    e.p33 = k[9] + e.tau[3][1] * e.eps_r;
    e.p34 = e.tau[3][1] * e.eps_psi;

    const double Izr = m.I_z + m.m_rr, mv = m.m + m.m_vv;
    e.a11 = (Izr * h.Y_bb - m.m_vr * h.N_bb) / D_;
    e.a12 = Izr * h.Y_bag / D_;
    e.a21 = Izr * h.Y_abg / D_;
    e.a22 = (Izr * h.Y_gg - m.m_vr * h.N_gg) / D_;
    e.b11 = (mv * h.N_bb - m.m_rv * h.Y_bb) / D_;
    e.b12 = -m.m_rv * h.Y_bag / D_;
    e.b21 = -m.m_rv * h.Y_abg / D_;
    e.b22 = (mv * h.N_gg - m.m_rv * h.Y_gg) / D_;
    return e;
}

ThrusterModel ThrusterModel::with_x_T(double x_T) const {
    ShipParams p = params_;
    p.geometry.x_T = x_T;
    return ThrusterModel(p);
}

ThrusterModel ThrusterModel::with_D_p(double D_p) const {
    ShipParams p = params_;
    p.propeller.D_p = D_p;
    return ThrusterModel(p);
}

ThrusterModel ThrusterModel::with_n_p(double n_p) const {
    ShipParams p = params_;
    p.propeller.n_p = n_p;
    return ThrusterModel(p);
}

Eigen::Vector2d ExpansionData::modulus_terms(double v, double r) const {
    const double av = std::abs(v), ar = std::abs(r);
    return {a11 * v * av + a12 * v * ar + a21 * r * av + a22 * r * ar,
            b11 * v * av + b12 * v * ar + b21 * r * av + b22 * r * ar};
}

double ExpansionData::surge_quadratic(const Vec4& x) const {
    const double eta = eps_r * x[2] + eps_psi * x[3];
    return (k[2] + tau[1][3]) * x[0] * x[0] + k[3] * x[1] * x[2] - 0.5 * tau[1][1] * eta * eta;
}

Vec4 ExpansionData::truncated_rhs(const Vec4& x) const {
    const double u = x[0], v = x[1], r = x[2], psi = x[3];
    const Eigen::Vector2d f = modulus_terms(v, r);
    return {p11 * u + surge_quadratic(x),
            p22 * v + p23 * r + p24 * psi + k[6] * u * v + (k[7] + tau[2][2] * eps_r) * u * r +
                tau[2][2] * eps_psi * u * psi + f[0],
            p32 * v + p33 * r + p34 * psi + k[10] * u * v + (k[11] + tau[3][2] * eps_r) * u * r +
                tau[3][2] * eps_psi * u * psi + f[1],
            r};
}

Mat4 rhs_jacobian(const ThrusterModel& model, const ControlGains& gains, const Vec4& x) {
    Mat4 J;
    for (int j = 0; j < 4; ++j) {
        const double h = 1e-7 * (1.0 + std::abs(x[j]));
        Vec4 xp = x, xm = x;
        const bool kink = (j == 1 || j == 2) && std::abs(x[j]) < 10.0 * h;
        if (kink) {
            const double dir = x[j] < 0.0 ? -1.0 : 1.0;
            xp[j] += dir * h;
            J.col(j) = dir * (model.rhs(gains, xp) - model.rhs(gains, x)) / h;
        } else {
            xp[j] += h;
            xm[j] -= h;
            J.col(j) = (model.rhs(gains, xp) - model.rhs(gains, xm)) / (2.0 * h);
        }
    }
    return J;
}

}  // namespace shipctl
