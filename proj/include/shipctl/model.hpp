#pragma once

#include <Eigen/Dense>

#include "shipctl/params.hpp"

namespace shipctl {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Ship-fixed state in rescaled units: surge u, sway v, yaw rate r = L_pp * r_phys,
/// yaw angle psi = L_pp * psi_phys.
struct State4 {
    double u = 0.0;
    double v = 0.0;
    double r = 0.0;
    double psi = 0.0;

    [[nodiscard]] Vec4 vec() const { return {u, v, r, psi}; }
    static State4 from(const Vec4& x) { return {x[0], x[1], x[2], x[3]}; }
};

enum class ControlLaw { Linear, Sinusoidal };

/// P-control gains in the unscaled units reported for the physical system
/// (eta = eps_r * r_phys + eps_psi * psi_phys). The model divides by L_pp where
/// the rescaled state is used.
struct ControlGains {
    double eps_r = 0.0;
    double eps_psi = 0.0;
    ControlLaw law = ControlLaw::Linear;
};

struct HullForces {
    double X = 0.0;
    double Y = 0.0;
    double N = 0.0;
};

/// tau and its first three u-derivatives, from the K_T quintic.
struct ThrustSeries {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

/// Gain-independent pieces of the linearisation at straight motion.
/// Multiply the *_u entries by u0 and the q entries by tau(u0)*eps to get A.
struct LinearBlocks {
    double D = 0.0;
    double p22u = 0.0;
    double p23u = 0.0;
    double p32u = 0.0;
    double p33u = 0.0;
    double q23 = 0.0;
    double q33 = 0.0;
};

/// Quadratic expansion of the vector field about (u0, 0, 0, 0), with u shifted by u0.
struct ExpansionData {
    double u0 = 0.0;
    double eps_r = 0.0;    // rescaled gains (eps / L_pp)
    double eps_psi = 0.0;
    std::array<double, 12> k{};                  // k[1]..k[11]; k[0] unused
    std::array<std::array<double, 4>, 4> tau{};  // tau[i][j], i, j in 1..3
    double p11 = 0.0;
    double p22 = 0.0, p23 = 0.0, p24 = 0.0;
    double p32 = 0.0, p33 = 0.0, p34 = 0.0;
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
    double b11 = 0.0, b12 = 0.0, b21 = 0.0, b22 = 0.0;

    /// The second-order modulus terms (f1, f2).
    [[nodiscard]] Eigen::Vector2d modulus_terms(double v, double r) const;
    /// Second-order part U of the surge equation.
    [[nodiscard]] double surge_quadratic(const Vec4& shifted) const;
    /// Truncated vector field in shifted coordinates (u - u0, v, r, psi).
    [[nodiscard]] Vec4 truncated_rhs(const Vec4& shifted) const;
};

class ThrusterModel {
public:
    explicit ThrusterModel(ShipParams params);

    [[nodiscard]] const ShipParams& params() const { return params_; }
    /// Hull coefficients divided by L_pp; exponents unchanged.
    [[nodiscard]] const HullCoefficients& rescaled_hull() const { return hull_; }
    [[nodiscard]] double L_pp() const { return params_.geometry.L_pp; }
    [[nodiscard]] double x_T() const { return params_.geometry.x_T; }
    [[nodiscard]] double m_L() const { return params_.mass.m / params_.geometry.L_pp; }
    /// D = (m + m_vv)(I_z + m_rr) - m_rv m_vr.
    [[nodiscard]] double mass_determinant() const { return D_; }
    [[nodiscard]] Mat4 mass_matrix() const;
    [[nodiscard]] Vec4 apply_inverse_mass(const Vec4& F) const;

    /// Rescaled thrust amplitude tau(u) = (1 - t) T_p(u) / B_2.
    [[nodiscard]] double thrust(double u) const;
    [[nodiscard]] ThrustSeries thrust_series(double u) const;

    [[nodiscard]] HullForces hull_forces(const State4& s) const;
    [[nodiscard]] double steering_angle(const ControlGains& gains, const State4& s) const;
    /// Right-hand side F of M nu' = F(nu).
    [[nodiscard]] Vec4 forces(const ControlGains& gains, const State4& s) const;
    /// nu' = M^{-1} F(nu).
    [[nodiscard]] Vec4 rhs(const ControlGains& gains, const State4& s) const;
    [[nodiscard]] Vec4 rhs(const ControlGains& gains, const Vec4& x) const { return rhs(gains, State4::from(x)); }

    [[nodiscard]] LinearBlocks linear_blocks() const;
    [[nodiscard]] ExpansionData expand_at_equilibrium(const ControlGains& gains, double u0) const;

    [[nodiscard]] double scaled(double eps) const { return eps / params_.geometry.L_pp; }

    /// Copy with one physical parameter replaced.
    [[nodiscard]] ThrusterModel with_x_T(double x_T) const;
    [[nodiscard]] ThrusterModel with_D_p(double D_p) const;
    [[nodiscard]] ThrusterModel with_n_p(double n_p) const;

private:
    ShipParams params_;
    HullCoefficients hull_;
    double D_ = 0.0;
    double B2_ = 0.0;
};

/// Finite-difference Jacobian of rhs with step 1e-7 (1 + |x|), central except
/// one-sided away from v = 0 / r = 0 when the state lies within ten steps of them.
[[nodiscard]] Mat4 rhs_jacobian(const ThrusterModel& model, const ControlGains& gains, const Vec4& x);

}  // namespace shipctl
