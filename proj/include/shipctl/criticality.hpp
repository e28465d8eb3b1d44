#pragma once

#include <array>
#include <vector>

#include "shipctl/model.hpp"

namespace shipctl {

enum class Criticality { Supercritical, Subcritical };
const char* to_string(Criticality c);

/// Reduction of the (v, r) block at eps_psi = 0 onto the kernel of B0 = B(eps_r1).
struct PitchforkData {
    double u0 = 0.0;
    double eps_r1 = 0.0;  // unscaled
    Eigen::Matrix2d B0 = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d B1 = Eigen::Matrix2d::Zero();  // d B / d eps_r (rescaled gain)
    double lambda = 0.0;  // nonzero eigenvalue of B0
    Eigen::Vector2d e0, e1, e0s, e1s;  // e0, e1 unit norm; adjoints biorthonormal
    double coef_lin = 0.0;   // <B1 e0, e0*>, per unit rescaled gain
    double coef_quad = 0.0;  // <f(e0), e0*>
    Criticality criticality = Criticality::Supercritical;
    double biorth_residual = 0.0;
    /// Predicted |x| per unit rescaled gain on the emerging branch.
    [[nodiscard]] double x_slope() const { return std::abs(coef_lin / coef_quad); }
};

/// Throws Error(DegeneratePitchfork) when the zero eigenvalue of B0 is not simple.
PitchforkData pitchfork_coefficients(const ThrusterModel& model, double u0);

/// Eigen-frame of the (v, r, psi) block P at a Hopf point.
struct HopfFrame {
    double eps_r = 0.0, eps_psi = 0.0;  // unscaled gains
    double mu = 0.0;
    double omega = 0.0;
    double lambda1 = 0.0;
    double lambda4 = 0.0;
    Eigen::Matrix3d P = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d T = Eigen::Matrix3d::Zero();  // columns a, b, s
    double Z11 = 0.0, Z12 = 0.0, Z21 = 0.0, Z22 = 0.0;

    [[nodiscard]] Eigen::Vector3d a() const { return T.col(0); }
    [[nodiscard]] Eigen::Vector3d b() const { return T.col(1); }
    [[nodiscard]] Eigen::Vector3d s() const { return T.col(2); }
    /// Polar amplitude of (v, r, psi) in the (xi1, xi2) plane.
    [[nodiscard]] double radius(const Eigen::Vector3d& vrpsi) const;
};

/// zeta+ scaled so its largest-modulus entry is 1; s unit norm with first nonzero entry positive.
/// b is taken as -Im(zeta+) so that T^{-1} P T = diag([[mu, -omega], [omega, mu]], lambda4).
/// Throws Error(NotOscillatory) when omega < 1e-10.
HopfFrame hopf_frame(const ThrusterModel& model, const ControlGains& gains, double u0);

/// Radial growth coefficient chi(phi).
double chi(const HopfFrame& frame, const ExpansionData& ex, double phi);
/// Phase coefficient Omega(phi) of the polar form (stored only).
double phase_coefficient(const HopfFrame& frame, const ExpansionData& ex, double phi);

struct SigmaResult {
    double sigma = 0.0;
    double sigma_closed = 0.0;
    std::array<double, 8> term_quadrature{};
    std::array<double, 8> term_closed{};
    std::vector<std::pair<double, double>> chi_samples;    // (phi, chi)
    std::vector<std::pair<double, double>> omega_samples;  // (phi, Omega)
    Criticality criticality = Criticality::Supercritical;
    double amplitude_slope = 0.0;  // -2 pi / Sigma
};

/// Sigma = integral of chi over [0, 2 pi], panel-split at the modulus kinks.
/// Throws Error(DegenerateCriticality) when |Sigma| < 1e-12.
SigmaResult sigma(const HopfFrame& frame, const ExpansionData& ex, int gauss_order = 20, int samples = 128);

/// Closed form of the integral over one period of (z.e)(p.e)|w.e|, e = (cos, sin).
double modulus_integral(const Eigen::Vector2d& z, const Eigen::Vector2d& p, const Eigen::Vector2d& w);

struct SigmaRow {
    double eps_r = 0.0, eps_psi = 0.0, mu = 0.0, omega = 0.0, sigma = 0.0, amp_slope = 0.0;
    Criticality criticality = Criticality::Supercritical;
    double closed_form_gap = 0.0;  // max per-term |quadrature - closed form|
};

/// Sigma at the boundary point above each eps_r (unscaled). Points without a
/// positive boundary value are skipped.
std::vector<SigmaRow> sigma_sweep(const ThrusterModel& model, double u0, const std::vector<double>& eps_r,
                                  int jobs = 1);

}  // namespace shipctl
