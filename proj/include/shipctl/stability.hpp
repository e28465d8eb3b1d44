#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "shipctl/model.hpp"

namespace shipctl {

enum class Verdict { Stable, Unstable, Marginal };
const char* to_string(Verdict v);

/// Linearisation at (u0, 0, 0, 0). Gains are taken in unscaled units; the
/// entries of A are in the rescaled state.
struct LinearizationData {
    Mat4 A = Mat4::Zero();
    LinearBlocks blocks;
    double u0 = 0.0;
    double tau0 = 0.0;
    double eps_r = 0.0;   // rescaled
    double eps_psi = 0.0; // rescaled
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;
    /// {lambda_1 = p11, then the three eigenvalues of P as returned by cubic_roots}.
    std::array<std::complex<double>, 4> eigenvalues{};

    [[nodiscard]] Eigen::Matrix3d P() const { return A.bottomRightCorner<3, 3>(); }
    [[nodiscard]] double max_real() const;
};

LinearizationData linearize(const ThrusterModel& model, const ControlGains& gains, double u0);

struct RouthHurwitz {
    Verdict verdict = Verdict::Marginal;
    /// Smallest of the sign conditions (p11 < 0 included as -p11).
    double margin = 0.0;
    /// eps_psi = 0: one eigenvalue of P is identically zero and not counted.
    bool structural_zero = false;
};

RouthHurwitz routh_hurwitz(const LinearizationData& lin);

/// c2 c1 - c0 = K11 e_psi e_r + K02 e_r^2 + K01 e_r + K10 e_psi + K00 (rescaled gains).
struct BoundaryCoeffs {
    double K11 = 0.0, K02 = 0.0, K01 = 0.0, K10 = 0.0, K00 = 0.0;
    [[nodiscard]] double gap(double er, double epsi) const {
        return K11 * epsi * er + K02 * er * er + K01 * er + K10 * epsi + K00;
    }
};

BoundaryCoeffs boundary_coeffs(const ThrusterModel& model, double u0);

/// eps_psi on the stability boundary at the given eps_r (both unscaled). A negative
/// value means there is no boundary point in the positive quadrant at this eps_r.
/// Throws Error(AtAsymptote) when the denominator vanishes.
double boundary_eps_psi(const ThrusterModel& model, double u0, double eps_r);

enum class XtCase { Case1, Case2, Case3, Case4, Uncontrollable, DegenerateBoundaryLine };
const char* to_string(XtCase c);

struct XtClassification {
    double x_T = 0.0;
    // Coefficients of c0, c1, c2 in the rescaled gains.
    double alpha = 0.0, beta = 0.0, alpha_t = 0.0, beta_t = 0.0, gamma = 0.0, delta = 0.0;
    double x_T0 = 0.0, x_Tminus = 0.0, x_Tplus = 0.0, x_Ts = 0.0;
    bool thresholds_defined = true;  // false when x_T+- are complex
    // Gain thresholds in unscaled units (infinite when undefined).
    double eps_r1 = 0.0, eps_r2 = 0.0, eps_r_star = 0.0;
    int ordering = 0;  // 1..6 as in the case analysis, 0 if none applies
    XtCase verdict = XtCase::Uncontrollable;
    bool hypotheses_hold = true;
    std::vector<std::string> warnings;

    /// eps_r interval (unscaled) that is stable at eps_psi = 0+, empty pair {0,0} if none.
    [[nodiscard]] std::pair<double, double> stable_window() const;
};

XtClassification classify_xT(const ThrusterModel& model, double u0, double x_T);

struct MapCell {
    double eps_r = 0.0;
    double eps_psi = 0.0;
    Verdict verdict = Verdict::Marginal;
    double max_re = 0.0;
};

struct StabilityMap {
    std::vector<MapCell> cells;  // row-major, eps_psi outer
    std::vector<std::pair<double, double>> boundary;  // (eps_r, eps_psi) with eps_psi >= 0
};

StabilityMap stability_map(const ThrusterModel& model, double u0, const std::vector<double>& eps_r_grid,
                           const std::vector<double>& eps_psi_grid, int jobs = 1);

}  // namespace shipctl
