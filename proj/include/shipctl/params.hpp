#pragma once

#include <array>

namespace shipctl {

/// Added-mass and inertia values, already rescaled by B_2, B_3, B_4.
struct MassCoefficients {
    double m = 0.2328;
    double m_uu = 0.0247;
    double m_vv = 0.2286;
    double m_rr = 0.0150;
    double m_vr = 0.0074;
    double m_rv = 0.0074;
    double I_z = 0.0134;
};

/// Bare hull coefficients as tabulated (not yet divided by L_pp).
///
/// Naming follows the hydrodynamic derivative subscripts: `b` is beta (sway),
/// `g` is gamma (yaw). `Y_bag` is Y_{beta|gamma|}, `Y_abg` is Y_{|beta|gamma}.
/// Y_ab, N_ab, N_upgc, N_bbg, N_bgg and X_bg have no tabulated values and
/// default to zero.
struct HullCoefficients {
    double X_uu = -0.0141;
    double X_bg = 0.0;
    double Y_b = -0.1735;
    double Y_g = 0.0338;
    double Y_bb = -1.1378;
    double Y_gg = 0.0123;
    double Y_bag = -0.0537;
    double Y_abg = 0.1251;
    double Y_ab = 0.0;
    double N_b = -0.1442;
    double N_g = -0.0276;
    double N_bb = -0.0375;
    double N_gg = -0.0386;
    double N_bbg = 0.0;
    double N_bgg = 0.0;
    double N_upgc = 0.0;
    double N_ab = 0.0;
    double a_y = 3.0;
    double b_y = 2.0;
    double a_n = 1.0;
    double b_n = 3.0;
    double c_n = 2.0;
};

struct PropellerData {
    double D_p = 6.105;   // m
    double n_p = 2.0;     // 1/s
    std::array<double, 6> K_T{0.366897, -0.345036, 0.068841, -0.710991, 0.948559, -0.428915};
    double thrust_deduction = 0.22;
    double wake_fraction = 0.38;
};

struct Geometry {
    double L_pp = 153.70;  // m
    double draft = 10.30;  // m
    double rho = 1025.0;   // kg/m^3
    double x_T = -0.49429; // fraction of L_pp, measured from midship towards the bow
};

/// Full model parameter set. Default-constructed values are the Hamburg Test Case.
struct ShipParams {
    MassCoefficients mass;
    HullCoefficients hull;
    PropellerData propeller;
    Geometry geometry;

    static ShipParams htc() { return {}; }

    /// Throws Error(InvalidParameter) when a physical constraint is violated.
    void validate() const;
};

}  // namespace shipctl
