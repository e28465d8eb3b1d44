#pragma once

#include <doctest.h>

#include <cmath>
#include <random>

#include "shipctl/equilibrium.hpp"
#include "shipctl/model.hpp"

namespace testutil {

inline const shipctl::ThrusterModel& htc() {
    static const shipctl::ThrusterModel m(shipctl::ShipParams::htc());
    return m;
}

inline double htc_u0() {
    static const double u0 = shipctl::solve_u0(htc()).u0;
    return u0;
}

// Purely relative comparison; doctest's default adds an absolute floor of epsilon.
inline doctest::Approx Approx(double x) { return doctest::Approx(x).scale(0.0); }

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline shipctl::ShipParams with_Dp(double Dp) {
    shipctl::ShipParams p = shipctl::ShipParams::htc();
    p.propeller.D_p = Dp;
    return p;
}

inline shipctl::ShipParams with_xT(double xT) {
    shipctl::ShipParams p = shipctl::ShipParams::htc();
    p.geometry.x_T = xT;
    return p;
}

}  // namespace testutil
