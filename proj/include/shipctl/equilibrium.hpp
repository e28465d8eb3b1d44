#pragma once

#include <string>
#include <vector>

#include "shipctl/model.hpp"

namespace shipctl {

struct EquilibriumResult {
    double u0 = 0.0;
    double tau_at_u0 = 0.0;
    double dtau_du = 0.0;
    double residual = 0.0;
    std::vector<std::string> warnings;
};

/// Unique positive root of X_uu u^2 + tau(u) = 0.
EquilibriumResult solve_u0(const ThrusterModel& model);

struct DpSample {
    double D_p = 0.0;
    EquilibriumResult eq;
};

std::vector<DpSample> u0_vs_Dp(const ThrusterModel& model, const std::vector<double>& Dp_grid, int jobs = 1);

/// lim u0/D_p as D_p -> infinity: the positive root of K_T at the matching advance ratio.
double u0_over_Dp_limit(const ShipParams& params);

}  // namespace shipctl
