#include "shipctl/equilibrium.hpp"

#include <cmath>

#include "shipctl/error.hpp"
#include "shipctl/parallel.hpp"

namespace shipctl {

EquilibriumResult solve_u0(const ThrusterModel& model) {
    const ShipParams& p = model.params();
    const double X = model.rescaled_hull().X_uu;
    if (!(X < 0.0)) throw Error(ErrorKind::NoEquilibrium, "no equilibrium in bracket: X_uu must be negative");
    if (!(model.thrust(0.0) > 0.0)) throw Error(ErrorKind::NoEquilibrium, "no equilibrium in bracket: tau(0) <= 0");

    auto f = [&](double u) { return X * u * u + model.thrust(u); };

    double lo = 0.0;
    double hi = 5.0 * p.propeller.n_p * p.propeller.D_p;
    int grow = 0;
    while (f(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 60) throw Error(ErrorKind::NoEquilibrium, "no equilibrium in bracket");
    }

    while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }

    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double fu = f(u);
        if (std::abs(fu) < 1e-15) break;
        (fu > 0.0 ? lo : hi) = u;
        const double df = 2.0 * X * u + model.thrust_series(u).d1;
        double next = (df != 0.0) ? u - fu / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - u) < 1e-15 * std::max(1.0, u)) {
            u = next;
            break;
        }
        u = next;
    }

    EquilibriumResult res;
    const ThrustSeries ts = model.thrust_series(u);
    res.u0 = u;
    res.tau_at_u0 = ts.value;
    res.dtau_du = ts.d1;
    res.residual = std::abs(X * u * u + ts.value);
    if (!(res.dtau_du < 0.0)) res.warnings.emplace_back("uniqueness condition violated (dtau/du >= 0 at u0)");
    return res;
}

std::vector<DpSample> u0_vs_Dp(const ThrusterModel& model, const std::vector<double>& Dp_grid, int jobs) {
    std::vector<DpSample> out(Dp_grid.size());
    parallel_for(Dp_grid.size(), jobs, [&](std::size_t i) {
        out[i].D_p = Dp_grid[i];
        out[i].eq = solve_u0(model.with_D_p(Dp_grid[i]));
    });
    return out;
}

double u0_over_Dp_limit(const ShipParams& params) {
    const auto& K = params.propeller.K_T;
    auto kt = [&](double J) {
        double s = 0.0;
        for (int i = 5; i >= 0; --i) s = s * J + K[i];
        return s;
    };
    if (!(kt(0.0) > 0.0)) throw Error(ErrorKind::NoEquilibrium, "no equilibrium in bracket: K_T(0) <= 0");
    double lo = 0.0, hi = 0.05;
    while (kt(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw Error(ErrorKind::NoEquilibrium, "no equilibrium in bracket: K_T has no positive root");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kt(mid) > 0.0 ? lo : hi) = mid;
    }
    const double J0 = 0.5 * (lo + hi);
    return J0 * params.propeller.n_p / (1.0 - params.propeller.wake_fraction);
}

}  // namespace shipctl
