#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "shipctl/model.hpp"
#include "shipctl/ode.hpp"

namespace shipctl {

/// Time history of the 4D system, optionally carrying the Earth-fixed position
/// (x, y) as components 4 and 5.
struct Trajectory {
    ControlGains gains;
    bool with_track = false;
    OdeSolution sol;

    [[nodiscard]] const std::vector<double>& times() const { return sol.t; }
    [[nodiscard]] std::size_t size() const { return sol.t.size(); }
    [[nodiscard]] State4 state(std::size_t i) const { return State4::from(sol.y[i].head<4>()); }
    [[nodiscard]] State4 state_at(double t) const { return State4::from(sol.at(t).head<4>()); }
    [[nodiscard]] State4 final_state() const { return state(size() - 1); }
};

/// Adaptive mode requires tol in [1e-12, 1e-3] (Error InvalidParameter otherwise).
Trajectory integrate(const ThrusterModel& model, const ControlGains& gains, const State4& s0, double t_end,
                     const OdeOptions& opt = {});

/// Integrates the state together with the Earth-fixed position z' = (u + i v) exp(i psi)
/// in the rescaled variables.
Trajectory integrate_with_track(const ThrusterModel& model, const ControlGains& gains, const State4& s0,
                                std::complex<double> z0, double t_end, const OdeOptions& opt = {});

struct EarthTrack {
    std::vector<double> t;
    std::vector<std::complex<double>> z;
    std::vector<double> heading;  // psi
    std::vector<double> eta_deg;
};

/// Track from a trajectory. If the trajectory carries the track states they are
/// used directly; otherwise z is integrated along the dense output with the
/// 5-point Gauss rule per step, split so each panel turns by at most 0.1 rad.
EarthTrack earth_track(const ThrusterModel& model, const Trajectory& traj, std::complex<double> z0 = {});

/// Radius sqrt(u^2 + v^2) / |r| of the circle traced by a constant (u, v, r) motion with r != 0.
double circle_radius(const ThrusterModel& model, const State4& s);

/// First return to the hyperplane through x(t_ref) normal to (u, v, r)' at that
/// point, requiring the (u, v, r) distance to be below `close`. Returns the period.
std::optional<double> return_time(const ThrusterModel& model, const Trajectory& traj, double t_ref,
                                  double close = 1e-3);

/// Proper self-intersections of the polyline z[i0..i1].
int count_self_intersections(const std::vector<std::complex<double>>& z, std::size_t i0, std::size_t i1);

}  // namespace shipctl
