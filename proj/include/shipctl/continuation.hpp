#pragma once

#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "shipctl/criticality.hpp"
#include "shipctl/model.hpp"
#include "shipctl/ode.hpp"

namespace shipctl {

enum class FreeParam { EpsR, EpsPsi };
enum class BranchEvent { None, Hopf, Pitchfork, Fold, PeriodBlowup };
const char* to_string(BranchEvent e);
const char* to_string(FreeParam p);

double get_param(const ControlGains& g, FreeParam p);
ControlGains with_param(ControlGains g, FreeParam p, double value);

struct PeriodicOrbit {
    double period = 0.0;
    int winding = 0;
    std::vector<Vec4> nodes;  // multiple-shooting nodes, nodes[0] is the anchor point
    std::vector<std::complex<double>> multipliers;
    double closure_residual = 0.0;
    double trivial_multiplier_gap = 0.0;  // |mu_triv - 1|
    double psi_winding = 0.0;             // accumulated psi over one period / (2 pi L_pp)
    Vec4 max_state = Vec4::Zero();
    Vec4 min_state = Vec4::Zero();

    [[nodiscard]] int segments() const { return static_cast<int>(nodes.size()); }
    /// True when every multiplier other than the trivial one lies inside the unit circle.
    [[nodiscard]] bool stable() const;
};

struct BranchPoint {
    double param = 0.0;
    ControlGains gains;
    std::variant<State4, PeriodicOrbit> solution;
    std::vector<std::complex<double>> spectrum;  // eigenvalues or Floquet multipliers
    bool stable = false;
    BranchEvent event = BranchEvent::None;
    int winding = 0;
    double residual = 0.0;
    double ds = 0.0;

    [[nodiscard]] bool is_orbit() const { return std::holds_alternative<PeriodicOrbit>(solution); }
    [[nodiscard]] const PeriodicOrbit& orbit() const { return std::get<PeriodicOrbit>(solution); }
    [[nodiscard]] const State4& state() const { return std::get<State4>(solution); }
};

struct Branch {
    FreeParam free = FreeParam::EpsR;
    std::vector<BranchPoint> points;
    std::string termination;
};

struct ContinuationOptions {
    double ds = 0.05;         // initial pseudo-arclength step (weighted norm)
    double ds_min = 1e-7;
    double ds_max = 0.5;
    int max_points = 400;
    double p_min = 0.0;       // stop when the free parameter leaves [p_min, p_max]
    double p_max = 1e9;
    double newton_tol = 1e-9;
    int max_newton = 10;
    double param_weight = 0.01;  // weight of the free parameter in the arclength norm
    // Periodic orbits.
    int segments = 8;
    double max_segment_time = 100.0;  // more segments are used when T / segments exceeds this
    double T_max = 2e4;
    double period_change_cap = 0.25;
    double ode_tol = 1e-10;
};

/// Equilibria in one gain. With eps_psi = 0 and free = EpsR the psi-free 3D system
/// (u, v, r) is used, since psi is then a line of equilibria.
Branch continue_equilibria(const ThrusterModel& model, const ControlGains& gains, FreeParam free,
                           const State4& start, double direction, const ContinuationOptions& opt = {});

/// Newton on F = 0 at fixed gains (psi held fixed when `reduced`).
/// Throws Error(NoEquilibrium) without convergence.
State4 correct_equilibrium(const ThrusterModel& model, const ControlGains& gains, const State4& guess, bool reduced,
                           const ContinuationOptions& opt = {});

/// Jacobian eigenvalues of the equilibrium (3D block when reduced).
std::vector<std::complex<double>> equilibrium_spectrum(const ThrusterModel& model, const ControlGains& gains,
                                                       const State4& s, bool reduced);

/// Switch onto the nontrivial branch at a pitchfork point of `trivial`: perturb by
/// sign * 1e-4 along the kernel direction and continue towards decreasing stability.
Branch switch_pitchfork(const ThrusterModel& model, const Branch& trivial, std::size_t index, double sign,
                        const ContinuationOptions& opt = {});

/// Newton on the multiple-shooting system at fixed gains.
PeriodicOrbit correct_periodic(const ThrusterModel& model, const ControlGains& gains, PeriodicOrbit guess,
                               const ContinuationOptions& opt = {});

/// Small orbit predicted by the Hopf normal form at `gains` (off the boundary
/// point `frame` into the unstable side): amplitude -2 pi mu / Sigma in the (a, b)
/// plane, period 2 pi / omega.
PeriodicOrbit hopf_guess(const ThrusterModel& model, const HopfFrame& frame, const SigmaResult& sig,
                         const ControlGains& gains, double u0, int segments = 8);

/// Circling equilibrium (r != 0) at eps_psi = 0 as a winding orbit of period 2 pi L / |r|.
PeriodicOrbit winding_guess(const ThrusterModel& model, const State4& eq, int segments = 8);

/// Periodic branch from a corrected seed orbit in the direction `direction` (+1/-1) of the parameter.
Branch continue_periodic(const ThrusterModel& model, const ControlGains& gains, FreeParam free,
                         const PeriodicOrbit& seed, double direction, const ContinuationOptions& opt = {});

/// Hopf branch: seed from the Hopf normal form at boundary point (eps_r, eps_psi_H),
/// offset into the unstable side by `offset` in eps_psi, then continued downward.
Branch continue_hopf_branch(const ThrusterModel& model, double u0, double eps_r, double offset,
                            const ContinuationOptions& opt = {}, ControlLaw law = ControlLaw::Sinusoidal);

/// Orbit sampled at n + 1 uniform phases s = k / n.
std::vector<std::pair<double, Vec4>> orbit_profile(const ThrusterModel& model, const ControlGains& gains,
                                                   const PeriodicOrbit& orbit, int n, double tol = 1e-10);

struct LocusPoint {
    double eps_r = 0.0;
    double eps_psi = 0.0;
    double c0 = 0.0, c2 = 0.0;
    bool hopf = false;  // c0, c2 > 0 and omega > 0
};

/// Curve c2 c1 - c0 = 0 traced by pseudo-arclength from the eps_psi axis
/// (or from eps_r_start) until eps_psi reaches 0 or eps_r exceeds eps_r_max.
std::vector<LocusPoint> track_hopf_locus(const ThrusterModel& model, double u0, double eps_r_max,
                                         double ds = 1.0, double eps_r_start = 0.0);

}  // namespace shipctl
