#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shipctl/config.hpp"
#include "shipctl/continuation.hpp"
#include "shipctl/criticality.hpp"
#include "shipctl/csv.hpp"
#include "shipctl/dynamics.hpp"
#include "shipctl/equilibrium.hpp"
#include "shipctl/error.hpp"
#include "shipctl/stability.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace shipctl;

namespace {

constexpr int kSchemaVersion = 1;
constexpr const char* kToolVersion = "1.0.0";
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

struct Global {
    std::string config;
    std::string out = ".";
    int jobs = 1;
    std::string law = "sin";
    bool fixed_step = false;
    double h_fixed = 0.05;
    std::optional<double> Dp, xT, np;
};

// Everything a run writes, for the manifest.
struct Run {
    std::string command;
    std::vector<std::string> argv;
    json tolerances = json::object();
    std::vector<std::string> outputs;
    fs::path dir;

    std::string file(const std::string& name) {
        outputs.push_back(name);
        fs::create_directories((dir / name).parent_path());
        return (dir / name).string();
    }
};

ControlLaw parse_law(const std::string& s) {
    if (s == "linear") return ControlLaw::Linear;
    if (s == "sin") return ControlLaw::Sinusoidal;
    throw Error(ErrorKind::Config, "unknown control law '" + s + "' (linear|sin)");
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(std::max(n, 1));
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

// Gnuplot sidecar next to a CSV: columns are 1-based.
void plot_sidecar(Run& run, const std::string& csv, int xcol, const std::vector<int>& ycols, const std::string& title) {
    std::ofstream gp(run.file(csv.substr(0, csv.rfind('.')) + ".gp"));
    gp << "set datafile separator ','\nset key autotitle columnhead\nset title '" << title << "'\nplot ";
    for (std::size_t i = 0; i < ycols.size(); ++i)
        gp << (i ? ", " : "") << "'" << fs::path(csv).filename().string() << "' using " << xcol << ":" << ycols[i]
           << " with lines";
    gp << "\n";
}

OdeOptions ode_options(const Global& g, double tol) {
    OdeOptions o;
    o.tol = tol;
    o.fixed_step = g.fixed_step;
    o.h_fixed = g.h_fixed;
    return o;
}

// psi distance to the nearest straight-motion heading.
double psi_offset(const ThrusterModel& model, ControlLaw law, double psi) {
    if (law == ControlLaw::Linear) return psi;
    const double P = 2.0 * kPi * model.L_pp();
    return psi - P * std::round(psi / P);
}

// ------------------------------------------------------------------ commands

int cmd_equilibrium(const ThrusterModel& model, Run& run, const std::string& grid, int jobs) {
    const EquilibriumResult eq = solve_u0(model);
    std::printf("u0 = %.6f\ntau(u0) = %.6e\ndtau/du = %.6e\nresidual = %.2e\n", eq.u0, eq.tau_at_u0, eq.dtau_du,
                eq.residual);
    for (const auto& w : eq.warnings) std::printf("warning: %s\n", w.c_str());
    std::vector<double> Dp{model.params().propeller.D_p};
    if (!grid.empty()) {
        double a = 0, b = 0;
        int n = 0;
        if (std::sscanf(grid.c_str(), "%lf:%lf:%d", &a, &b, &n) != 3 || n < 1)
            throw Error(ErrorKind::Config, "--Dp-grid expects a:b:n");
        Dp = linspace(a, b, n);
    }
    CsvWriter csv(run.file("equilibrium.csv"), {"Dp", "u0", "dtau_du"});
    for (const auto& s : u0_vs_Dp(model, Dp, jobs)) csv.row({s.D_p, s.eq.u0, s.eq.dtau_du});
    plot_sidecar(run, "equilibrium.csv", 1, {2}, "u0 vs D_p");
    std::printf("u0/D_p limit = %.6f\n", u0_over_Dp_limit(model.params()));
    return 0;
}

// Bisection on the largest real part along eps_psi at fixed eps_r (independent of the closed form).
std::optional<double> boundary_by_bisection(const ThrusterModel& model, double u0, double eps_r, double hi) {
    auto f = [&](double ep) { return linearize(model, {eps_r, ep, ControlLaw::Linear}, u0).max_real(); };
    double lo = 1e-9;
    double flo = f(lo), fhi = f(hi);
    if ((flo > 0) == (fhi > 0)) return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * (1 + hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0))
            lo = mid, flo = fm;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

int cmd_boundary(const ThrusterModel& model, Run& run, const std::vector<double>& eps_r_list, double eps_r_max, int n) {
    const double u0 = solve_u0(model).u0;
    std::vector<double> grid = eps_r_list.empty() ? linspace(0.0, eps_r_max, n) : eps_r_list;
    CsvWriter csv(run.file("boundary.csv"), {"eps_r", "eps_psi", "eps_psi_bisection"});
    for (double er : grid) {
        double ep = std::nan("");
        try {
            ep = boundary_eps_psi(model, u0, er);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::AtAsymptote) throw;
        }
        const auto bis = boundary_by_bisection(model, u0, er, 1000.0);
        const double b = bis ? *bis : std::nan("");
        csv.cell(er).cell(ep).cell(b);
        csv.end_row();
        if (!eps_r_list.empty()) std::printf("eps_r = %g: eps_psi = %.6f (bisection %.6f)\n", er, ep, b);
    }
    plot_sidecar(run, "boundary.csv", 1, {2}, "stability boundary");
    return 0;
}

int cmd_map(const ThrusterModel& model, Run& run, double er_max, double ep_max, int nr, int np, int jobs) {
    const double u0 = solve_u0(model).u0;
    const StabilityMap map = stability_map(model, u0, linspace(0, er_max, nr), linspace(0, ep_max, np), jobs);
    CsvWriter csv(run.file("map.csv"), {"eps_r", "eps_psi", "verdict", "max_re_lambda"});
    long stable = 0;
    for (const auto& c : map.cells) {
        csv.cell(c.eps_r).cell(c.eps_psi).cell(to_string(c.verdict)).cell(c.max_re);
        csv.end_row();
        stable += c.verdict == Verdict::Stable;
    }
    CsvWriter b(run.file("map_boundary.csv"), {"eps_r", "eps_psi"});
    for (const auto& [x, y] : map.boundary) b.row({x, y});
    plot_sidecar(run, "map_boundary.csv", 1, {2}, "stability boundary");
    std::printf("%ld of %zu cells stable\n", stable, map.cells.size());
    return 0;
}

int cmd_classify(const ThrusterModel& model, Run& run) {
    const double u0 = solve_u0(model).u0;
    const XtClassification c = classify_xT(model, u0, model.x_T());
    const auto [w0, w1] = c.stable_window();
    std::printf("x_T = %g\ncase: %s\n", c.x_T, to_string(c.verdict));
    std::printf("eps_r1 = %.4f  eps_r2 = %.4f  eps_r* = %.4f\n", c.eps_r1, c.eps_r2, c.eps_r_star);
    std::printf("stable eps_r window at eps_psi = 0+: (%.4f, %.4f)\n", w0, w1);
    std::printf("x_T0 = %.6f  x_T- = %.6f  x_T+ = %.6f  x_Ts = %.6f\n", c.x_T0, c.x_Tminus, c.x_Tplus, c.x_Ts);
    for (const auto& w : c.warnings) std::printf("warning: %s\n", w.c_str());
    json j = {{"x_T", c.x_T},
              {"case", to_string(c.verdict)},
              {"ordering", c.ordering},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"alpha_tilde", c.alpha_t},
              {"beta_tilde", c.beta_t},
              {"gamma", c.gamma},
              {"delta", c.delta},
              {"x_T0", c.x_T0},
              {"x_T_minus", c.x_Tminus},
              {"x_T_plus", c.x_Tplus},
              {"x_Ts", c.x_Ts},
              {"thresholds_defined", c.thresholds_defined},
              {"eps_r1", std::isfinite(c.eps_r1) ? json(c.eps_r1) : json(nullptr)},
              {"eps_r2", std::isfinite(c.eps_r2) ? json(c.eps_r2) : json(nullptr)},
              {"eps_r_star", std::isfinite(c.eps_r_star) ? json(c.eps_r_star) : json(nullptr)},
              {"stable_window", {w0, w1}},
              {"hypotheses_hold", c.hypotheses_hold},
              {"warnings", c.warnings}};
    std::ofstream(run.file("classify_xT.json")) << j.dump(2) << "\n";
    return 0;
}

int cmd_sigma(const ThrusterModel& model, Run& run, double from, double to, double step, int jobs) {
    const double u0 = solve_u0(model).u0;
    if (to <= 0.0) {
        const XtClassification c = classify_xT(model, u0, model.x_T());
        to = std::isfinite(c.eps_r1) ? std::floor(c.eps_r1) : 130.0;
    }
    std::vector<double> grid;
    for (double x = from; x <= to + 1e-9; x += step) grid.push_back(x);
    const auto rows = sigma_sweep(model, u0, grid, jobs);
    CsvWriter csv(run.file("sigma.csv"), {"eps_r", "eps_psi", "mu", "omega", "sigma", "criticality", "amp_slope"});
    int neg = 0;
    double gap = 0.0;
    for (const auto& r : rows) {
        csv.cell(r.eps_r).cell(r.eps_psi).cell(r.mu).cell(r.omega).cell(r.sigma).cell(to_string(r.criticality));
        csv.cell(r.amp_slope);
        csv.end_row();
        neg += r.sigma < 0.0;
        gap = std::max(gap, r.closed_form_gap);
    }
    plot_sidecar(run, "sigma.csv", 1, {5}, "Sigma along the boundary");
    std::printf("Sigma < 0 at %d of %zu boundary points (eps_r in [%g, %g])\n", neg, rows.size(), from, to);
    std::printf("max |quadrature - closed form| per term = %.2e\n", gap);
    return 0;
}

void write_eq_branch(Run& run, const std::string& name, const Branch& b) {
    CsvWriter csv(run.file(name), {"param", "u", "v", "r", "psi", "max_re_lambda", "event", "stability", "winding"});
    for (const auto& p : b.points) {
        double mr = -1e300;
        for (const auto& l : p.spectrum) mr = std::max(mr, l.real());
        const State4& s = p.state();
        csv.cell(p.param).cell(s.u).cell(s.v).cell(s.r).cell(s.psi).cell(mr).cell(to_string(p.event));
        csv.cell(p.stable ? "stable" : "unstable").cell(p.winding);
        csv.end_row();
    }
    plot_sidecar(run, name, 1, {3}, "equilibrium branch");
}

// Equilibria at eps_psi = 0 through eps_r1 and both pitchfork branches.
int pitchfork_branches(const ThrusterModel& model, Run& run, double u0, double eps_r_min, int max_points) {
    const XtClassification c = classify_xT(model, u0, model.x_T());
    if (!std::isfinite(c.eps_r1)) throw Error(ErrorKind::DegeneratePitchfork, "no pitchfork point for this x_T");
    ContinuationOptions o;
    o.ds = 0.05;
    o.ds_max = 0.2;
    o.p_max = c.eps_r1 + 10.0;
    const double start = std::max(0.0, c.eps_r1 - 20.0);
    const Branch trivial =
        continue_equilibria(model, {start, 0.0, ControlLaw::Linear}, FreeParam::EpsR, {u0, 0, 0, 0}, 1.0, o);
    std::size_t idx = 0;
    for (std::size_t i = 1; i < trivial.points.size() && !idx; ++i)
        if (trivial.points[i].event == BranchEvent::Pitchfork) idx = i;
    if (!idx) throw Error(ErrorKind::DegeneratePitchfork, "pitchfork not detected on the trivial branch");
    write_eq_branch(run, "branch_trivial.csv", trivial);
    ContinuationOptions ob = o;
    ob.ds_max = 0.5;
    ob.p_min = eps_r_min;
    ob.max_points = max_points;
    const Branch plus = switch_pitchfork(model, trivial, idx, 1.0, ob);
    const Branch minus = switch_pitchfork(model, trivial, idx, -1.0, ob);
    write_eq_branch(run, "branch_plus.csv", plus);
    write_eq_branch(run, "branch_minus.csv", minus);
    std::printf("pitchfork detected near eps_r = %.4f (trivial branch)\n", trivial.points[idx].param);
    std::printf("branch +: %zu points, %s\nbranch -: %zu points, %s\n", plus.points.size(), plus.termination.c_str(),
                minus.points.size(), minus.termination.c_str());
    return 0;
}

int cmd_pitchfork(const ThrusterModel& model, Run& run, bool branch) {
    const double u0 = solve_u0(model).u0;
    const PitchforkData pf = pitchfork_coefficients(model, u0);
    const double L = model.L_pp();
    std::printf("eps_r1 = %.6f\ncoef_lin = %.6e\ncoef_quad = %.6e\ncriticality: %s\n", pf.eps_r1, pf.coef_lin,
                pf.coef_quad, to_string(pf.criticality));
    std::printf("e0 = (%.6f, %.6f)\n|v| per unit eps_r below eps_r1 = %.6e\n", pf.e0[0], pf.e0[1],
                pf.x_slope() * std::abs(pf.e0[0]) / L);
    CsvWriter csv(run.file("pitchfork.csv"), {"u0", "eps_r1", "coef_lin", "coef_quad", "criticality", "e0_v", "e0_r",
                                              "v_slope"});
    csv.cell(u0).cell(pf.eps_r1).cell(pf.coef_lin).cell(pf.coef_quad).cell(to_string(pf.criticality));
    csv.cell(pf.e0[0]).cell(pf.e0[1]).cell(pf.x_slope() * std::abs(pf.e0[0]) / L);
    csv.end_row();
    if (branch) return pitchfork_branches(model, run, u0, 0.0, 4000);
    return 0;
}

struct SimOptions {
    double eps_r = 10.6, eps_psi = 30.0;
    double t_end = 2000.0;
    double tol = 1e-9;
    double perturb = 0.1;
    std::optional<double> v, r, psi, u;
    int decimate = 1;
    bool track = false;
};

State4 start_state(double u0, const SimOptions& s) {
    State4 x{u0, s.perturb, s.perturb, s.perturb};
    if (s.u) x.u = *s.u;
    if (s.v) x.v = *s.v;
    if (s.r) x.r = *s.r;
    if (s.psi) x.psi = *s.psi;
    return x;
}

// Classify the end of a trajectory from the deviation from straight motion over its last two quarters.
std::string settle_report(const ThrusterModel& model, const ControlGains& g, const Trajectory& tr, double& period) {
    period = 0.0;
    const double tend = tr.times().back();
    auto deviation = [&](double t0, double t1) {
        double d = 0.0;
        for (std::size_t i = 0; i < tr.size(); ++i) {
            if (tr.times()[i] < t0 || tr.times()[i] > t1) continue;
            const State4 x = tr.state(i);
            d = std::max(d, std::hypot(x.v, x.r, psi_offset(model, g.law, x.psi)));
        }
        return d;
    };
    const double d1 = deviation(0.5 * tend, 0.75 * tend), d2 = deviation(0.75 * tend, tend);
    if (d2 < 1e-4) return "straight motion";
    if (d2 < 0.9 * d1) {
        // Decaying towards a linearly stable straight motion.
        const double u0 = solve_u0(model).u0;
        if (linearize(model, {g.eps_r, g.eps_psi, ControlLaw::Linear}, u0).max_real() < 0.0)
            return "straight motion (still converging)";
        return "decaying oscillation";
    }
    const State4 f = tr.final_state();
    if (model.rhs(g, f).head<3>().norm() < 1e-6 && std::abs(f.r) > 1e-4) return "circling motion";
    const auto T = return_time(model, tr, 0.5 * tend, 1e-3);
    if (T && d2 < 1.1 * d1) {
        period = *T;
        const double w = (tr.state_at(0.5 * tend + *T).psi - tr.state_at(0.5 * tend).psi) / (2.0 * kPi * model.L_pp());
        return std::abs(w) > 0.5 ? "circling periodic motion" : "periodic oscillation";
    }
    return "not settled";
}

int cmd_simulate(const ThrusterModel& model, const Global& g, Run& run, const SimOptions& s) {
    const double u0 = solve_u0(model).u0;
    const ControlGains gains{s.eps_r, s.eps_psi, parse_law(g.law)};
    const State4 x0 = start_state(u0, s);
    run.tolerances["ode_tol"] = s.tol;
    const OdeOptions oo = ode_options(g, s.tol);
    const Trajectory tr = s.track ? integrate_with_track(model, gains, x0, {0.0, 0.0}, s.t_end, oo)
                                  : integrate(model, gains, x0, s.t_end, oo);
    std::vector<std::string> cols{"t", "u", "v", "r", "psi"};
    if (s.track) cols.insert(cols.end(), {"x", "y", "eta_deg"});
    CsvWriter csv(run.file("simulate.csv"), cols);
    const int dec = std::max(1, s.decimate);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i % dec && i + 1 != tr.size()) continue;
        const State4 x = tr.state(i);
        csv.cell(tr.times()[i]).cell(x.u).cell(x.v).cell(x.r).cell(x.psi);
        if (s.track) {
            csv.cell(tr.sol.y[i][4]).cell(tr.sol.y[i][5]).cell(model.steering_angle(gains, x) * kDeg);
        }
        csv.end_row();
    }
    plot_sidecar(run, "simulate.csv", 1, {3, 4}, "time history");
    double T = 0.0;
    const std::string verdict = settle_report(model, gains, tr, T);
    const State4 f = tr.final_state();
    std::printf("final state: u = %.6f v = %.6e r = %.6e psi = %.6e\n", f.u, f.v, f.r, f.psi);
    std::printf("verdict: %s\n", verdict.c_str());
    if (T > 0.0) std::printf("period = %.4f\n", T);
    return 0;
}

struct TrackOptions {
    SimOptions sim;
    std::optional<double> u, v, r;
};

int cmd_track(const ThrusterModel& model, const Global& g, Run& run, const TrackOptions& t) {
    if (t.u || t.v || t.r) {
        // Kinematics only: constant (u, v, r), psi' = r.
        const State4 s{t.u.value_or(0.0), t.v.value_or(0.0), t.r.value_or(0.0), 0.0};
        const OdeRhs f = [&](double, const VecX& y, VecX& dy) {
            dy.resize(3);
            const double h = y[2];
            dy[0] = s.u * std::cos(h) - s.v * std::sin(h);
            dy[1] = s.u * std::sin(h) + s.v * std::cos(h);
            dy[2] = s.r;
        };
        const double T = s.r != 0.0 ? 2.0 * kPi / std::abs(s.r) : t.sim.t_end;
        OdeOptions oo = ode_options(g, std::min(t.sim.tol, 1e-10));
        const OdeSolution sol = integrate_ode(f, 0.0, VecX::Zero(3), T, oo);
        CsvWriter csv(run.file("track.csv"), {"t", "x", "y", "heading_deg"});
        for (std::size_t i = 0; i < sol.t.size(); ++i) csv.row({sol.t[i], sol.y[i][0], sol.y[i][1], sol.y[i][2] * kDeg});
        plot_sidecar(run, "track.csv", 2, {3}, "Earth-fixed track");
        if (s.r == 0.0) {
            std::printf("straight line, speed %.6f\n", std::hypot(s.u, s.v));
            return 0;
        }
        // Centre from the exact kinematics; radius measured on the integrated track.
        const std::complex<double> centre = std::complex<double>(s.u, s.v) * std::complex<double>(0.0, 1.0 / s.r);
        double rmin = 1e300, rmax = 0.0;
        for (const auto& y : sol.y) {
            const double d = std::abs(std::complex<double>(y[0], y[1]) - centre);
            rmin = std::min(rmin, d);
            rmax = std::max(rmax, d);
        }
        std::printf("circle radius: %.9f (formula %.9f), spread %.2e\n", 0.5 * (rmin + rmax),
                    circle_radius(model, s), (rmax - rmin) / circle_radius(model, s));
        return 0;
    }
    const double u0 = solve_u0(model).u0;
    const ControlGains gains{t.sim.eps_r, t.sim.eps_psi, parse_law(g.law)};
    run.tolerances["ode_tol"] = t.sim.tol;
    const Trajectory tr =
        integrate_with_track(model, gains, start_state(u0, t.sim), {0.0, 0.0}, t.sim.t_end, ode_options(g, t.sim.tol));
    const EarthTrack et = earth_track(model, tr);
    CsvWriter csv(run.file("track.csv"), {"t", "x", "y", "heading_deg", "eta_deg"});
    const int dec = std::max(1, t.sim.decimate);
    for (std::size_t i = 0; i < et.t.size(); ++i) {
        if (i % dec && i + 1 != et.t.size()) continue;
        csv.row({et.t[i], et.z[i].real(), et.z[i].imag(), et.heading[i] * kDeg, et.eta_deg[i]});
    }
    plot_sidecar(run, "track.csv", 2, {3}, "Earth-fixed track");
    double T = 0.0;
    const std::string verdict = settle_report(model, gains, tr, T);
    std::printf("verdict: %s\n", verdict.c_str());
    if (T > 0.0) {
        const double t1 = et.t.back(), t0 = t1 - T;
        std::size_t i0 = 0;
        while (i0 < et.t.size() && et.t[i0] < t0) ++i0;
        std::printf("period = %.4f\nself-intersections over the last period: %d\n", T,
                    count_self_intersections(et.z, i0, et.t.size() - 1));
    }
    double eta_max = 0.0;
    for (double e : et.eta_deg) eta_max = std::max(eta_max, std::abs(e));
    std::printf("max |eta| = %.3f deg\n", eta_max);
    return 0;
}

struct ContinueOptions {
    std::string free = "eps_psi";
    std::string kind;  // hopf | winding | equilibria
    double eps_r = 10.6;
    double eps_psi = 0.0;
    double offset = 0.05;
    double T_max = 2e4;
    int max_points = 4000;
    int profiles = 0;
    int sign = 1;
};

void write_orbit_branch(const ThrusterModel& model, Run& run, const std::string& name, const Branch& b,
                        const ContinueOptions& c) {
    CsvWriter csv(run.file(name), {"param", "T", "u_min", "u_max", "v_min", "v_max", "r_min", "r_max", "psi_min",
                                   "psi_max", "max_nontrivial_multiplier", "trivial_gap", "closure", "event",
                                   "stability", "winding"});
    for (std::size_t i = 0; i < b.points.size(); ++i) {
        const auto& p = b.points[i];
        const PeriodicOrbit& o = p.orbit();
        double mx = 0.0;
        std::size_t triv = 0;
        for (std::size_t k = 1; k < o.multipliers.size(); ++k)
            if (std::abs(o.multipliers[k] - 1.0) < std::abs(o.multipliers[triv] - 1.0)) triv = k;
        for (std::size_t k = 0; k < o.multipliers.size(); ++k)
            if (k != triv) mx = std::max(mx, std::abs(o.multipliers[k]));
        csv.cell(p.param).cell(o.period);
        for (int k = 0; k < 4; ++k) csv.cell(o.min_state[k]).cell(o.max_state[k]);
        csv.cell(mx).cell(o.trivial_multiplier_gap).cell(o.closure_residual).cell(to_string(p.event));
        csv.cell(p.stable ? "stable" : "unstable").cell(p.winding);
        csv.end_row();
        if (c.profiles > 0 && (i % c.profiles == 0 || i + 1 == b.points.size())) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "profiles/%s_%04zu.csv", name.substr(0, name.rfind('.')).c_str(), i);
            CsvWriter pc(run.file(buf), {"s", "u", "v", "r", "psi"});
            for (const auto& [s, x] : orbit_profile(model, p.gains, o, 400)) pc.row({s, x[0], x[1], x[2], x[3]});
        }
    }
    plot_sidecar(run, name, 1, {6}, "periodic branch (v max)");
}

void report_orbit_branch(const Branch& b) {
    const auto& first = b.points.front();
    const auto& last = b.points.back();
    std::printf("points: %zu\nstart: param = %.6f, T = %.4f\n", b.points.size(), first.param, first.orbit().period);
    std::printf("end: param = %.6f, T = %.4f, event %s\ntermination: %s\n", last.param, last.orbit().period,
                to_string(last.event), b.termination.c_str());
    int wmin = 1 << 30, wmax = -(1 << 30);
    for (const auto& p : b.points) wmin = std::min(wmin, p.winding), wmax = std::max(wmax, p.winding);
    std::printf("winding number: %d..%d\n", wmin, wmax);
}

int cmd_continue(const ThrusterModel& model, const Global& g, Run& run, ContinueOptions c) {
    const double u0 = solve_u0(model).u0;
    const ControlLaw law = parse_law(g.law);
    if (c.free == "eps_r" && c.kind.empty()) c.kind = "equilibria";
    if (c.kind.empty()) c.kind = "hopf";
    ContinuationOptions o;
    o.T_max = c.T_max;
    o.max_points = c.max_points;
    run.tolerances["ode_tol"] = o.ode_tol;
    run.tolerances["newton_tol"] = o.newton_tol;
    run.tolerances["T_max"] = o.T_max;
    if (c.kind == "equilibria") {
        if (c.free != "eps_r") throw Error(ErrorKind::Config, "equilibrium continuation runs in eps_r");
        return pitchfork_branches(model, run, u0, 0.0, c.max_points);
    }
    if (c.free != "eps_psi") throw Error(ErrorKind::Config, "periodic branches are continued in eps_psi");
    if (c.kind == "hopf") {
        const double epH = boundary_eps_psi(model, u0, c.eps_r);
        if (!(epH > 0.0))
            throw Error(ErrorKind::InvalidParameter, "no Hopf point with eps_psi > 0 at eps_r = " + std::to_string(c.eps_r));
        std::printf("Hopf onset: eps_psi = %.6f at eps_r = %g\n", epH, c.eps_r);
        const Branch b = continue_hopf_branch(model, u0, c.eps_r, c.offset, o, law);
        write_orbit_branch(model, run, "branch.csv", b, c);
        report_orbit_branch(b);
        return 0;
    }
    if (c.kind == "winding") {
        // Circling equilibrium nu+/- at eps_psi = 0 from the pitchfork branch, then continued in eps_psi.
        const XtClassification cl = classify_xT(model, u0, model.x_T());
        ContinuationOptions oe;
        oe.ds = 0.05;
        oe.ds_max = 0.2;
        oe.p_max = cl.eps_r1 + 10.0;
        const Branch trivial = continue_equilibria(model, {std::max(0.0, cl.eps_r1 - 20.0), 0.0, ControlLaw::Linear},
                                                   FreeParam::EpsR, {u0, 0, 0, 0}, 1.0, oe);
        std::size_t idx = 0;
        for (std::size_t i = 1; i < trivial.points.size() && !idx; ++i)
            if (trivial.points[i].event == BranchEvent::Pitchfork) idx = i;
        if (!idx) throw Error(ErrorKind::DegeneratePitchfork, "pitchfork not detected on the trivial branch");
        oe.ds_max = 0.5;
        oe.p_min = c.eps_r - 1.0;
        oe.max_points = 4000;
        const Branch pb = switch_pitchfork(model, trivial, idx, c.sign >= 0 ? 1.0 : -1.0, oe);
        std::size_t best = 0;
        for (std::size_t i = 0; i < pb.points.size(); ++i)
            if (std::abs(pb.points[i].param - c.eps_r) < std::abs(pb.points[best].param - c.eps_r)) best = i;
        const ControlGains g0{c.eps_r, c.eps_psi, law};
        const State4 eq = correct_equilibrium(model, {c.eps_r, 0.0, law}, pb.points[best].state(), true);
        std::printf("circling equilibrium: u = %.6f v = %.6f r = %.6f, track radius %.6f\n", eq.u, eq.v, eq.r,
                    circle_radius(model, eq));
        const PeriodicOrbit seed = correct_periodic(model, g0, winding_guess(model, eq, o.segments), o);
        const Branch b = continue_periodic(model, g0, FreeParam::EpsPsi, seed, 1.0, o);
        write_orbit_branch(model, run, "branch.csv", b, c);
        report_orbit_branch(b);
        return 0;
    }
    throw Error(ErrorKind::Config, "unknown branch kind '" + c.kind + "' (hopf|winding|equilibria)");
}

json params_json(ShipParams p) {
    json j = json::object();
    for (const auto& [k, v] : config_fields(p)) j[k] = *v;
    return j;
}

ShipParams params_from_json(const json& j) {
    ShipParams p = ShipParams::htc();
    for (auto& [k, v] : config_fields(p)) {
        if (!j.contains(k)) throw Error(ErrorKind::Config, "manifest lacks parameter " + k);
        *v = j.at(k).get<double>();
    }
    p.validate();
    return p;
}

int run_cli(std::vector<std::string> args) {
    const auto fm = std::find(args.begin(), args.end(), "--from-manifest");
    if (fm != args.end()) {
        if (fm + 1 == args.end()) throw Error(ErrorKind::Config, "--from-manifest needs a path");
        std::ifstream in(*(fm + 1));
        if (!in) throw Error(ErrorKind::Config, "cannot read manifest " + *(fm + 1));
        json m;
        try {
            m = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Config, std::string("manifest: ") + e.what());
        }
        // Recorded flags minus --config (the recorded parameters replace it) and, when this
        // invocation names one, minus --out.
        const auto it = std::find(args.begin(), args.end(), "--out");
        const bool new_out = it != args.end() && it + 1 != args.end();
        std::vector<std::string> clean{args[0]};
        const auto recorded = m.at("argv").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < recorded.size(); ++i) {
            if (recorded[i] == "--config" || (new_out && recorded[i] == "--out")) {
                ++i;
                continue;
            }
            clean.push_back(recorded[i]);
        }
        if (new_out) clean.insert(clean.end(), {"--out", *(it + 1)});
        const ShipParams p = params_from_json(m.at("params"));
        std::ofstream tmp(fs::temp_directory_path() / "shipctl_manifest.cfg");
        tmp << to_config(p);
        tmp.close();
        clean.insert(clean.begin() + 1, {"--config", (fs::temp_directory_path() / "shipctl_manifest.cfg").string()});
        return run_cli(clean);
    }
    CLI::App app{"Ship manoeuvring under P-control: equilibria, stability, criticality, dynamics, continuation"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--config", g.config, "parameter file (section.key = value)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--jobs", g.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--law", g.law, "control law: linear|sin")->check(CLI::IsMember({"linear", "sin"}));
    app.add_flag("--fixed-step", g.fixed_step, "classical RK4 with fixed step (bit-reproducible)");
    app.add_option("--step-size", g.h_fixed, "step of the fixed-step mode");
    app.add_option("--Dp", g.Dp, "propeller diameter override [m]");
    app.add_option("--np", g.np, "propeller revolutions override [1/s]");
    app.add_option("--xT", g.xT, "thruster position override (fraction of L_pp)");

    auto* eq = app.add_subcommand("equilibrium", "straight-motion speed u0");
    std::string dp_grid;
    eq->add_option("--Dp-grid", dp_grid, "sweep D_p as a:b:n");

    auto* bd = app.add_subcommand("boundary", "stability boundary eps_psi(eps_r)");
    std::vector<double> bd_er;
    double bd_max = 150.0;
    int bd_n = 151;
    bd->add_option("--eps-r", bd_er, "eps_r values");
    bd->add_option("--eps-r-max", bd_max, "polyline end");
    bd->add_option("--n", bd_n, "polyline points");

    auto* mp = app.add_subcommand("map", "stability raster");
    double mp_er = 150.0, mp_ep = 60.0;
    int mp_nr = 151, mp_np = 121;
    mp->add_option("--eps-r-max", mp_er);
    mp->add_option("--eps-psi-max", mp_ep);
    mp->add_option("--nr", mp_nr);
    mp->add_option("--npsi", mp_np);

    auto* cx = app.add_subcommand("classify-xT", "controllability case for the thruster position");

    auto* sg = app.add_subcommand("sigma", "Hopf criticality Sigma along the boundary");
    double sg_from = 1.0, sg_to = 0.0, sg_step = 1.0;
    sg->add_option("--from", sg_from, "first eps_r");
    sg->add_option("--to", sg_to, "last eps_r (default: floor of eps_r1)");
    sg->add_option("--step", sg_step);

    auto* pf = app.add_subcommand("pitchfork", "pitchfork coefficients at eps_r1");
    bool pf_branch = false;
    pf->add_flag("--branch", pf_branch, "also continue the pitchfork branches");

    SimOptions so;
    auto add_sim = [&](CLI::App* s, SimOptions& o) {
        s->add_option("--eps-r", o.eps_r);
        s->add_option("--eps-psi", o.eps_psi);
        s->add_option("--t-end", o.t_end);
        s->add_option("--tol", o.tol)->check(CLI::Range(1e-12, 1e-3));
        s->add_option("--perturb", o.perturb, "initial offset added to v, r and psi");
        s->add_option("--decimate", o.decimate, "write every k-th step");
    };
    auto* sm = app.add_subcommand("simulate", "time simulation");
    add_sim(sm, so);
    sm->add_option("--u", so.u, "initial u");
    sm->add_option("--v", so.v, "initial v");
    sm->add_option("--r", so.r, "initial r");
    sm->add_option("--psi", so.psi, "initial psi");
    sm->add_flag("--track", so.track, "integrate the Earth-fixed position too");

    TrackOptions to;
    auto* tk = app.add_subcommand("track", "Earth-fixed track");
    add_sim(tk, to.sim);
    tk->add_option("--u", to.u, "constant u (kinematics only)");
    tk->add_option("--v", to.v, "constant v (kinematics only)");
    tk->add_option("--r", to.r, "constant r (kinematics only)");

    ContinueOptions co;
    auto* ct = app.add_subcommand("continue", "branches of equilibria and periodic orbits");
    ct->add_option("--free", co.free)->check(CLI::IsMember({"eps_r", "eps_psi"}));
    ct->add_option("--kind", co.kind, "hopf|winding|equilibria");
    ct->add_option("--eps-r", co.eps_r);
    ct->add_option("--offset", co.offset, "eps_psi offset of the Hopf seed");
    ct->add_option("--T-max", co.T_max);
    ct->add_option("--max-points", co.max_points);
    ct->add_option("--profiles", co.profiles, "write an orbit profile every k points");
    ct->add_option("--sign", co.sign, "pitchfork branch for winding seeds (+1/-1)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    ShipParams params = ShipParams::htc();
    std::vector<std::string> recorded(args.begin() + 1, args.end());
    if (!g.config.empty()) params = load_config(g.config);
    if (g.Dp) params.propeller.D_p = *g.Dp;
    if (g.np) params.propeller.n_p = *g.np;
    if (g.xT) params.geometry.x_T = *g.xT;
    const ThrusterModel model(params);

    Run run;
    run.argv = recorded;
    run.dir = g.out;
    fs::create_directories(run.dir);
    const auto t0 = std::chrono::steady_clock::now();

    int rc = 0;
    if (*eq) run.command = "equilibrium", rc = cmd_equilibrium(model, run, dp_grid, g.jobs);
    if (*bd) run.command = "boundary", rc = cmd_boundary(model, run, bd_er, bd_max, bd_n);
    if (*mp) run.command = "map", rc = cmd_map(model, run, mp_er, mp_ep, mp_nr, mp_np, g.jobs);
    if (*cx) run.command = "classify-xT", rc = cmd_classify(model, run);
    if (*sg) run.command = "sigma", rc = cmd_sigma(model, run, sg_from, sg_to, sg_step, g.jobs);
    if (*pf) run.command = "pitchfork", rc = cmd_pitchfork(model, run, pf_branch);
    if (*sm) run.command = "simulate", rc = cmd_simulate(model, g, run, so);
    if (*tk) run.command = "track", rc = cmd_track(model, g, run, to);
    if (*ct) run.command = "continue", rc = cmd_continue(model, g, run, co);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json man = {{"schema_version", kSchemaVersion},
                {"tool_version", kToolVersion},
                {"command", run.command},
                {"argv", run.argv},
                {"params", params_json(params)},
                {"law", g.law},
                {"fixed_step", g.fixed_step},
                {"h_fixed", g.h_fixed},
                {"tolerances", run.tolerances},
                {"outputs", run.outputs},
                {"wall_clock_s", wall}};
    std::ofstream(run.dir / "manifest.json") << man.dump(2) << "\n";
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    try {
        return run_cli(args);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::Config ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
