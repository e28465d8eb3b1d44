#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shipctl/continuation.hpp"
#include "shipctl/dynamics.hpp"
#include "shipctl/error.hpp"
#include "shipctl/stability.hpp"
#include "test_util.hpp"

using namespace shipctl;
using testutil::htc;
using testutil::htc_u0;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PitchforkBranches {
    Branch trivial, plus, minus;
    std::size_t index = 0;
};

const PitchforkBranches& pitchfork_branches() {
    static const PitchforkBranches pb = [] {
        PitchforkBranches b;
        ContinuationOptions o;
        o.ds = 0.05;
        o.ds_max = 0.2;
        o.p_max = 140.0;
        b.trivial = continue_equilibria(htc(), {110.0, 0.0, ControlLaw::Linear}, FreeParam::EpsR, {htc_u0(), 0, 0, 0},
                                        1.0, o);
        for (std::size_t i = 1; i < b.trivial.points.size() && !b.index; ++i)
            if (b.trivial.points[i].event == BranchEvent::Pitchfork) b.index = i;
        o.ds_max = 0.5;
        o.p_min = 9.0;
        o.max_points = 4000;
        b.plus = switch_pitchfork(htc(), b.trivial, b.index, 1.0, o);
        b.minus = switch_pitchfork(htc(), b.trivial, b.index, -1.0, o);
        return b;
    }();
    return pb;
}

const BranchPoint& nearest(const Branch& b, double p) {
    return *std::min_element(b.points.begin(), b.points.end(), [&](const auto& x, const auto& y) {
        return std::abs(x.param - p) < std::abs(y.param - p);
    });
}

// Circling equilibrium at (eps_r, 0) on the + pitchfork branch.
State4 circling_equilibrium(double eps_r, ControlLaw law) {
    const State4 s = nearest(pitchfork_branches().plus, eps_r).state();
    return correct_equilibrium(htc(), {eps_r, 0.0, law}, s, true);
}

Branch short_hopf_branch() {
    ContinuationOptions o;
    o.max_points = 12;
    return continue_hopf_branch(htc(), htc_u0(), 10.6, 0.05, o);
}

// Smallest distance from x to the orbit samples in (u, v, r), psi compared modulo the winding shift.
double distance_to_orbit(const std::vector<std::pair<double, Vec4>>& prof, const Vec4& x) {
    double best = 1e300;
    for (const auto& [s, y] : prof) best = std::min(best, (x.head<3>() - y.head<3>()).norm());
    return best;
}

}  // namespace

TEST_CASE("pitchfork of equilibria at zero heading gain") {
    const auto& pb = pitchfork_branches();
    REQUIRE(pb.index > 0);
    const double er1 = classify_xT(htc(), htc_u0(), htc().x_T()).eps_r1;
    // The trivial branch flags the step past the crossing; switching locates it.
    CHECK(pb.trivial.points[pb.index].param > er1);
    CHECK(pb.trivial.points[pb.index - 1].param < er1);
    CHECK(pb.plus.points.front().event == BranchEvent::Pitchfork);
    CHECK(std::abs(pb.plus.points.front().param - er1) < 1e-4);
    for (const auto& p : pb.trivial.points) CHECK(p.residual < 1e-9);

    SUBCASE("symmetric branches") {
        REQUIRE(pb.plus.points.size() == pb.minus.points.size());
        REQUIRE(pb.plus.points.size() > 10);
        CHECK(pb.plus.points.back().param < 10.6);
        for (std::size_t i = 0; i < pb.plus.points.size(); ++i) {
            const State4 a = pb.plus.points[i].state(), b = pb.minus.points[i].state();
            CHECK(pb.plus.points[i].param == testutil::Approx(pb.minus.points[i].param).epsilon(1e-10));
            CHECK(std::abs(a.v + b.v) < 1e-8);
            CHECK(std::abs(a.r + b.r) < 1e-8);
            CHECK(std::abs(a.u - b.u) < 1e-8);
            CHECK(pb.plus.points[i].residual < 1e-9);
        }
    }
    SUBCASE("nonzero one-sided slope at onset matches the reduction") {
        const PitchforkData pf = pitchfork_coefficients(htc(), htc_u0());
        const double L = htc().L_pp();
        // Equilibria corrected at fixed gains just below the critical gain.
        for (double d : {0.05, 0.2, 0.5}) {
            CAPTURE(d);
            const double amp = pf.x_slope() * d / L;
            const State4 guess{htc_u0(), amp * pf.e0[0], amp * pf.e0[1], 0.0};
            const State4 s = correct_equilibrium(htc(), {pf.eps_r1 - d, 0.0, ControlLaw::Linear}, guess, true);
            CHECK(std::hypot(s.v, s.r) / (d / L) == testutil::Approx(pf.x_slope()).epsilon(0.02));
            CHECK(s.r * pf.e0[1] > 0.0);
        }
        // Branch points a couple of gain units away still follow the slope.
        const BranchPoint& p = pb.plus.points[2];
        REQUIRE(std::abs(p.param - pf.eps_r1) < 3.0);
        const double slope = std::hypot(p.state().v, p.state().r) / (std::abs(p.param - pf.eps_r1) / L);
        CHECK(slope == testutil::Approx(pf.x_slope()).epsilon(0.02));
        // No branch on the other side.
        CHECK(p.param < pf.eps_r1);
    }
    SUBCASE("circling equilibria at eps_r = 10.6") {
        const State4 e = circling_equilibrium(10.6, ControlLaw::Linear);
        CHECK(std::abs(e.r) > 1e-3);
        CHECK(htc().rhs({10.6, 0.0}, e).head<3>().norm() < 1e-12);
        // Earth track is a circle of radius |V| / |r|.
        const double T = kTwoPi / std::abs(e.r);
        OdeOptions o;
        o.tol = 1e-11;
        const Trajectory tr = integrate_with_track(htc(), {10.6, 0.0}, e, {}, T, o);
        const std::complex<double> V(e.u, e.v), I(0.0, 1.0);
        const std::complex<double> centre = -V * std::polar(1.0, e.psi) / (I * e.r);
        const double R = circle_radius(htc(), e);
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const std::complex<double> z(tr.sol.y[i][4], tr.sol.y[i][5]);
            CHECK(std::abs(std::abs(z - centre) - R) < 1e-6 * R);
        }
    }
}

TEST_CASE("Hopf locus agrees with the boundary formula") {
    const auto locus = track_hopf_locus(htc(), htc_u0(), 140.0);
    REQUIRE(locus.size() > 10);
    for (const auto& p : locus) {
        if (p.eps_psi <= 1e-9) continue;
        CAPTURE(p.eps_r);
        CHECK(std::abs(p.eps_psi - boundary_eps_psi(htc(), htc_u0(), p.eps_r)) < 1e-6 * (1.0 + p.eps_psi));
        CHECK(p.hopf);
    }
    CHECK(locus.front().eps_r == 0.0);
    CHECK(std::abs(locus.back().eps_psi) < 1e-9);
    CHECK(locus.back().eps_r == testutil::Approx(130.13).epsilon(0.01 / 130.13));

    SUBCASE("invariant under the diameter in E-coordinates") {
        const ThrusterModel m(testutil::with_Dp(9.1575));
        const double u1 = solve_u0(m).u0;
        const double t0 = htc().thrust(htc_u0()), t1 = m.thrust(u1);
        const auto l1 = track_hopf_locus(m, u1, 1e3);
        for (const auto& p : l1) {
            if (p.eps_psi <= 1e-6) continue;
            const double E1 = t1 * p.eps_r / u1, E2 = t1 * p.eps_psi / (u1 * u1);
            const double er = E1 * htc_u0() / t0;
            if (er > 130.0) continue;
            CHECK(E2 * htc_u0() * htc_u0() / t0 ==
                  testutil::Approx(boundary_eps_psi(htc(), htc_u0(), er)).epsilon(1e-6));
        }
    }
}

TEST_CASE("Hopf branch near onset") {
    const Branch b = short_hopf_branch();
    REQUIRE(b.points.size() >= 5);
    const double epH = boundary_eps_psi(htc(), htc_u0(), 10.6);
    CHECK(std::abs(b.points.front().param - 25.9) < 0.5);
    CHECK(b.points.front().param < epH);
    for (const auto& p : b.points) {
        CAPTURE(p.param);
        const PeriodicOrbit& o = p.orbit();
        CHECK(p.winding == 0);
        CHECK(o.winding == 0);
        CHECK(p.residual < 1e-9);
        CHECK(o.closure_residual < 1e-8);
        CHECK(o.trivial_multiplier_gap < 1e-4);
        CHECK(p.stable);
        CHECK(o.stable());
        CHECK(o.period > 40.0);
        CHECK(o.period < 60.0);
    }
    // Amplitude grows away from the boundary.
    const auto amp = [](const BranchPoint& p) { return p.orbit().max_state[1] - p.orbit().min_state[1]; };
    CHECK(amp(b.points.back()) > amp(b.points.front()));
}

TEST_CASE("reflected seed gives the reflected branch") {
    const Branch b = short_hopf_branch();
    const PeriodicOrbit& o = b.points[3].orbit();
    PeriodicOrbit r = o;
    for (auto& n : r.nodes) n = Vec4(n[0], -n[1], -n[2], -n[3]);
    const ControlGains g = b.points[3].gains;
    const PeriodicOrbit rc = correct_periodic(htc(), g, r);
    CHECK(rc.period == testutil::Approx(o.period).epsilon(1e-8));
    for (int k = 0; k < o.segments(); ++k) {
        CHECK(std::abs(rc.nodes[k][0] - o.nodes[k][0]) < 1e-7);
        CHECK(std::abs(rc.nodes[k][1] + o.nodes[k][1]) < 1e-7);
        CHECK(std::abs(rc.nodes[k][2] + o.nodes[k][2]) < 1e-7);
    }
    ContinuationOptions opt;
    opt.max_points = 4;
    const Branch bo = continue_periodic(htc(), g, FreeParam::EpsPsi, o, -1.0, opt);
    const Branch br = continue_periodic(htc(), g, FreeParam::EpsPsi, rc, -1.0, opt);
    REQUIRE(bo.points.size() == br.points.size());
    for (std::size_t i = 0; i < bo.points.size(); ++i) {
        CHECK(br.points[i].param == testutil::Approx(bo.points[i].param).epsilon(1e-7));
        CHECK(br.points[i].orbit().period == testutil::Approx(bo.points[i].orbit().period).epsilon(1e-7));
        CHECK(br.points[i].orbit().max_state[1] == testutil::Approx(-bo.points[i].orbit().min_state[1]).epsilon(1e-6));
    }
}

TEST_CASE("Floquet stability agrees with simulation") {
    const Branch b = short_hopf_branch();
    OdeOptions oo;
    oo.tol = 1e-10;
    for (std::size_t i : {b.points.size() - 2, b.points.size() - 1}) {
        const BranchPoint& p = b.points[i];
        CAPTURE(p.param);
        const auto prof = orbit_profile(htc(), p.gains, p.orbit(), 20000);
        // Start off the orbit and let the attractor pull the trajectory back.
        Vec4 x0 = p.orbit().nodes[0];
        x0[1] *= 1.2;
        x0[2] *= 0.8;
        const double d0 = distance_to_orbit(prof, x0);
        const Trajectory tr = integrate(htc(), p.gains, State4::from(x0), 3000.0, oo);
        const double d1 = distance_to_orbit(prof, tr.final_state().vec());
        CHECK(p.stable);
        CHECK(d1 < 1e-2 * d0);
    }
}

TEST_CASE("circling periodic state at small heading gain") {
    const ControlGains g{10.6, 0.2, ControlLaw::Sinusoidal};
    const State4 e = circling_equilibrium(10.6, ControlLaw::Sinusoidal);
    const PeriodicOrbit o = correct_periodic(htc(), g, winding_guess(htc(), e));
    CHECK(std::abs(o.winding) == 1);
    CHECK(o.trivial_multiplier_gap < 1e-4);
    CHECK(o.closure_residual < 1e-8);
    CHECK(o.stable());

    // Generic start converges to the same orbit.
    OdeOptions oo;
    oo.tol = 1e-10;
    const Trajectory tr = integrate(htc(), g, {htc_u0(), 0.1, 0.01, 0.0}, 6000.0, oo);
    const auto prof = orbit_profile(htc(), g, o, 2000);
    CHECK(distance_to_orbit(prof, tr.final_state().vec()) < 1e-3);
    const auto T = return_time(htc(), tr, 5000.0, 1e-3);
    REQUIRE(T.has_value());
    CHECK(*T == testutil::Approx(o.period).epsilon(1e-3));
}

TEST_CASE("periodic orbits at zero yaw-rate gain") {
    // Below the axis value 45.78 the orbit born at the boundary persists.
    ContinuationOptions o;
    o.max_points = 6;
    const Branch b = continue_hopf_branch(htc(), htc_u0(), 0.0, 0.05, o);
    REQUIRE(!b.points.empty());
    const double axis = boundary_eps_psi(htc(), htc_u0(), 0.0);
    CHECK(axis == testutil::Approx(45.8).epsilon(0.1 / 45.8));
    for (const auto& p : b.points) {
        CHECK(p.param < axis);
        CHECK(p.param >= 1.0);
        CHECK(p.orbit().trivial_multiplier_gap < 1e-4);
        CHECK(p.stable);
    }
}
