#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "shipctl/dynamics.hpp"
#include "shipctl/error.hpp"
#include "shipctl/stability.hpp"
#include "test_util.hpp"

using namespace shipctl;
using testutil::htc;
using testutil::htc_u0;

namespace {

double vr_psi_norm(const State4& s) { return std::sqrt(s.v * s.v + s.r * s.r + s.psi * s.psi); }

double max_diff(const Vec4& a, const Vec4& b) { return (a - b).cwiseAbs().maxCoeff(); }

OdeOptions tol_opt(double tol) {
    OdeOptions o;
    o.tol = tol;
    return o;
}

// A state on the circling regime at small heading gain, away from v = 0 and r = 0.
State4 circling_state() {
    const ControlGains g{10.6, 0.2, ControlLaw::Linear};
    return integrate(htc(), g, {htc_u0(), 0.1, 0.01, 0.0}, 1500.0).final_state();
}

}  // namespace

TEST_CASE("equilibrium is a constant trajectory") {
    for (const ControlGains g : {ControlGains{0.0, 0.0}, ControlGains{10.6, 23.0}, ControlGains{10.6, 30.0, ControlLaw::Sinusoidal},
                                 ControlGains{200.0, 5.0}}) {
        const Trajectory tr = integrate(htc(), g, {htc_u0(), 0.0, 0.0, 0.0}, 500.0);
        for (std::size_t i = 0; i < tr.size(); ++i) {
            const State4 s = tr.state(i);
            CHECK(std::abs(s.u - htc_u0()) < 1e-9 * (1.0 + htc_u0()));
            CHECK(vr_psi_norm(s) < 1e-12);
        }
    }
}

TEST_CASE("convergence to straight motion above the boundary") {
    const ControlGains g{10.6, 30.0};
    const Trajectory tr = integrate(htc(), g, {htc_u0() + 2e-4, 2e-4, 2e-4, 2e-4}, 2000.0);
    const State4 s = tr.final_state();
    CHECK(vr_psi_norm(s) < 1e-4);
    CHECK(std::abs(s.u - htc_u0()) < 1e-4);
    // Envelope decay at the rate of the slowest linear mode.
    const double mu = linearize(htc(), g, htc_u0()).max_real();
    CHECK(mu < 0.0);
    auto envelope = [&](double t0, double t1) {
        double m = 0.0;
        for (double t = t0; t <= t1; t += 0.5) m = std::max(m, vr_psi_norm(tr.state_at(t)));
        return m;
    };
    CHECK(std::log(envelope(1800.0, 2000.0) / envelope(1300.0, 1500.0)) / 500.0 == testutil::Approx(mu).epsilon(0.1));
}

TEST_CASE("self-convergence on a smooth segment") {
    const ControlGains g{10.6, 0.2};
    const State4 s0 = circling_state();
    REQUIRE(std::abs(s0.v) > 1e-2);
    REQUIRE(std::abs(s0.r) > 1e-2);
    const double t_end = 5.0;
    const Vec4 ref = integrate(htc(), g, s0, t_end, tol_opt(1e-12)).final_state().vec();
    SUBCASE("fixed-step RK4: halving the step reduces the error by at least 16") {
        auto err = [&](double h) {
            OdeOptions o;
            o.fixed_step = true;
            o.h_fixed = h;
            return max_diff(integrate(htc(), g, s0, t_end, o).final_state().vec(), ref);
        };
        const double e1 = err(0.5), e2 = err(0.25), e3 = err(0.125);
        CHECK(e1 / e2 >= 16.0);
        CHECK(e2 / e3 >= 16.0);
    }
    SUBCASE("adaptive: error tracks the tolerance") {
        double prev = 1e300;
        for (double tol : {1e-5, 1e-6, 1e-7, 1e-8}) {
            const double e = max_diff(integrate(htc(), g, s0, t_end, tol_opt(tol)).final_state().vec(), ref);
            CAPTURE(tol);
            CHECK(e < 100.0 * tol);
            CHECK(e < prev);
            prev = e;
        }
    }
}

TEST_CASE("track of the straight equilibrium") {
    const Trajectory tr = integrate(htc(), {10.6, 23.0}, {htc_u0(), 0.0, 0.0, 0.0}, 100.0);
    const EarthTrack et = earth_track(htc(), tr);
    for (std::size_t i = 0; i < et.t.size(); ++i) {
        CHECK(et.z[i].real() == testutil::Approx(htc_u0() * et.t[i]).epsilon(1e-10).scale(1e-12));
        CHECK(std::abs(et.z[i].imag()) < 1e-12);
        CHECK(et.eta_deg[i] == 0.0);
    }
}

TEST_CASE("constant turning motion traces a circle") {
    const State4 c{7.3, -0.4, 0.05, 0.3};
    Trajectory tr;
    tr.gains = {10.6, 23.0};
    const OdeRhs f = [&](double, const VecX& y, VecX& dy) {
        dy = VecX::Zero(4);
        dy[3] = y[2];
    };
    tr.sol = integrate_ode(f, 0.0, c.vec(), 400.0, {});
    const std::complex<double> z0(3.0, -2.0);
    const EarthTrack et = earth_track(htc(), tr, z0);
    const std::complex<double> V(c.u, c.v), I(0.0, 1.0);
    const std::complex<double> centre = z0 - V * std::polar(1.0, c.psi) / (I * c.r);
    const double R = circle_radius(htc(), c);
    CHECK(R == testutil::Approx(std::hypot(c.u, c.v) / c.r).epsilon(1e-15));
    for (std::size_t i = 0; i < et.t.size(); ++i) CHECK(std::abs(std::abs(et.z[i] - centre) - R) < 1e-6 * R);
    // The track covers more than one revolution.
    CHECK(c.r * 400.0 > 2.0 * std::numbers::pi);
    CHECK_THROWS_AS((void)circle_radius(htc(), {1.0, 0.0, 0.0, 0.0}), Error);
}

TEST_CASE("simultaneous and post-hoc tracks agree") {
    const ControlGains g{10.6, 23.0};
    const State4 s0{htc_u0(), 0.5, 0.02, 0.3};
    const Trajectory a = integrate_with_track(htc(), g, s0, {1.0, 2.0}, 300.0, tol_opt(1e-11));
    const EarthTrack ea = earth_track(htc(), a, {1.0, 2.0});
    const Trajectory b = integrate(htc(), g, s0, 300.0, tol_opt(1e-11));
    const EarthTrack eb = earth_track(htc(), b, {1.0, 2.0});
    const double scale = std::abs(eb.z.back() - eb.z.front());
    CHECK(std::abs(ea.z.back() - eb.z.back()) < 1e-6 * scale);
    CHECK(ea.t.back() == 300.0);
}

TEST_CASE("heading offset rotates the track rigidly") {
    // With eps_psi = 0 the linear law is blind to psi, so psi(0) + d rotates the track by d.
    const ControlGains g{10.6, 0.0};
    const State4 s0{htc_u0(), 0.3, 0.02, 0.0};
    const double d = 0.9;
    const Trajectory a = integrate_with_track(htc(), g, s0, {}, 200.0, tol_opt(1e-11));
    const Trajectory b = integrate_with_track(htc(), g, {s0.u, s0.v, s0.r, s0.psi + d}, {}, 200.0, tol_opt(1e-11));
    const EarthTrack ea = earth_track(htc(), a), eb = earth_track(htc(), b);
    const std::complex<double> rot = std::polar(1.0, d);
    for (double t : {50.0, 120.0, 200.0}) {
        const VecX ya = a.sol.at(t), yb = b.sol.at(t);
        const std::complex<double> za(ya[4], ya[5]), zb(yb[4], yb[5]);
        CHECK(std::abs(zb - rot * za) < 1e-7 * (1.0 + std::abs(za)));
        for (int k = 0; k < 3; ++k) CHECK(std::abs(ya[k] - yb[k]) < 1e-9);
        CHECK(std::abs(yb[3] - ya[3] - d) < 1e-7);
    }
    // Pairwise distances preserved.
    CHECK(std::abs(std::abs(ea.z.back() - ea.z.front()) - std::abs(eb.z.back() - eb.z.front())) < 1e-6);
}

TEST_CASE("reflection equivariance") {
    for (ControlLaw law : {ControlLaw::Linear, ControlLaw::Sinusoidal}) {
        const ControlGains g{10.6, 23.0, law};
        const State4 s0{htc_u0() - 0.5, 0.4, -0.03, 2.0};
        const State4 m0{s0.u, -s0.v, -s0.r, -s0.psi};
        const Trajectory a = integrate(htc(), g, s0, 300.0, tol_opt(1e-11));
        const Trajectory b = integrate(htc(), g, m0, 300.0, tol_opt(1e-11));
        for (double t : {10.0, 100.0, 300.0}) {
            const State4 x = a.state_at(t), y = b.state_at(t);
            CHECK(std::abs(x.u - y.u) < 1e-8);
            CHECK(std::abs(x.v + y.v) < 1e-8);
            CHECK(std::abs(x.r + y.r) < 1e-8);
            CHECK(std::abs(x.psi + y.psi) < 1e-7);
        }
    }
}

TEST_CASE("sinusoidal law is periodic in the heading") {
    const double period = 2.0 * std::numbers::pi * htc().L_pp();  // one turn in the rescaled heading
    const ControlGains g{10.6, 23.0, ControlLaw::Sinusoidal};
    const State4 s0{htc_u0(), 0.2, 0.01, 40.0};
    OdeOptions o;
    o.fixed_step = true;
    o.h_fixed = 0.05;
    const Trajectory a = integrate(htc(), g, s0, 200.0, o);
    const Trajectory b = integrate(htc(), g, {s0.u, s0.v, s0.r, s0.psi + period}, 200.0, o);
    for (std::size_t i = 0; i < a.size(); i += 97) {
        const State4 x = a.state(i), y = b.state(i);
        CHECK(std::abs(x.u - y.u) < 1e-9);
        CHECK(std::abs(x.v - y.v) < 1e-9);
        CHECK(std::abs(x.r - y.r) < 1e-9);
        CHECK(y.psi - x.psi == testutil::Approx(period).epsilon(1e-12));
    }
}

TEST_CASE("drag-only deceleration") {
    ShipParams p = ShipParams::htc();
    p.propeller.K_T = {0, 0, 0, 0, 0, 0};
    const ThrusterModel m(p);
    const Trajectory tr = integrate(m, {0.0, 0.0}, {5.0, 0.0, 0.0, 0.0}, 500.0);
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr.state(i).u <= tr.state(i - 1).u);
    CHECK(tr.final_state().u > 0.0);
    CHECK(tr.final_state().u < 5.0);
}

TEST_CASE("fixed-step mode is bit-reproducible") {
    OdeOptions o;
    o.fixed_step = true;
    o.h_fixed = 0.1;
    const ControlGains g{10.6, 23.0};
    const State4 s0{htc_u0(), 0.1, 0.0, 0.0};
    const Trajectory a = integrate(htc(), g, s0, 300.0, o), b = integrate(htc(), g, s0, 300.0, o);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.state(i).vec() == b.state(i).vec());
}

TEST_CASE("propeller speed rescales time and velocities") {
    const ControlGains g{10.6, 23.0};
    const State4 s0{htc_u0(), 0.2, 0.01, 0.5};
    const Trajectory a = integrate(htc(), g, s0, 300.0, tol_opt(1e-11));
    for (double kappa : {0.5, 2.0}) {
        ShipParams p = ShipParams::htc();
        p.propeller.n_p *= kappa;
        const ThrusterModel mk(p);
        const Trajectory b = integrate(mk, {g.eps_r / kappa, g.eps_psi},
                                       {kappa * s0.u, kappa * s0.v, kappa * s0.r, s0.psi}, 300.0 / kappa, tol_opt(1e-11));
        for (double t : {30.0, 150.0, 300.0}) {
            const State4 x = a.state_at(t), y = b.state_at(t / kappa);
            CHECK(y.u == testutil::Approx(kappa * x.u).epsilon(1e-7));
            CHECK(std::abs(y.v - kappa * x.v) < 1e-7 * kappa);
            CHECK(std::abs(y.r - kappa * x.r) < 1e-7 * kappa);
            CHECK(std::abs(y.psi - x.psi) < 1e-6);
        }
    }
}

TEST_CASE("integrator errors") {
    const ControlGains g{10.6, 23.0};
    const State4 s0{htc_u0(), 0.0, 0.0, 0.0};
    for (double tol : {1e-13, 1e-2}) {
        try {
            (void)integrate(htc(), g, s0, 10.0, tol_opt(tol));
            FAIL("expected InvalidParameter");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidParameter);
        }
    }
    // Finite-time blow-up of y' = y^2 forces the step below the floor.
    const OdeRhs f = [](double, const VecX& y, VecX& dy) { dy = y.cwiseProduct(y); };
    try {
        (void)integrate_ode(f, 0.0, VecX::Ones(1), 2.0, {});
        FAIL("expected StepUnderflow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StepUnderflow);
        CHECK(std::string(e.what()).find("stiffness/kink stall") != std::string::npos);
    }
}

TEST_CASE("self-intersection counter") {
    // Lemniscate of Gerono: one crossing at the origin when sampled off the node.
    std::vector<std::complex<double>> z;
    for (int i = 0; i < 1001; ++i) {
        const double t = 2.0 * std::numbers::pi * (i + 0.5) / 1001.0;
        z.emplace_back(std::cos(t), std::sin(t) * std::cos(t));
    }
    CHECK(count_self_intersections(z, 0, z.size() - 1) == 1);
    std::vector<std::complex<double>> circle;
    for (int i = 0; i <= 100; ++i) circle.push_back(std::polar(1.0, 2.0 * std::numbers::pi * (i + 0.3) / 100.0 * 0.99));
    CHECK(count_self_intersections(circle, 0, circle.size() - 1) == 0);
}
