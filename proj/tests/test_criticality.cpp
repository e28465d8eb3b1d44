#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "shipctl/criticality.hpp"
#include "shipctl/error.hpp"
#include "shipctl/stability.hpp"
#include "test_util.hpp"

using namespace shipctl;
using testutil::htc;
using testutil::htc_u0;

namespace {

constexpr double kPi = std::numbers::pi;

HopfFrame frame_at(const ThrusterModel& m, double u0, double eps_r) {
    const double ep = boundary_eps_psi(m, u0, eps_r);
    return hopf_frame(m, {eps_r, ep, ControlLaw::Linear}, u0);
}

ExpansionData expansion_at(const ThrusterModel& m, double u0, const HopfFrame& f) {
    return m.expand_at_equilibrium({f.eps_r, f.eps_psi, ControlLaw::Linear}, u0);
}

// Frame with replaced columns; Z taken from the explicit inverse.
HopfFrame with_T(const HopfFrame& f, const Eigen::Matrix3d& T) {
    HopfFrame g = f;
    g.T = T;
    const Eigen::Matrix3d Ti = T.inverse();
    g.Z11 = Ti(0, 0);
    g.Z12 = Ti(0, 1);
    g.Z21 = Ti(1, 0);
    g.Z22 = Ti(1, 1);
    return g;
}

// Midpoint rule on a fine uniform grid; independent of the panel splitting.
template <class F>
double brute_integral(F&& f, int n = 400000) {
    const double h = 2.0 * kPi / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f((i + 0.5) * h);
    return acc * h;
}

}  // namespace

TEST_CASE("pitchfork reduction at the zero-heading-gain boundary") {
    const PitchforkData pf = pitchfork_coefficients(htc(), htc_u0());
    CHECK(pf.eps_r1 == testutil::Approx(130.13).epsilon(0.01 / 130.13));
    CHECK(pf.biorth_residual < 1e-10);
    CHECK((pf.B0 * pf.e0).norm() < 1e-10 * pf.B0.norm());
    CHECK((pf.B0.transpose() * pf.e0s).norm() < 1e-10 * pf.B0.norm() * pf.e0s.norm());
    CHECK(pf.e0.norm() == testutil::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(pf.B0.determinant()) < 1e-12 * pf.B0.squaredNorm());
    CHECK(pf.lambda < 0.0);
    CHECK(pf.coef_lin == testutil::Approx(-4.04e-2).epsilon(0.02));
    CHECK(pf.coef_lin == testutil::Approx(-4.040236e-2).epsilon(1e-6));
    CHECK(pf.criticality == Criticality::Supercritical);
    CHECK(pf.x_slope() > 0.0);
}

TEST_CASE("pitchfork linear coefficient equals the eigenvalue drift") {
    const PitchforkData pf = pitchfork_coefficients(htc(), htc_u0());
    const double L = htc().L_pp();
    // Eigenvalue of the (v, r) block closest to zero, as a function of the unscaled gain.
    auto small_eig = [&](double er) {
        const auto lin = linearize(htc(), {er, 0.0, ControlLaw::Linear}, htc_u0());
        const Eigen::Matrix2d B = lin.A.block<2, 2>(1, 1);
        const Eigen::Vector2cd ev = B.eigenvalues();
        return std::abs(ev[0]) < std::abs(ev[1]) ? ev[0].real() : ev[1].real();
    };
    const double d = 1e-3;
    const double slope = (small_eig(pf.eps_r1 + d) - small_eig(pf.eps_r1 - d)) / (2.0 * d) * L;
    CHECK(slope == testutil::Approx(pf.coef_lin).epsilon(1e-6));
}

// The reference quadratic coefficient does not follow from the model; see README.
TEST_CASE("pitchfork quadratic coefficient, reference value" * doctest::should_fail()) {
    const PitchforkData pf = pitchfork_coefficients(htc(), htc_u0());
    CHECK(pf.coef_quad == testutil::Approx(-1.32e-3).epsilon(0.02));
}

TEST_CASE("pitchfork quadratic coefficient, model value") {
    const PitchforkData pf = pitchfork_coefficients(htc(), htc_u0());
    CHECK(pf.coef_quad == testutil::Approx(-1.006754e-2).epsilon(1e-5));
    // Direct projection of the modulus terms on the adjoint kernel vector.
    const ExpansionData ex = htc().expand_at_equilibrium({pf.eps_r1, 0.0, ControlLaw::Linear}, htc_u0());
    const double v = pf.e0[0], r = pf.e0[1];
    const double f1 = ex.a11 * v * std::abs(v) + ex.a12 * v * std::abs(r) + ex.a21 * r * std::abs(v) +
                      ex.a22 * r * std::abs(r);
    const double f2 = ex.b11 * v * std::abs(v) + ex.b12 * v * std::abs(r) + ex.b21 * r * std::abs(v) +
                      ex.b22 * r * std::abs(r);
    CHECK(f1 * pf.e0s[0] + f2 * pf.e0s[1] == testutil::Approx(pf.coef_quad).epsilon(1e-12));
}

TEST_CASE("Hopf frame on the stability boundary") {
    const BoundaryCoeffs K = boundary_coeffs(htc(), htc_u0());
    for (int i = 0; i < 30; ++i) {
        const double er = 130.0 * i / 29.0;
        CAPTURE(er);
        const HopfFrame f = frame_at(htc(), htc_u0(), er);
        const auto lin = linearize(htc(), {f.eps_r, f.eps_psi, ControlLaw::Linear}, htc_u0());
        CHECK(std::abs(f.mu) < 1e-9);
        CHECK(f.omega == testutil::Approx(std::sqrt(lin.c0 / lin.c2)).epsilon(1e-8));
        CHECK(f.lambda4 < 0.0);
        CHECK(f.lambda1 < 0.0);
        CHECK(std::abs(K.gap(htc().scaled(f.eps_r), htc().scaled(f.eps_psi))) < 1e-12);

        Eigen::Matrix3d J = Eigen::Matrix3d::Zero();
        J(0, 0) = f.mu;
        J(0, 1) = -f.omega;
        J(1, 0) = f.omega;
        J(1, 1) = f.mu;
        J(2, 2) = f.lambda4;
        const Eigen::Matrix3d R = f.T.inverse() * f.P * f.T - J;
        CHECK(R.norm() < 1e-9 * f.P.norm());

        const Eigen::Matrix3d Ti = f.T.inverse();
        CHECK(f.Z11 == testutil::Approx(Ti(0, 0)).epsilon(1e-10));
        CHECK(f.Z12 == testutil::Approx(Ti(0, 1)).epsilon(1e-10));
        CHECK(f.Z21 == testutil::Approx(Ti(1, 0)).epsilon(1e-10));
        CHECK(f.Z22 == testutil::Approx(Ti(1, 1)).epsilon(1e-10));
        CHECK(f.s().norm() == testutil::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("uncontrolled ship has no oscillatory pair") {
    try {
        (void)hopf_frame(htc(), {0.0, 0.0, ControlLaw::Linear}, htc_u0());
        FAIL("expected NotOscillatory");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotOscillatory);
    }
}

TEST_CASE("radial coefficient chi") {
    const HopfFrame f = frame_at(htc(), htc_u0(), 10.6);
    const ExpansionData ex = expansion_at(htc(), htc_u0(), f);
    const Eigen::Matrix3d Ti = f.T.inverse();
    for (int i = 0; i < 128; ++i) {
        const double phi = 2.0 * kPi * i / 128.0;
        CAPTURE(phi);
        // Map to the physical plane, evaluate, map back, project radially.
        const Eigen::Vector3d x = f.T * Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0);
        const Eigen::Vector2d g = ex.modulus_terms(x[0], x[1]);
        const Eigen::Vector3d h = Ti * Eigen::Vector3d(g[0], g[1], 0.0);
        const double oracle = std::cos(phi) * h[0] + std::sin(phi) * h[1];
        const double c = chi(f, ex, phi);
        CHECK(std::abs(c - oracle) < 1e-12 * (1.0 + std::abs(oracle)));
        // Each summand is a product of two odd factors, so chi is pi-periodic.
        CHECK(chi(f, ex, phi + kPi) == testutil::Approx(c).epsilon(1e-10).scale(1e-14));
        CHECK(chi(f, ex, phi + 2.0 * kPi) == testutil::Approx(c).epsilon(1e-10));
    }
}

TEST_CASE("modulus integral closed form") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Vector2d z(U(rng), U(rng)), p(U(rng), U(rng)), w(U(rng), U(rng));
        const double brute = brute_integral([&](double phi) {
            const Eigen::Vector2d e(std::cos(phi), std::sin(phi));
            return z.dot(e) * p.dot(e) * std::abs(w.dot(e));
        });
        CHECK(modulus_integral(z, p, w) == testutil::Approx(brute).epsilon(1e-8).scale(1.0));
    }
    CHECK(modulus_integral({1, 0}, {1, 0}, {0, 0}) == 0.0);
    // z = p = w = e1: integral of |cos|^3 is 8/3.
    CHECK(modulus_integral({1, 0}, {1, 0}, {1, 0}) == testutil::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Sigma: quadrature against closed form and a brute-force integral") {
    for (double er : {1.0, 10.6, 60.0, 120.0}) {
        CAPTURE(er);
        const HopfFrame f = frame_at(htc(), htc_u0(), er);
        const ExpansionData ex = expansion_at(htc(), htc_u0(), f);
        const SigmaResult s = sigma(f, ex);
        for (std::size_t k = 0; k < 8; ++k)
            CHECK(std::abs(s.term_quadrature[k] - s.term_closed[k]) < 1e-10 * (1.0 + std::abs(s.term_closed[k])));
        CHECK(s.sigma == testutil::Approx(s.sigma_closed).epsilon(1e-10));
        const double brute = brute_integral([&](double phi) { return chi(f, ex, phi); });
        CHECK(s.sigma == testutil::Approx(brute).epsilon(1e-8));
        CHECK(s.sigma < 0.0);
        CHECK(s.criticality == Criticality::Supercritical);
        CHECK(s.amplitude_slope == testutil::Approx(-2.0 * kPi / s.sigma).epsilon(1e-15));
        REQUIRE(s.chi_samples.size() == 129);
        CHECK(s.chi_samples.front().second == testutil::Approx(s.chi_samples.back().second).epsilon(1e-10));
    }
}

TEST_CASE("Sigma sign is independent of the frame normalisation") {
    const HopfFrame f = frame_at(htc(), htc_u0(), 10.6);
    const ExpansionData ex = expansion_at(htc(), htc_u0(), f);
    const double s0 = sigma(f, ex).sigma;
    for (double k : {0.1, 2.5, 40.0})
        for (double th : {0.0, 0.7, 2.9}) {
            CAPTURE(k);
            CAPTURE(th);
            Eigen::Matrix3d T = f.T;
            const double c = std::cos(th), s = std::sin(th);
            T.col(0) = k * (c * f.a() + s * f.b());
            T.col(1) = k * (-s * f.a() + c * f.b());
            const double s1 = sigma(with_T(f, T), ex).sigma;
            CHECK(s1 < 0.0);
            CHECK(s1 == testutil::Approx(k * s0).epsilon(1e-9));
        }
}

TEST_CASE("Sigma sweeps stay supercritical") {
    struct Sweep {
        ShipParams p;
        double lo, hi;
    };
    const std::vector<Sweep> sweeps = {{ShipParams::htc(), 1.0, 130.0},
                                       {testutil::with_Dp(9.1575), 1.0, 68.0},
                                       {testutil::with_xT(-0.3), 21.0, 152.0},
                                       {testutil::with_xT(0.1), 236.0, 488.0}};
    for (const auto& sw : sweeps) {
        const ThrusterModel m(sw.p);
        const double u0 = solve_u0(m).u0;
        std::vector<double> grid;
        for (int i = 0; i <= 100; ++i) grid.push_back(sw.lo + (sw.hi - sw.lo) * i / 100.0);
        const auto rows = sigma_sweep(m, u0, grid, 1);
        CAPTURE(sw.p.geometry.x_T);
        CAPTURE(sw.p.propeller.D_p);
        CHECK(rows.size() >= 95);
        for (const auto& r : rows) {
            CAPTURE(r.eps_r);
            CHECK(r.sigma < 0.0);
            CHECK(r.criticality == Criticality::Supercritical);
            CHECK(r.closed_form_gap < 1e-10);
        }
    }
}

TEST_CASE("Sigma approaches zero toward the pitchfork end of the boundary") {
    std::vector<double> grid;
    for (int i = 0; i <= 25; ++i) grid.push_back(1.0 + 5.0 * i);
    const auto rows = sigma_sweep(htc(), htc_u0(), grid, 1);
    REQUIRE(rows.size() == grid.size());
    CHECK(std::abs(rows.back().sigma) < std::abs(rows.front().sigma));
    for (std::size_t i = 13; i + 1 < rows.size(); ++i) CHECK(rows[i + 1].sigma > rows[i].sigma);
}
