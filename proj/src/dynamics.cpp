#include "shipctl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shipctl/error.hpp"
#include "shipctl/quadrature.hpp"

namespace shipctl {

namespace {

// z' = (u + i v) exp(i psi) in the rescaled state.
std::complex<double> track_velocity(const State4& s) {
    return std::complex<double>(s.u, s.v) * std::polar(1.0, s.psi);
}

void check_tol(const OdeOptions& opt) {
    if (!opt.fixed_step && !(opt.tol >= 1e-12 && opt.tol <= 1e-3))
        throw Error(ErrorKind::InvalidParameter, "integration tolerance must lie in [1e-12, 1e-3]");
}

}  // namespace

Trajectory integrate(const ThrusterModel& model, const ControlGains& gains, const State4& s0, double t_end,
                     const OdeOptions& opt) {
    check_tol(opt);
    Trajectory tr;
    tr.gains = gains;
    const OdeRhs f = [&](double, const VecX& y, VecX& dy) { dy = model.rhs(gains, State4::from(y.head<4>())); };
    tr.sol = integrate_ode(f, 0.0, s0.vec(), t_end, opt);
    return tr;
}

Trajectory integrate_with_track(const ThrusterModel& model, const ControlGains& gains, const State4& s0,
                                std::complex<double> z0, double t_end, const OdeOptions& opt) {
    check_tol(opt);
    Trajectory tr;
    tr.gains = gains;
    tr.with_track = true;
    const OdeRhs f = [&](double, const VecX& y, VecX& dy) {
        const State4 s = State4::from(y.head<4>());
        dy.resize(6);
        dy.head<4>() = model.rhs(gains, s);
        const auto zd = track_velocity(s);
        dy[4] = zd.real();
        dy[5] = zd.imag();
    };
    VecX y0(6);
    y0 << s0.u, s0.v, s0.r, s0.psi, z0.real(), z0.imag();
    tr.sol = integrate_ode(f, 0.0, y0, t_end, opt);
    return tr;
}

EarthTrack earth_track(const ThrusterModel& model, const Trajectory& traj, std::complex<double> z0) {
    EarthTrack et;
    const std::size_t n = traj.size();
    et.t = traj.times();
    et.z.resize(n);
    et.heading.resize(n);
    et.eta_deg.resize(n);
    const GaussRule rule = gauss_legendre(5);
    std::complex<double> z = z0;
    const std::complex<double> shift = traj.with_track ? z0 - std::complex<double>(traj.sol.y[0][4], traj.sol.y[0][5])
                                                       : std::complex<double>();
    for (std::size_t i = 0; i < n; ++i) {
        const State4 s = traj.state(i);
        if (traj.with_track) {
            et.z[i] = std::complex<double>(traj.sol.y[i][4], traj.sol.y[i][5]) + shift;
        } else {
            if (i > 0) {
                // Sub-panels keep the heading change per panel below 0.1 rad.
                const double turn = std::abs(s.psi - traj.state(i - 1).psi);
                const int m = std::max(1, static_cast<int>(std::ceil(turn / 0.1)));
                const double dt = (et.t[i] - et.t[i - 1]) / m;
                for (int k = 0; k < m; ++k) {
                    const double half = 0.5 * dt, mid = et.t[i - 1] + (k + 0.5) * dt;
                    std::complex<double> acc;
                    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
                        acc += rule.weights[q] * track_velocity(traj.state_at(mid + half * rule.nodes[q]));
                    z += half * acc;
                }
            }
            et.z[i] = z;
        }
        et.heading[i] = s.psi;
        et.eta_deg[i] = model.steering_angle(traj.gains, s) * 180.0 / std::numbers::pi;
    }
    return et;
}

double circle_radius(const ThrusterModel&, const State4& s) {
    if (s.r == 0.0) throw Error(ErrorKind::InvalidState, "invalid state: straight motion has no turning radius");
    return std::hypot(s.u, s.v) / std::abs(s.r);
}

std::optional<double> return_time(const ThrusterModel& model, const Trajectory& traj, double t_ref, double close) {
    const Vec4 x0 = traj.sol.at(t_ref).head<4>();
    const Eigen::Vector3d n = model.rhs(traj.gains, State4::from(x0)).head<3>();
    if (n.norm() == 0.0) return std::nullopt;
    auto g = [&](double t) { return (traj.sol.at(t).head<3>() - x0.head<3>()).dot(n); };
    const auto& ts = traj.times();
    auto it = std::upper_bound(ts.begin(), ts.end(), t_ref);
    if (it == ts.end()) return std::nullopt;
    std::size_t k = static_cast<std::size_t>(it - ts.begin());
    // Leave the section first.
    while (k < ts.size() && g(ts[k]) <= 0.0) ++k;
    for (; k + 1 < ts.size(); ++k) {
        const double a = ts[k], b = ts[k + 1];
        if (g(a) < 0.0 && g(b) >= 0.0) {
            double lo = a, hi = b;
            for (int it2 = 0; it2 < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it2) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) < 0.0 ? lo : hi) = mid;
            }
            const double tc = 0.5 * (lo + hi);
            if ((traj.sol.at(tc).head<3>() - x0.head<3>()).norm() < close) return tc - t_ref;
        }
    }
    return std::nullopt;
}

int count_self_intersections(const std::vector<std::complex<double>>& z, std::size_t i0, std::size_t i1) {
    auto cross = [](std::complex<double> a, std::complex<double> b) { return a.real() * b.imag() - a.imag() * b.real(); };
    int count = 0;
    for (std::size_t i = i0; i + 1 <= i1; ++i)
        for (std::size_t j = i + 2; j + 1 <= i1; ++j) {
            const auto p = z[i], r = z[i + 1] - z[i];
            const auto q = z[j], s = z[j + 1] - z[j];
            const double den = cross(r, s);
            if (den == 0.0) continue;
            const double t = cross(q - p, s) / den;
            const double u = cross(q - p, r) / den;
            if (t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0) ++count;
        }
    return count;
}

}  // namespace shipctl
