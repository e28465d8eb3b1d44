#include "shipctl/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shipctl/error.hpp"

namespace shipctl {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

[[noreturn]] void underflow(double t, const VecX& y) {
    std::ostringstream os;
    os << "stiffness/kink stall at t = " << t << ", state =";
    for (Eigen::Index i = 0; i < y.size(); ++i) os << ' ' << y[i];
    throw Error(ErrorKind::StepUnderflow, os.str());
}

OdeSolution rk4(const OdeRhs& f, double t0, const VecX& y0, double t_end, const OdeOptions& opt) {
    OdeSolution sol;
    sol.hermite_ = true;
    sol.t.push_back(t0);
    sol.y.push_back(y0);
    const long n = std::max<long>(1, std::lround(std::ceil((t_end - t0) / opt.h_fixed - 1e-9)));
    const double h = (t_end - t0) / n;
    VecX y = y0, k1(y0.size()), k2(y0.size()), k3(y0.size()), k4(y0.size()), fend(y0.size());
    f(t0, y, k1);
    sol.rhs_evals = 1;
    for (long i = 0; i < n; ++i) {
        const double t = t0 + i * h;
        f(t + h / 2, y + h / 2 * k1, k2);
        f(t + h / 2, y + h / 2 * k2, k3);
        f(t + h, y + h * k3, k4);
        VecX yn = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        f(t + h, yn, fend);
        sol.rhs_evals += 4;
        if (opt.dense) sol.coeffs_.push_back({y, k1, yn, fend, VecX()});
        y = yn;
        k1 = fend;
        sol.t.push_back(i + 1 == n ? t_end : t0 + (i + 1) * h);
        sol.y.push_back(y);
    }
    return sol;
}

}  // namespace

VecX OdeSolution::at(double time) const {
    if (t.size() == 1 || time <= t.front()) return y.front();
    if (time >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    if (coeffs_.empty()) {
        const double th = (time - t[k]) / (t[k + 1] - t[k]);
        return (1 - th) * y[k] + th * y[k + 1];
    }
    const double h = t[k + 1] - t[k];
    const double th = (time - t[k]) / h;
    const auto& c = coeffs_[k];
    if (hermite_) {
        const double th2 = th * th, th3 = th2 * th;
        return (2 * th3 - 3 * th2 + 1) * c[0] + (th3 - 2 * th2 + th) * h * c[1] + (-2 * th3 + 3 * th2) * c[2] +
               (th3 - th2) * h * c[3];
    }
    const double th1 = 1.0 - th;
    return c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
}

OdeSolution integrate_ode(const OdeRhs& f, double t0, const VecX& y0, double t_end, const OdeOptions& opt) {
    if (!(opt.tol >= 1e-14 && opt.tol <= 1e-2))
        throw Error(ErrorKind::InvalidParameter, "integration tolerance outside the supported range");
    if (!(t_end >= t0)) throw Error(ErrorKind::InvalidParameter, "t_end before t0");
    if (opt.fixed_step) return rk4(f, t0, y0, t_end, opt);

    OdeSolution sol;
    sol.t.push_back(t0);
    sol.y.push_back(y0);
    if (t_end == t0) return sol;

    const Eigen::Index n = y0.size();
    VecX y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yn(n), err(n), tmp(n);
    f(t0, y, k1);
    sol.rhs_evals = 1;

    const double span = t_end - t0;
    double h = opt.h_init;
    if (h <= 0.0) {
        const double sc0 = (opt.tol * (1.0 + y.array().abs())).matrix().norm() / std::sqrt(double(n));
        const double fn = k1.norm() / std::sqrt(double(n));
        h = fn > 0.0 ? 0.01 * sc0 / fn : 1e-3 * span;
        h = std::clamp(h, 1e-10 * std::max(1.0, span), span);
        h = std::max(h, 1e-6);
    }
    const double hmax = opt.h_max > 0.0 ? opt.h_max : span;
    h = std::min(h, hmax);

    double t = t0;
    long steps = 0;
    double err_prev = 1e-4;
    while (t < t_end) {
        if (++steps > opt.max_steps) underflow(t, y);
        bool last = false;
        if (t + h >= t_end || t + 1.01 * h >= t_end) {
            h = t_end - t;
            last = true;
        }
        if (h < 1e-13) underflow(t, y);

        f(t + c2 * h, y + h * (a21 * k1), k2);
        f(t + c3 * h, y + h * (a31 * k1 + a32 * k2), k3);
        f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
        f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
        tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(t + h, tmp, k6);
        yn = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f(t + h, yn, k7);
        sol.rhs_evals += 6;

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double e = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sc = opt.tol * (1.0 + std::max(std::abs(y[i]), std::abs(yn[i])));
            e += (err[i] / sc) * (err[i] / sc);
        }
        e = std::sqrt(e / double(n));
        if (!std::isfinite(e)) e = 1e10;

        if (e <= 1.0) {
            if (opt.dense) {
                const VecX dy = yn - y;
                const VecX bspl = h * k1 - dy;
                std::array<VecX, 5> c;
                c[0] = y;
                c[1] = dy;
                c[2] = bspl;
                c[3] = dy - h * k7 - bspl;
                c[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
                sol.coeffs_.push_back(std::move(c));
            }
            t = last ? t_end : t + h;
            y = yn;
            k1 = k7;
            sol.t.push_back(t);
            sol.y.push_back(y);
            // PI step control.
            const double fac = 0.9 * std::pow(std::max(e, 1e-10), -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
            err_prev = std::max(e, 1e-4);
            h = std::min(hmax, h * std::clamp(fac, 0.2, 5.0));
        } else {
            ++sol.rejected;
            h *= std::max(0.2, 0.9 * std::pow(e, -0.2));
        }
    }
    return sol;
}

}  // namespace shipctl
