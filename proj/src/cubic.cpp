#include "shipctl/cubic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace shipctl {

namespace {

double polish(double x, double c2, double c1, double c0) {
    const double p = ((x + c2) * x + c1) * x + c0;
    const double dp = (3.0 * x + 2.0 * c2) * x + c1;
    return dp != 0.0 ? x - p / dp : x;
}

}  // namespace

std::array<std::complex<double>, 3> cubic_roots(double c2, double c1, double c0) {
    using C = std::complex<double>;
    // Depressed cubic t^3 + p t + q with l = t - c2/3.
    const double s = c2 / 3.0;
    const double p = c1 - c2 * c2 / 3.0;
    const double q = 2.0 * s * s * s - s * c1 + c0;
    const double disc = q * q / 4.0 + p * p * p / 27.0;

    if (disc <= 0.0 && p < 0.0) {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double th = std::acos(arg) / 3.0;
        std::array<double, 3> r;
        for (int k = 0; k < 3; ++k) r[k] = polish(m * std::cos(th - 2.0 * std::numbers::pi * k / 3.0) - s, c2, c1, c0);
        std::sort(r.begin(), r.end(), std::greater<>());
        return {C(r[0]), C(r[1]), C(r[2])};
    }
    if (disc <= 0.0) {
        // p == 0 and q == 0: triple root.
        const double x = -s;
        return {C(x), C(x), C(x)};
    }

    const double sq = std::sqrt(disc);
    const double t = std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq);
    const double x = polish(t - s, c2, c1, c0);
    // Deflate: l^2 + b l + c with b = c2 + x, c = c1 + x b.
    const double b = c2 + x;
    const double c = c1 + x * b;
    const double d = b * b / 4.0 - c;
    if (d >= 0.0) {
        // Numerically a real triple; keep the real form.
        const double e = std::sqrt(d);
        std::array<double, 3> r{x, -b / 2.0 + e, -b / 2.0 - e};
        std::sort(r.begin(), r.end(), std::greater<>());
        return {C(r[0]), C(r[1]), C(r[2])};
    }
    const double w = std::sqrt(-d);
    return {C(x), C(-b / 2.0, w), C(-b / 2.0, -w)};
}

}  // namespace shipctl
