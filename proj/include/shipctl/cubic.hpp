#pragma once

#include <array>
#include <complex>

namespace shipctl {

/// Roots of l^3 + c2 l^2 + c1 l + c0 in closed form, each real root polished by
/// one Newton step. With a complex pair the order is {real, mu + i w, mu - i w}
/// (w > 0); otherwise three real roots in descending order.
std::array<std::complex<double>, 3> cubic_roots(double c2, double c1, double c0);

}  // namespace shipctl
