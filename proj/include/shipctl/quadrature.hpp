#pragma once

#include <vector>

namespace shipctl {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton on P_n from the Chebyshev initial guesses).
GaussRule gauss_legendre(int n);

/// Integrate f over [a, b] split at the given breakpoints, n points per panel.
template <class F>
double panel_integrate(F&& f, double a, double b, std::vector<double> breaks, const GaussRule& rule);

}  // namespace shipctl

#include <algorithm>

template <class F>
double shipctl::panel_integrate(F&& f, double a, double b, std::vector<double> breaks, const GaussRule& rule) {
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double x) { return !(x > a && x < b); }),
                 breaks.end());
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k], hi = breaks[k + 1];
        if (hi - lo <= 0.0) continue;
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double s = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(mid + half * rule.nodes[i]);
        total += half * s;
    }
    return total;
}
