#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace shipctl {

using VecX = Eigen::VectorXd;
using OdeRhs = std::function<void(double t, const VecX& y, VecX& dy)>;

struct OdeOptions {
    double tol = 1e-9;         // error scale tol * (1 + |y_i|)
    double h_init = 0.0;       // 0: automatic
    double h_max = 0.0;        // 0: unbounded
    bool fixed_step = false;   // classical RK4 with step h_fixed
    double h_fixed = 0.05;
    bool dense = true;         // keep per-step interpolation data
    long max_steps = 50'000'000;
};

/// Output of one integration. With dense output every accepted step keeps
/// the Dormand-Prince continuous extension (RK4 mode: cubic Hermite).
class OdeSolution {
public:
    std::vector<double> t;
    std::vector<VecX> y;
    long rhs_evals = 0;
    long rejected = 0;

    [[nodiscard]] VecX at(double time) const;
    [[nodiscard]] bool has_dense() const { return !coeffs_.empty(); }
    [[nodiscard]] const VecX& back() const { return y.back(); }

    // step k covers [t[k], t[k+1]]
    std::vector<std::array<VecX, 5>> coeffs_;
    bool hermite_ = false;
};

/// Adaptive Dormand-Prince 5(4) (or fixed-step RK4). Throws Error(StepUnderflow)
/// when the step falls below 1e-13 (message carries the last state).
OdeSolution integrate_ode(const OdeRhs& f, double t0, const VecX& y0, double t_end, const OdeOptions& opt);

}  // namespace shipctl
