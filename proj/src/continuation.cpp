#include "shipctl/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "shipctl/error.hpp"
#include "shipctl/stability.hpp"

namespace shipctl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using MatX = Eigen::MatrixXd;

double wnorm(const VecX& a, const VecX& w) { return a.cwiseProduct(w).norm(); }
double wdot(const VecX& a, const VecX& b, const VecX& w) { return a.cwiseProduct(w).dot(b.cwiseProduct(w)); }

std::vector<std::complex<double>> eigenvalues(const MatX& M) {
    Eigen::EigenSolver<MatX> es(M, false);
    std::vector<std::complex<double>> out(es.eigenvalues().data(), es.eigenvalues().data() + M.rows());
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
    return out;
}

// ---------------------------------------------------------------- equilibria

struct EqProblem {
    const ThrusterModel& model;
    ControlGains gains;
    FreeParam free;
    bool reduced;
    double psi_fixed;
    int n;

    Vec4 full(const VecX& x) const {
        return reduced ? Vec4(x[0], x[1], x[2], psi_fixed) : Vec4(x[0], x[1], x[2], x[3]);
    }
    VecX G(const VecX& x, double p) const { return model.rhs(with_param(gains, free, p), full(x)).head(n); }

    MatX jac(const VecX& x, double p) const {
        const ControlGains g = with_param(gains, free, p);
        MatX J(n, n + 1);
        J.leftCols(n) = rhs_jacobian(model, g, full(x)).topLeftCorner(n, n);
        const double h = 1e-7 * (1.0 + std::abs(p));
        J.col(n) = (G(x, p + h) - G(x, p - h)) / (2.0 * h);
        return J;
    }
};

bool newton_eq(const EqProblem& pr, VecX& Z, const VecX* tangent, const VecX* Zpred, const VecX& w,
               const ContinuationOptions& opt, double& residual) {
    const int n = pr.n;
    for (int it = 0; it < opt.max_newton; ++it) {
        const VecX x = Z.head(n);
        const double p = Z[n];
        VecX R(n + 1);
        R.head(n) = pr.G(x, p);
        R[n] = tangent ? wdot(Z - *Zpred, *tangent, w) : 0.0;
        residual = R.head(n).lpNorm<Eigen::Infinity>();
        MatX J(n + 1, n + 1);
        J.topRows(n) = pr.jac(x, p);
        if (tangent)
            J.row(n) = tangent->cwiseProduct(w).cwiseProduct(w).transpose();
        else
            J.row(n).setZero(), J(n, n) = 1.0;
        const VecX dZ = J.partialPivLu().solve(-R);
        if (!dZ.allFinite()) return false;
        Z += dZ;
        if (dZ.lpNorm<Eigen::Infinity>() < 1e-11 * (1.0 + Z.lpNorm<Eigen::Infinity>())) {
            residual = pr.G(Z.head(n), Z[n]).lpNorm<Eigen::Infinity>();
            return residual < opt.newton_tol;
        }
    }
    residual = pr.G(Z.head(n), Z[n]).lpNorm<Eigen::Infinity>();
    return residual < opt.newton_tol;
}

int unstable_count(const std::vector<std::complex<double>>& ev) {
    int k = 0;
    for (const auto& l : ev)
        if (l.real() > 1e-10) ++k;
    return k;
}

BranchPoint make_eq_point(const EqProblem& pr, const VecX& Z, double residual) {
    BranchPoint bp;
    bp.param = Z[pr.n];
    bp.gains = with_param(pr.gains, pr.free, bp.param);
    bp.solution = State4::from(pr.full(Z.head(pr.n)));
    bp.spectrum = equilibrium_spectrum(pr.model, bp.gains, bp.state(), pr.reduced);
    bp.stable = unstable_count(bp.spectrum) == 0;
    bp.residual = residual;
    return bp;
}

Branch run_eq_branch(const EqProblem& pr, VecX Z, VecX t, const ContinuationOptions& opt, Branch br) {
    const int n = pr.n;
    VecX w = VecX::Ones(n + 1);
    if (!pr.reduced) w[3] = 1.0 / pr.model.L_pp();
    w[n] = opt.param_weight;
    t /= wnorm(t, w);

    double residual = 0.0;
    if (!newton_eq(pr, Z, nullptr, nullptr, w, opt, residual)) {
        br.termination = "start point did not converge";
        return br;
    }
    if (br.points.empty()) br.points.push_back(make_eq_point(pr, Z, residual));

    double ds = opt.ds;
    while (static_cast<int>(br.points.size()) < opt.max_points) {
        const VecX Zpred = Z + ds * t;
        VecX Zn = Zpred;
        double res = 0.0;
        if (!newton_eq(pr, Zn, &t, &Zpred, w, opt, res)) {
            ds *= 0.5;
            if (ds < opt.ds_min) {
                br.termination = "corrector diverged at minimum step";
                return br;
            }
            continue;
        }
        VecX tn = Zn - Z;
        tn /= wnorm(tn, w);
        BranchPoint bp = make_eq_point(pr, Zn, res);
        bp.ds = ds;
        const BranchPoint& prev = br.points.back();
        const int du = unstable_count(bp.spectrum) - unstable_count(prev.spectrum);
        if (du != 0) {
            bool complex_cross = false;
            for (const auto& l : bp.spectrum)
                if (std::abs(l.imag()) > 1e-9 && std::abs(l.real()) < 0.1 * std::abs(l.imag())) complex_cross = true;
            bp.event = complex_cross ? BranchEvent::Hopf : BranchEvent::Pitchfork;
        } else if (t[n] * tn[n] < 0.0) {
            bp.event = BranchEvent::Fold;
        }
        br.points.push_back(bp);
        Z = Zn;
        t = tn;
        ds = std::min(opt.ds_max, ds * 1.3);
        if (Z[n] < opt.p_min || Z[n] > opt.p_max) {
            br.termination = "parameter range left";
            return br;
        }
    }
    br.termination = "maximum number of points";
    return br;
}

// ------------------------------------------------------------ periodic orbits

struct SegmentFlow {
    Vec4 end = Vec4::Zero();
    Mat4 Phi = Mat4::Identity();
    Vec4 S = Vec4::Zero();  // d end / d p
    Vec4 vmax = Vec4::Constant(-1e300);
    Vec4 vmin = Vec4::Constant(1e300);
};

SegmentFlow flow_segment(const ThrusterModel& model, const ControlGains& gains, FreeParam free, const Vec4& x0,
                         double dt, double tol, bool variational, bool central = false) {
    SegmentFlow out;
    const double p = get_param(gains, free);
    OdeOptions oo;
    oo.tol = tol;
    oo.dense = false;
    oo.max_steps = 200000;
    // The end point always comes from the plain flow so that residuals agree
    // between chord and full evaluations; the variational part has its own steps.
    {
        const OdeRhs f = [&](double, const VecX& y, VecX& dy) { dy = model.rhs(gains, Vec4(y.head<4>())); };
        const OdeSolution sol = integrate_ode(f, 0.0, x0, dt, oo);
        out.end = sol.back().head<4>();
        for (const auto& y : sol.y) {
            out.vmax = out.vmax.cwiseMax(y.head<4>());
            out.vmin = out.vmin.cwiseMin(y.head<4>());
        }
    }
    if (!variational) return out;
    const OdeRhs f = [&](double, const VecX& y, VecX& dy) {
        const Vec4 x = y.head<4>();
        const Vec4 fx = model.rhs(gains, x);
        dy.resize(24);
        dy.head<4>() = fx;
        for (int c = 0; c < 5; ++c) {
            const Vec4 dir = y.segment<4>(4 + 4 * c);
            double scale = 0.0;
            for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(dir[i]) / (1.0 + std::abs(x[i])));
            const double dp = c == 4 ? 1.0 : 0.0;
            if (c == 4) scale = std::max(scale, 1.0 / (1.0 + std::abs(p)));
            if (scale == 0.0) {
                dy.segment<4>(4 + 4 * c).setZero();
                continue;
            }
            if (!central) {
                const double h = 1e-7 / scale;
                const ControlGains g = dp != 0.0 ? with_param(gains, free, p + h) : gains;
                dy.segment<4>(4 + 4 * c) = (model.rhs(g, Vec4(x + h * dir)) - fx) / h;
                continue;
            }
            // Central differences: truncation and round-off both near 1e-11.
            const double h = 5e-6 / scale;
            const ControlGains gp = dp != 0.0 ? with_param(gains, free, p + h) : gains;
            const ControlGains gm = dp != 0.0 ? with_param(gains, free, p - h) : gains;
            dy.segment<4>(4 + 4 * c) = (model.rhs(gp, Vec4(x + h * dir)) - model.rhs(gm, Vec4(x - h * dir))) / (2 * h);
        }
    };
    VecX y0 = VecX::Zero(24);
    y0.head<4>() = x0;
    for (int i = 0; i < 4; ++i) y0[4 + 5 * i] = 1.0;
    const OdeSolution sol = integrate_ode(f, 0.0, y0, dt, oo);
    const VecX& y = sol.back();
    for (int c = 0; c < 4; ++c) out.Phi.col(c) = y.segment<4>(4 + 4 * c);
    out.S = y.segment<4>(20);
    return out;
}

struct ShootingEval {
    VecX R;      // 4m matching + phase
    MatX J;      // (4m + 1) x (4m + 2), columns: nodes, T, p; empty without variational flow
    std::vector<SegmentFlow> seg;
};

// Unknowns Z = (X_0..X_{m-1}, T, p).
ShootingEval shooting(const ThrusterModel& model, const ControlGains& tmpl, FreeParam free, const VecX& Z, int m,
                      int winding, const Vec4& anchor, const Vec4& anchor_f, double tol, bool variational) {
    ShootingEval ev;
    const int N = 4 * m;
    const double T = Z[N], p = Z[N + 1];
    const ControlGains g = with_param(tmpl, free, p);
    ev.R = VecX::Zero(N + 1);
    if (variational) ev.J = MatX::Zero(N + 1, N + 2);
    ev.seg.resize(m);
    const double dt = T / m;
    for (int i = 0; i < m; ++i) {
        const Vec4 xi = Z.segment<4>(4 * i);
        ev.seg[i] = flow_segment(model, g, free, xi, dt, tol, variational);
        const SegmentFlow& sf = ev.seg[i];
        const int j = (i + 1) % m;
        Vec4 target = Z.segment<4>(4 * j);
        if (i == m - 1) target[3] += winding * kTwoPi * model.L_pp();
        ev.R.segment<4>(4 * i) = sf.end - target;
        if (!variational) continue;
        ev.J.block<4, 4>(4 * i, 4 * i) = sf.Phi;
        ev.J.block<4, 4>(4 * i, 4 * j) -= Mat4::Identity();
        ev.J.block<4, 1>(4 * i, N) = model.rhs(g, sf.end) / m;
        ev.J.block<4, 1>(4 * i, N + 1) = sf.S;
    }
    ev.R[N] = (Z.segment<4>(0) - anchor).dot(anchor_f);
    if (variational) ev.J.block<1, 4>(N, 0) = anchor_f.transpose();
    return ev;
}

double closure_measure(const VecX& R, const VecX& Z, int m) {
    double c = 0.0;
    for (int i = 0; i < 4 * m; ++i) {
        const int j = (i + 4) % (4 * m);
        c = std::max(c, std::abs(R[i]) / (1.0 + std::abs(Z[j])));
    }
    return c;
}

VecX pack(const PeriodicOrbit& o, double p) {
    const int m = o.segments();
    VecX Z(4 * m + 2);
    for (int i = 0; i < m; ++i) Z.segment<4>(4 * i) = o.nodes[i];
    Z[4 * m] = o.period;
    Z[4 * m + 1] = p;
    return Z;
}

PeriodicOrbit unpack(const VecX& Z, int m, int winding) {
    PeriodicOrbit o;
    o.nodes.resize(m);
    for (int i = 0; i < m; ++i) o.nodes[i] = Z.segment<4>(4 * i);
    o.period = Z[4 * m];
    o.winding = winding;
    return o;
}

// Multipliers from the cyclic pencil A x = mu B x, where the block rows read
// Phi_i x_i = x_{i+1} and Phi_m x_m = mu x_1. QZ on the pencil avoids forming the
// badly scaled monodromy product. The four eigenvalues with the largest |beta / alpha|
// are the finite ones; the remaining 4m - 4 are infinite.
std::vector<std::complex<double>> cyclic_multipliers(const std::vector<SegmentFlow>& seg) {
    const int m = static_cast<int>(seg.size());
    const int n = 4 * m;
    MatX A = MatX::Zero(n, n), B = MatX::Zero(n, n);
    for (int i = 0; i < m; ++i) {
        A.block<4, 4>(4 * i, 4 * i) = seg[i].Phi;
        if (i + 1 < m)
            A.block<4, 4>(4 * i, 4 * (i + 1)) = -Mat4::Identity();
        else
            B.block<4, 4>(4 * i, 0) = Mat4::Identity();
    }
    Eigen::GeneralizedEigenSolver<MatX> ges(A, B, false);
    const auto& al = ges.alphas();
    const auto& be = ges.betas();
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    auto ratio = [&](int i) { return std::abs(be[i]) / (std::abs(al[i]) + 1e-300); };
    std::partial_sort(idx.begin(), idx.begin() + 4, idx.end(), [&](int a, int b) { return ratio(a) > ratio(b); });
    std::vector<std::complex<double>> out;
    for (int k = 0; k < 4; ++k) out.push_back(al[idx[k]] / be[idx[k]]);
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return std::abs(a) > std::abs(b); });
    return out;
}

// Multipliers come from a separate variational pass with tighter tolerance and
// central differences: the monodromy product amplifies local error far more than
// the shooting residual does.
void finish_orbit(const ThrusterModel& model, const ControlGains& g, FreeParam free, double tol, PeriodicOrbit& o,
                  const ShootingEval& ev, const VecX& Z) {
    const int m = o.segments();
    std::vector<SegmentFlow> fine(m);
    for (int i = 0; i < m; ++i)
        fine[i] = flow_segment(model, g, free, o.nodes[i], o.period / m, std::max(0.01 * tol, 1e-12), true, true);
    Mat4 M = Mat4::Identity();
    o.max_state = Vec4::Constant(-1e300);
    o.min_state = Vec4::Constant(1e300);
    double dpsi = 0.0;
    for (int i = 0; i < m; ++i) {
        M = fine[i].Phi * M;
        o.max_state = o.max_state.cwiseMax(ev.seg[i].vmax);
        o.min_state = o.min_state.cwiseMin(ev.seg[i].vmin);
        dpsi += ev.seg[i].end[3] - o.nodes[i][3];
    }
    o.psi_winding = dpsi / (kTwoPi * model.L_pp());
    o.multipliers = M.cwiseAbs().maxCoeff() < 1e8 ? eigenvalues(M) : cyclic_multipliers(fine);
    double gap = 1e300;
    for (const auto& mu : o.multipliers) gap = std::min(gap, std::abs(mu - 1.0));
    o.trivial_multiplier_gap = gap;
    o.closure_residual = closure_measure(ev.R, Z, m);
}

// Resample the orbit on a new number of segments by integrating from the anchor.
PeriodicOrbit remesh(const ThrusterModel& model, const ControlGains& g, const PeriodicOrbit& o, int m, double tol) {
    PeriodicOrbit r = o;
    r.nodes.resize(m);
    r.nodes[0] = o.nodes[0];
    const int old_m = o.segments();
    // Integrate each old segment with dense output and sample the new node times.
    int k = 1;
    for (int i = 0; i < old_m && k < m; ++i) {
        OdeOptions oo;
        oo.tol = tol;
        const OdeRhs f = [&](double, const VecX& y, VecX& dy) { dy = model.rhs(g, Vec4(y.head<4>())); };
        const double dt = o.period / old_m;
        const OdeSolution sol = integrate_ode(f, 0.0, o.nodes[i], dt, oo);
        while (k < m) {
            const double tk = o.period * k / m - i * dt;
            if (tk > dt * (1.0 + 1e-12)) break;
            r.nodes[k] = sol.at(std::min(tk, dt)).head<4>();
            ++k;
        }
    }
    return r;
}

struct NewtonResult {
    bool ok = false;
    int iterations = 0;
    double residual = 0.0;
    ShootingEval ev;  // with variational data at the returned Z
};

// Chord Newton on shooting (+ optional arclength row; fixed p without it). The
// Jacobian in `Jc` is reused across iterations and calls and refreshed when the
// contraction is poor; the converged point always gets a fresh variational flow.
NewtonResult newton_periodic(const ThrusterModel& model, const ControlGains& tmpl, FreeParam free, VecX& Z, int m,
                             int winding, const Vec4& anchor, const Vec4& anchor_f, const VecX* tangent,
                             const VecX* Zpred, const VecX& w, const ContinuationOptions& opt, MatX& Jc) {
    NewtonResult nr;
    const int N = 4 * m;
    bool full = Jc.rows() != N + 1 || Jc.cols() != N + 2;
    bool fresh = false, step_fresh = false;
    double last = 0.0, last_step = 1e300;
    auto eval = [&](bool var, ShootingEval& ev) {
        try {
            ev = shooting(model, tmpl, free, Z, m, winding, anchor, anchor_f, opt.ode_tol, var);
        } catch (const Error&) {
            return false;
        }
        if (var) Jc = ev.J;
        return true;
    };
    const int budget = 3 * opt.max_newton;
    for (int it = 0; it <= budget; ++it) {
        if (!(Z[N] > 0.0)) return nr;
        ShootingEval ev;
        if (!eval(full, ev)) return nr;
        fresh = full;
        full = false;
        const double res = std::max(closure_measure(ev.R, Z, m), std::abs(ev.R[N]));
        const double ar = tangent ? std::abs(wdot(Z - *Zpred, *tangent, w)) : 0.0;
        nr.iterations = it;
        nr.residual = res;
        const bool floor = res < 1e-8 && (it == 0 || last_step < 1e-8);
        if ((res < opt.newton_tol || floor) && ar < 1e-9) {
            if (!fresh && !eval(true, ev)) return nr;
            nr.residual = std::max(closure_measure(ev.R, Z, m), std::abs(ev.R[N]));
            nr.ok = nr.residual < 1e-8;
            nr.ev = std::move(ev);
            return nr;
        }
        if (it > 0 && step_fresh && res > 1e-6 && res > 2.0 * last) return nr;
        if (it > 0 && !fresh && res > 0.3 * last) {
            // Slow contraction: refresh the Jacobian at this point.
            if (!eval(true, ev)) return nr;
            fresh = true;
        }
        if (it == budget) break;
        last = res;
        step_fresh = fresh;
        VecX dZ;
        if (tangent) {
            MatX J(N + 2, N + 2);
            J.topRows(N + 1) = Jc;
            J.row(N + 1) = tangent->cwiseProduct(w).cwiseProduct(w).transpose();
            VecX R(N + 2);
            R.head(N + 1) = ev.R;
            R[N + 1] = wdot(Z - *Zpred, *tangent, w);
            dZ = J.partialPivLu().solve(-R);
        } else {
            dZ = VecX::Zero(N + 2);
            dZ.head(N + 1) = Jc.leftCols(N + 1).partialPivLu().solve(-ev.R);
        }
        if (!dZ.allFinite()) return nr;
        // Damp steps that would change the period by more than half.
        double lam = 1.0;
        if (std::abs(dZ[N]) > 0.5 * Z[N]) lam = 0.5 * Z[N] / std::abs(dZ[N]);
        Z += lam * dZ;
        last_step = wnorm(lam * dZ, w);
    }
    return nr;
}

VecX orbit_weights(const ThrusterModel& model, int m, double T, double param_weight) {
    VecX w(4 * m + 2);
    const double sm = 1.0 / std::sqrt(double(m));
    for (int i = 0; i < m; ++i) {
        w.segment<4>(4 * i) << sm, sm, sm, sm / model.L_pp();
    }
    w[4 * m] = 1.0 / T;
    w[4 * m + 1] = param_weight;
    return w;
}

// The period keeps growing over the last points while the parameter no longer
// moves beyond round-off: dT/dp has diverged.
bool period_diverging(const Branch& br) {
    constexpr std::size_t k = 10;
    if (br.points.size() < k + 1) return false;
    const auto& pts = br.points;
    const std::size_t n = pts.size();
    double pmin = 1e300, pmax = -1e300;
    for (std::size_t i = n - k - 1; i < n; ++i) {
        pmin = std::min(pmin, pts[i].param);
        pmax = std::max(pmax, pts[i].param);
        if (i > n - k - 1 && !(pts[i].orbit().period > pts[i - 1].orbit().period)) return false;
    }
    const double T0 = pts.front().orbit().period;
    return pmax - pmin <= 1e-9 * (1.0 + std::abs(pmax)) && pts.back().orbit().period > 20.0 * T0;
}

int segments_for(double T, const ContinuationOptions& opt) {
    return std::max(opt.segments, static_cast<int>(std::ceil(T / opt.max_segment_time)));
}

}  // namespace

const char* to_string(BranchEvent e) {
    switch (e) {
        case BranchEvent::None: return "None";
        case BranchEvent::Hopf: return "Hopf";
        case BranchEvent::Pitchfork: return "Pitchfork";
        case BranchEvent::Fold: return "Fold";
        case BranchEvent::PeriodBlowup: return "PeriodBlowup";
    }
    return "?";
}

const char* to_string(FreeParam p) { return p == FreeParam::EpsR ? "eps_r" : "eps_psi"; }

double get_param(const ControlGains& g, FreeParam p) { return p == FreeParam::EpsR ? g.eps_r : g.eps_psi; }

ControlGains with_param(ControlGains g, FreeParam p, double value) {
    (p == FreeParam::EpsR ? g.eps_r : g.eps_psi) = value;
    return g;
}

bool PeriodicOrbit::stable() const {
    if (multipliers.empty()) return false;
    std::size_t triv = 0;
    for (std::size_t i = 1; i < multipliers.size(); ++i)
        if (std::abs(multipliers[i] - 1.0) < std::abs(multipliers[triv] - 1.0)) triv = i;
    for (std::size_t i = 0; i < multipliers.size(); ++i)
        if (i != triv && std::abs(multipliers[i]) >= 1.0) return false;
    return true;
}

std::vector<std::complex<double>> equilibrium_spectrum(const ThrusterModel& model, const ControlGains& gains,
                                                       const State4& s, bool reduced) {
    const Mat4 J = rhs_jacobian(model, gains, s.vec());
    if (reduced) return eigenvalues(J.topLeftCorner<3, 3>());
    return eigenvalues(J);
}

State4 correct_equilibrium(const ThrusterModel& model, const ControlGains& gains, const State4& guess, bool reduced,
                           const ContinuationOptions& opt) {
    EqProblem pr{model, gains, FreeParam::EpsR, reduced, guess.psi, reduced ? 3 : 4};
    VecX Z(pr.n + 1);
    Z.head(pr.n) = guess.vec().head(pr.n);
    Z[pr.n] = gains.eps_r;
    double res = 0.0;
    if (!newton_eq(pr, Z, nullptr, nullptr, VecX::Ones(pr.n + 1), opt, res))
        throw Error(ErrorKind::NoEquilibrium, "equilibrium corrector did not converge");
    return State4::from(pr.full(Z.head(pr.n)));
}

Branch continue_equilibria(const ThrusterModel& model, const ControlGains& gains, FreeParam free, const State4& start,
                           double direction, const ContinuationOptions& opt) {
    const bool reduced = gains.eps_psi == 0.0 && free == FreeParam::EpsR;
    EqProblem pr{model, gains, free, reduced, start.psi, reduced ? 3 : 4};
    const int n = pr.n;
    VecX Z(n + 1);
    Z.head(n) = start.vec().head(n);
    Z[n] = get_param(gains, free);
    const MatX J = pr.jac(Z.head(n), Z[n]);
    VecX t(n + 1);
    t.head(n) = J.leftCols(n).fullPivLu().solve(-J.col(n));
    t[n] = 1.0;
    if (!t.allFinite()) t = VecX::Unit(n + 1, n);
    t *= direction >= 0.0 ? 1.0 : -1.0;
    Branch br;
    br.free = free;
    return run_eq_branch(pr, Z, t, opt, br);
}

Branch switch_pitchfork(const ThrusterModel& model, const Branch& trivial, std::size_t index, double sign,
                        const ContinuationOptions& opt) {
    if (index == 0 || index >= trivial.points.size())
        throw Error(ErrorKind::InvalidParameter, "branch switching needs an interior event point");
    const BranchPoint& a = trivial.points[index - 1];
    const BranchPoint& b = trivial.points[index];
    const bool reduced = a.gains.eps_psi == 0.0 && trivial.free == FreeParam::EpsR;
    EqProblem pr{model, a.gains, trivial.free, reduced, a.state().psi, reduced ? 3 : 4};
    const int n = pr.n;

    // Locate the crossing by bisection on the sign of the Jacobian determinant.
    auto detp = [&](double p, VecX& x) {
        VecX Z(n + 1);
        Z.head(n) = x;
        Z[n] = p;
        double res = 0.0;
        VecX w = VecX::Ones(n + 1);
        newton_eq(pr, Z, nullptr, nullptr, w, opt, res);
        x = Z.head(n);
        return pr.jac(x, p).leftCols(n).determinant();
    };
    VecX xa = a.state().vec().head(n), xb = b.state().vec().head(n);
    double pa = a.param, pb = b.param;
    double da = detp(pa, xa);
    for (int it = 0; it < 60; ++it) {
        const double pm = 0.5 * (pa + pb);
        VecX xm = 0.5 * (xa + xb);
        const double dm = detp(pm, xm);
        if ((dm > 0) == (da > 0)) {
            pa = pm;
            xa = xm;
            da = dm;
        } else {
            pb = pm;
            xb = xm;
        }
    }
    const double pstar = 0.5 * (pa + pb);
    const VecX xstar = 0.5 * (xa + xb);

    Eigen::JacobiSVD<MatX> svd(pr.jac(xstar, pstar).leftCols(n), Eigen::ComputeFullV);
    VecX k = svd.matrixV().col(n - 1);
    if (k[1] < 0.0) k = -k;
    k *= sign >= 0.0 ? 1.0 : -1.0;

    // Correct on the hyperplane <x - x*, k> = 1e-4, with the parameter free.
    VecX Z(n + 1);
    Z.head(n) = xstar + 1e-4 * k;
    Z[n] = pstar;
    VecX kt = VecX::Zero(n + 1);
    kt.head(n) = k;
    VecX Zref(n + 1);
    Zref.head(n) = xstar + 1e-4 * k;
    Zref[n] = pstar;
    VecX ones = VecX::Ones(n + 1);
    double res = 0.0;
    if (!newton_eq(pr, Z, &kt, &Zref, ones, opt, res))
        throw Error(ErrorKind::DegeneratePitchfork, "degenerate pitchfork: branch switching failed");

    Branch br;
    br.free = trivial.free;
    BranchPoint origin = make_eq_point(pr, [&] {
        VecX z(n + 1);
        z.head(n) = xstar;
        z[n] = pstar;
        return z;
    }(), 0.0);
    origin.event = BranchEvent::Pitchfork;
    br.points.push_back(origin);
    br.points.push_back(make_eq_point(pr, Z, res));
    VecX Zs(n + 1);
    Zs.head(n) = xstar;
    Zs[n] = pstar;
    VecX t = Z - Zs;
    return run_eq_branch(pr, Z, t, opt, br);
}

PeriodicOrbit correct_periodic(const ThrusterModel& model, const ControlGains& gains, PeriodicOrbit guess,
                               const ContinuationOptions& opt) {
    const int m = guess.segments();
    VecX Z = pack(guess, gains.eps_psi);
    const Vec4 anchor = guess.nodes[0];
    const Vec4 af = model.rhs(gains, anchor);
    const VecX w = orbit_weights(model, m, guess.period, opt.param_weight);
    ContinuationOptions o2 = opt;
    o2.max_newton = std::max(opt.max_newton, 20);
    MatX Jc;
    NewtonResult nr = newton_periodic(model, gains, FreeParam::EpsPsi, Z, m, guess.winding, anchor, af, nullptr,
                                      nullptr, w, o2, Jc);
    if (!nr.ok) throw Error(ErrorKind::InvalidState, "periodic orbit corrector did not converge");
    PeriodicOrbit o = unpack(Z, m, guess.winding);
    finish_orbit(model, gains, FreeParam::EpsPsi, opt.ode_tol, o, nr.ev, Z);
    return o;
}

PeriodicOrbit hopf_guess(const ThrusterModel& model, const HopfFrame& frame, const SigmaResult& sig,
                         const ControlGains& gains, double u0, int segments) {
    const auto lin = linearize(model, gains, u0);
    double mu = 0.0, om = frame.omega;
    for (const auto& l : lin.eigenvalues)
        if (l.imag() > 0.0) mu = l.real(), om = l.imag();
    const double rho = std::abs(-kTwoPi * mu / sig.sigma);
    PeriodicOrbit o;
    o.period = kTwoPi / om;
    o.winding = 0;
    o.nodes.resize(segments);
    for (int i = 0; i < segments; ++i) {
        const double th = kTwoPi * i / segments;
        const Eigen::Vector3d vrp = rho * (std::cos(th) * frame.a() + std::sin(th) * frame.b());
        o.nodes[i] = Vec4(u0, vrp[0], vrp[1], vrp[2]);
    }
    return o;
}

PeriodicOrbit winding_guess(const ThrusterModel& model, const State4& eq, int segments) {
    if (eq.r == 0.0) throw Error(ErrorKind::InvalidState, "invalid state: winding orbit needs r != 0");
    PeriodicOrbit o;
    const double L = model.L_pp();
    o.period = kTwoPi * L / std::abs(eq.r);
    o.winding = eq.r > 0.0 ? 1 : -1;
    o.nodes.resize(segments);
    for (int i = 0; i < segments; ++i) o.nodes[i] = Vec4(eq.u, eq.v, eq.r, eq.psi + eq.r * o.period * i / segments);
    return o;
}

Branch continue_periodic(const ThrusterModel& model, const ControlGains& gains, FreeParam free,
                         const PeriodicOrbit& seed, double direction, const ContinuationOptions& opt) {
    Branch br;
    br.free = free;
    const int winding = seed.winding;
    PeriodicOrbit cur = seed;
    double p = get_param(gains, free);
    int m = cur.segments();

    auto make_point = [&](const PeriodicOrbit& o, double param) {
        BranchPoint bp;
        bp.param = param;
        bp.gains = with_param(gains, free, param);
        bp.solution = o;
        bp.spectrum = o.multipliers;
        bp.stable = o.stable();
        bp.winding = o.winding;
        bp.residual = o.closure_residual;
        return bp;
    };
    br.points.push_back(make_point(cur, p));

    VecX Z = pack(cur, p);
    VecX w = orbit_weights(model, m, cur.period, opt.param_weight);
    // Initial tangent: kernel of the shooting Jacobian, oriented by `direction`.
    VecX t = VecX::Zero(Z.size());
    MatX Jc, Jgood;
    {
        const Vec4 af = model.rhs(gains, cur.nodes[0]);
        const ShootingEval ev =
            shooting(model, gains, free, Z, m, winding, cur.nodes[0], af, opt.ode_tol, true);
        Jgood = ev.J;
        Eigen::JacobiSVD<MatX> svd(ev.J.transpose() * ev.J, Eigen::ComputeFullV);
        t = svd.matrixV().col(Z.size() - 1);
        if (t[4 * m + 1] * direction < 0.0) t = -t;
    }
    t /= wnorm(t, w);
    double ds = opt.ds;
    PeriodicOrbit prev = cur;
    double p_prev = p;
    bool have_prev = false;

    while (static_cast<int>(br.points.size()) < opt.max_points) {
        const VecX Zpred = Z + ds * t;
        VecX Zn = Zpred;
        const Vec4 anchor = cur.nodes[0];
        const Vec4 af = model.rhs(with_param(gains, free, p), anchor);
        Jc = Jgood;
        NewtonResult nr = newton_periodic(model, gains, free, Zn, m, winding, anchor, af, &t, &Zpred, w, opt, Jc);
        const double Tn = Zn[4 * m];
        const bool jump = nr.ok && std::abs(Tn - Z[4 * m]) > opt.period_change_cap * Z[4 * m];
        if (!nr.ok || jump) {
            ds *= 0.5;
            if (ds < opt.ds_min) {
                if (period_diverging(br)) {
                    br.points.back().event = BranchEvent::PeriodBlowup;
                    br.termination = "period blow-up at a parameter frozen to round-off (heteroclinic candidate)";
                } else {
                    br.termination = "corrector diverged at minimum step";
                }
                return br;
            }
            continue;
        }
        PeriodicOrbit o = unpack(Zn, m, winding);
        finish_orbit(model, with_param(gains, free, Zn[4 * m + 1]), free, opt.ode_tol, o, nr.ev, Zn);
        Jgood = nr.ev.J;
        const double pn = Zn[4 * m + 1];
        BranchPoint bp = make_point(o, pn);
        bp.ds = ds;
        const bool blow = o.period > opt.T_max;
        if (blow) bp.event = BranchEvent::PeriodBlowup;
        br.points.push_back(bp);
        if (blow) {
            br.termination = "period blow-up (heteroclinic candidate)";
            return br;
        }
        if (pn < opt.p_min || pn > opt.p_max) {
            br.termination = "parameter range left";
            return br;
        }

        // Secant tangent, with the mesh adapted to the new period.
        prev = cur;
        p_prev = p;
        have_prev = true;
        cur = o;
        p = pn;
        const int m_new = segments_for(o.period, opt);
        if (m_new != m) {
            cur = remesh(model, with_param(gains, free, p), cur, m_new, opt.ode_tol);
            cur.multipliers = o.multipliers;
            prev = remesh(model, with_param(gains, free, p_prev), prev, m_new, opt.ode_tol);
            m = m_new;
            Jgood.resize(0, 0);
        }
        Z = pack(cur, p);
        w = orbit_weights(model, m, cur.period, opt.param_weight);
        if (have_prev) {
            t = Z - pack(prev, p_prev);
            t /= wnorm(t, w);
        }
        if (nr.iterations <= 4)
            ds = std::min(opt.ds_max, ds * 1.5);
        else if (nr.iterations >= 10)
            ds *= 0.7;
    }
    br.termination = "maximum number of points";
    return br;
}

Branch continue_hopf_branch(const ThrusterModel& model, double u0, double eps_r, double offset,
                            const ContinuationOptions& opt, ControlLaw law) {
    const double epH = boundary_eps_psi(model, u0, eps_r);
    const ControlGains gH{eps_r, epH, ControlLaw::Linear};
    const HopfFrame frame = hopf_frame(model, gH, u0);
    const SigmaResult sig = sigma(frame, model.expand_at_equilibrium(gH, u0));
    // Unstable side: the eps_psi direction in which mu becomes positive.
    const double h = 1e-6 * std::max(1.0, epH);
    const double dmu = hopf_frame(model, {eps_r, epH + h, ControlLaw::Linear}, u0).mu -
                       hopf_frame(model, {eps_r, epH - h, ControlLaw::Linear}, u0).mu;
    const double side = dmu > 0.0 ? 1.0 : -1.0;
    const ControlGains g{eps_r, epH + side * offset, law};
    const PeriodicOrbit guess = hopf_guess(model, frame, sig, {eps_r, epH + side * offset, ControlLaw::Linear}, u0,
                                           opt.segments);
    const PeriodicOrbit seed = correct_periodic(model, g, guess, opt);
    Branch br = continue_periodic(model, g, FreeParam::EpsPsi, seed, side, opt);
    return br;
}

std::vector<std::pair<double, Vec4>> orbit_profile(const ThrusterModel& model, const ControlGains& gains,
                                                   const PeriodicOrbit& orbit, int n, double tol) {
    OdeOptions oo;
    oo.tol = tol;
    const OdeRhs f = [&](double, const VecX& y, VecX& dy) { dy = model.rhs(gains, Vec4(y.head<4>())); };
    const OdeSolution sol = integrate_ode(f, 0.0, orbit.nodes[0], orbit.period, oo);
    std::vector<std::pair<double, Vec4>> out;
    for (int k = 0; k <= n; ++k) {
        const double s = double(k) / n;
        out.emplace_back(s, Vec4(sol.at(s * orbit.period).head<4>()));
    }
    return out;
}

std::vector<LocusPoint> track_hopf_locus(const ThrusterModel& model, double u0, double eps_r_max, double ds,
                                         double eps_r_start) {
    // F(er, ep) = c2 c1 - c0 from the linearisation, relative to its gradient scale.
    auto F = [&](double er, double ep) {
        const auto lin = linearize(model, {er, ep, ControlLaw::Linear}, u0);
        return lin.c2 * lin.c1 - lin.c0;
    };
    auto grad = [&](double er, double ep) {
        const double h1 = 1e-6 * (1.0 + std::abs(er)), h2 = 1e-6 * (1.0 + std::abs(ep));
        return Eigen::Vector2d((F(er + h1, ep) - F(er - h1, ep)) / (2 * h1), (F(er, ep + h2) - F(er, ep - h2)) / (2 * h2));
    };
    auto point = [&](double er, double ep) {
        const auto lin = linearize(model, {er, ep, ControlLaw::Linear}, u0);
        LocusPoint lp{er, ep, lin.c0, lin.c2, false};
        lp.hopf = lin.c0 > 0.0 && lin.c2 > 0.0 && ep > 0.0;
        return lp;
    };
    // Newton onto the curve along the gradient.
    auto correct = [&](Eigen::Vector2d x, const Eigen::Vector2d& t, const Eigen::Vector2d& xp) {
        for (int it = 0; it < 30; ++it) {
            const Eigen::Vector2d g = grad(x[0], x[1]);
            Eigen::Matrix2d J;
            J.row(0) = g.transpose();
            J.row(1) = t.transpose();
            const Eigen::Vector2d R(F(x[0], x[1]), t.dot(x - xp));
            const Eigen::Vector2d dx = J.fullPivLu().solve(-R);
            x += dx;
            if (dx.norm() < 1e-12 * (1.0 + x.norm())) break;
        }
        return x;
    };

    std::vector<LocusPoint> out;
    // Start on the line eps_r = eps_r_start.
    Eigen::Vector2d x(eps_r_start, 1.0);
    x = correct(x, Eigen::Vector2d(1.0, 0.0), x);
    out.push_back(point(x[0], x[1]));
    Eigen::Vector2d g = grad(x[0], x[1]);
    Eigen::Vector2d t(-g[1], g[0]);
    t.normalize();
    if (t[0] < 0.0) t = -t;
    for (int k = 0; k < 100000; ++k) {
        const Eigen::Vector2d xp = x + ds * t;
        Eigen::Vector2d xn = correct(xp, t, xp);
        if (xn[1] < 0.0) {
            // Land exactly on eps_psi = 0.
            double lo = x[0], hi = xn[0];
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = grad(mid, 0.0)[1];
                const double ep = gm != 0.0 ? -F(mid, 0.0) / gm : 0.0;
                (ep > 0.0 ? lo : hi) = mid;
            }
            out.push_back(point(0.5 * (lo + hi), 0.0));
            break;
        }
        const Eigen::Vector2d tn = (xn - x).normalized();
        x = xn;
        t = tn;
        out.push_back(point(x[0], x[1]));
        if (x[0] > eps_r_max) break;
    }
    return out;
}

}  // namespace shipctl
