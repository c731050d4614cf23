#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hostcap/capability.hpp"
#include "hostcap/common.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/sensitivity.hpp"

namespace hostcap {

/// Net nodal injections in pu, generation positive. Demand and solar
/// forecasts are folded into p before any solver call.
struct InjectionProfile {
    Vec p;
    Vec q;
};

/// One nonlinear branch-flow solution in squared variables.
struct PowerFlowSolution {
    Vec V;  // squared node voltages, pu
    Vec P;  // branch real flows at the downstream end, pu
    Vec Q;  // branch reactive flows, pu
    Vec l;  // squared branch currents, pu
    bool converged = false;
    int iterations = 0;
    double max_residual = 0.0;
};

struct DistflowOptions {
    double tol = 1e-10;   // infinity-norm change in l between iterates
    int max_iterations = 200;
    double damping = 1.0;
};

/// Worst-case squared-current envelope over a capability region.
struct CurrentBounds {
    Vec l_min;
    Vec l_max;
    bool corner_diverged = false;      // some probe hit the unsolvable region
    std::vector<int> diverged_corners; // indices into the probe list
};

namespace detail {

inline void check_dimensions(const FeederNetwork& net, const InjectionProfile& inj) {
    if (inj.p.size() != net.n || inj.q.size() != net.n)
        throw DimensionError("injection vectors must have " + std::to_string(net.n) +
                             " entries, got p=" + std::to_string(inj.p.size()) +
                             " q=" + std::to_string(inj.q.size()));
}

}  // namespace detail

/// Linearized voltages: V = v0*1 + M_p p + M_q q (loss term dropped).
inline Vec solve_lindist_voltages(const SensitivityMatrices& m, const InjectionProfile& inj,
                                  double v0) {
    if (!m.complete) throw Error("sensitivity matrices are incomplete");
    if (inj.p.size() != m.n || inj.q.size() != m.n)
        throw DimensionError("injection vectors must have " + std::to_string(m.n) + " entries");
    return Vec::Constant(m.n, v0) + m.M_p * inj.p + m.M_q * inj.q;
}

/// Residuals of the four branch-flow equations at a candidate solution,
/// evaluated by direct tree recursion (independent of the matrix path).
/// Returns the elementwise maximum absolute residual.
inline double distflow_residual(const FeederNetwork& net, const InjectionProfile& inj,
                                const PowerFlowSolution& sol) {
    const auto kids = children_of(net);
    double worst = 0.0;
    for (int j = 1; j <= net.n; ++j) {
        const int b = j - 1;
        const int pi = net.parent[static_cast<size_t>(j)];
        const double v_up = pi == 0 ? net.v0 : sol.V(pi - 1);
        const double r = net.branch_r(b), x = net.branch_x(b);
        const double z2 = r * r + x * x;
        // voltage drop along branch b
        worst = std::max(worst, std::abs(sol.V(b) - v_up - 2.0 * r * sol.P(b) -
                                         2.0 * x * sol.Q(b) + z2 * sol.l(b)));
        // current definition
        worst = std::max(worst, std::abs(sol.l(b) * sol.V(b) -
                                         (sol.P(b) * sol.P(b) + sol.Q(b) * sol.Q(b))));
        // flow balance at node j
        double sum_p = inj.p(b), sum_q = inj.q(b);
        for (int child : kids[static_cast<size_t>(j)]) {
            const int cb = child - 1;
            sum_p += sol.P(cb) - net.branch_r(cb) * sol.l(cb);
            sum_q += sol.Q(cb) - net.branch_x(cb) * sol.l(cb);
        }
        worst = std::max(worst, std::abs(sol.P(b) - sum_p));
        worst = std::max(worst, std::abs(sol.Q(b) - sum_q));
    }
    return worst;
}

/// Fixed-point solve of the nonlinear branch-flow equations: iterate
/// l -> (P(l)^2 + Q(l)^2) / V(l) with P = Cp - D_r l, Q = Cq - D_x l and
/// V = v0*1 + M_p p + M_q q - H l until the change in l is below tolerance.
/// A voltage driven to zero or the iteration cap signals an operating point
/// past the solvable (nose-point) region; the solution is returned with
/// converged = false. Reentrant and stateless between calls.
inline PowerFlowSolution solve_distflow(const FeederNetwork& net, const SensitivityMatrices& m,
                                        const InjectionProfile& inj,
                                        const DistflowOptions& opt = {}) {
    if (!m.complete) throw Error("sensitivity matrices are incomplete");
    detail::check_dimensions(net, inj);

    const Vec Cp = m.C * inj.p;
    const Vec Cq = m.C * inj.q;
    const Vec V_lin = Vec::Constant(net.n, net.v0) + m.M_p * inj.p + m.M_q * inj.q;

    PowerFlowSolution sol;
    sol.l = Vec::Zero(net.n);
    Vec l_next(net.n);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        sol.P = Cp - m.D_r * sol.l;
        sol.Q = Cq - m.D_x * sol.l;
        sol.V = V_lin - m.H * sol.l;
        sol.iterations = it;
        if ((sol.V.array() <= 0.0).any()) {
            sol.converged = false;
            sol.max_residual = std::numeric_limits<double>::infinity();
            return sol;
        }
        l_next = ((sol.P.array().square() + sol.Q.array().square()) / sol.V.array()).matrix();
        const double change = (l_next - sol.l).lpNorm<Eigen::Infinity>();
        sol.l += opt.damping * (l_next - sol.l);
        if (change < opt.tol) {
            sol.P = Cp - m.D_r * sol.l;
            sol.Q = Cq - m.D_x * sol.l;
            sol.V = V_lin - m.H * sol.l;
            sol.max_residual = distflow_residual(net, inj, sol);
            // a converged flag asserts the four branch-flow residuals
            sol.converged = sol.max_residual <= 1e-8 && (sol.V.array() > 0.0).all();
            return sol;
        }
    }
    sol.converged = false;
    sol.max_residual = distflow_residual(net, inj, sol);
    return sol;
}

/// Worst-case squared currents over the capability envelope. l_min is zero
/// (the stated simplification); l_max is the elementwise maximum of l over
/// power flows at the envelope's extreme points. A diverged probe falls back
/// to the network's branch current ceiling for every branch and flags the
/// result.
inline CurrentBounds compute_current_bounds(const FeederNetwork& net,
                                            const SensitivityMatrices& m,
                                            const CapabilitySpec& capability,
                                            const DistflowOptions& opt = {}) {
    if (capability.size() != net.n)
        throw DimensionError("capability spec does not match the network");
    CurrentBounds out;
    out.l_min = Vec::Zero(net.n);
    out.l_max = Vec::Zero(net.n);

    const auto corners = capability_corners(capability);
    int idx = 0;
    for (const auto& [p, q] : corners) {
        const PowerFlowSolution sol = solve_distflow(net, m, {p, q}, opt);
        if (!sol.converged) {
            out.corner_diverged = true;
            out.diverged_corners.push_back(idx);
            out.l_max = out.l_max.cwiseMax(net.l_max);
        } else {
            out.l_max = out.l_max.cwiseMax(sol.l);
        }
        ++idx;
    }
    return out;
}

}  // namespace hostcap
