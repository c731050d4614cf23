#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hostcap/barrier.hpp"
#include "hostcap/capability.hpp"
#include "hostcap/common.hpp"
#include "hostcap/distflow.hpp"
#include "hostcap/feeder.hpp"
#include "hostcap/sensitivity.hpp"

namespace hostcap {

enum class RegionModel { InnerApprox, LinDist };
enum class Direction { Upper, Lower };

inline const char* to_string(RegionModel m) {
    return m == RegionModel::InnerApprox ? "inner" : "lindist";
}

/// One direction of the operating-region computation: the maximizing
/// injections, the reactive evidence, and the solver's voltage variable
/// (v0*1 + M_p p + M_q q - H l_bound).
struct DirectionSolve {
    Direction direction = Direction::Upper;
    Vec p, q, V;
    SolveStatus status = SolveStatus::MaxIter;
    double duality_gap = 0.0;
    double kkt_residual = 0.0;
};

/// Feasible operating interval [p_minus, p_plus] per node with the solver
/// evidence that produced it.
struct OperatingRegion {
    Vec p_plus, p_minus, delta_p;
    Vec q_plus, q_minus;
    Vec V_plus, V_minus;
    Vec flex_plus, flex_minus;  // resource bounds after forecast offsets
    RegionModel model = RegionModel::InnerApprox;
    SolveStatus status = SolveStatus::MaxIter;
};

namespace detail {

/// Variable layout for one direction program. A dispatchable node always
/// carries a p variable unless its envelope has no headroom in the objective
/// direction, in which case p is pinned to the bound and left out of the
/// objective. Box and quadratic nodes carry a q variable; constant-pf q is
/// eliminated through q = gamma p.
struct DirectionProgram {
    BarrierProgram prog{0};
    std::vector<int> p_var;   // per node, -1 if constant
    std::vector<int> q_var;   // per node, -1 if constant or eliminated
    Vec p_const, q_const;     // values used where no variable exists
    Vec shift;                // H * l_bound
    Vec v_const;              // voltage at z = 0
    std::vector<std::string> row_desc;
    Vec start;
};

inline DirectionProgram build_direction_program(const FeederNetwork& net,
                                                const SensitivityMatrices& m,
                                                const CapabilitySpec& cap, const Vec& shift,
                                                Direction dir) {
    if (!m.complete) throw Error("sensitivity matrices are incomplete");
    if (cap.size() != net.n) throw DimensionError("capability spec does not match the network");
    if (shift.size() != net.n) throw DimensionError("shift vector does not match the network");

    const double sigma = dir == Direction::Upper ? 1.0 : -1.0;
    const int n = net.n;

    DirectionProgram dp;
    dp.p_var.assign(static_cast<size_t>(n), -1);
    dp.q_var.assign(static_cast<size_t>(n), -1);
    dp.p_const = Vec::Zero(n);
    dp.q_const = Vec::Zero(n);
    dp.shift = shift;

    int nv = 0;
    std::vector<double> start;
    for (int i = 0; i < n; ++i) {
        const auto& c = cap.at(i);
        if (!c.dispatchable) {
            dp.p_const(i) = c.fixed_injection();
            continue;
        }
        const bool pinned = dir == Direction::Upper ? c.p_max <= 0.0 : c.p_min >= 0.0;
        if (pinned) {
            dp.p_const(i) = dir == Direction::Upper ? c.p_max : c.p_min;
        } else {
            dp.p_var[static_cast<size_t>(i)] = nv++;
            const double bound = dir == Direction::Upper ? c.p_max : c.p_min;
            start.push_back(sigma * std::min(1e-3, 0.5 * std::abs(bound)));
        }
        switch (c.kind) {
            case CapabilityCase::ConstantPF:
                if (pinned) dp.q_const(i) = c.gamma * dp.p_const(i);
                break;
            case CapabilityCase::Box:
                dp.q_var[static_cast<size_t>(i)] = nv++;
                start.push_back(0.5 * (c.q_min + c.q_max));
                break;
            case CapabilityCase::Quadratic:
                dp.q_var[static_cast<size_t>(i)] = nv++;
                start.push_back(0.0);
                break;
        }
    }

    dp.prog = BarrierProgram(nv);
    dp.start = Vec::Zero(nv);
    for (int k = 0; k < nv; ++k) dp.start(k) = start[static_cast<size_t>(k)];

    // voltage expression: v_const + W z with one column per variable
    dp.v_const = Vec::Constant(n, net.v0) + m.M_p * dp.p_const + m.M_q * dp.q_const - shift;
    Mat W = Mat::Zero(n, nv);
    for (int i = 0; i < n; ++i) {
        const auto& c = cap.at(i);
        if (dp.p_var[static_cast<size_t>(i)] >= 0) {
            Vec col = m.M_p.col(i);
            if (c.kind == CapabilityCase::ConstantPF) col += c.gamma * m.M_q.col(i);
            W.col(dp.p_var[static_cast<size_t>(i)]) = col;
        }
        if (dp.q_var[static_cast<size_t>(i)] >= 0)
            W.col(dp.q_var[static_cast<size_t>(i)]) = m.M_q.col(i);
    }
    for (int j = 0; j < n; ++j) {
        dp.prog.add_row(W.row(j).transpose(), net.v_max(j) - dp.v_const(j));
        dp.row_desc.push_back("upper voltage bound at node " + net.label(j + 1));
    }
    for (int j = 0; j < n; ++j) {
        dp.prog.add_row(-W.row(j).transpose(), dp.v_const(j) - net.v_min(j));
        dp.row_desc.push_back("lower voltage bound at node " + net.label(j + 1));
    }

    for (int i = 0; i < n; ++i) {
        const auto& c = cap.at(i);
        const int pv = dp.p_var[static_cast<size_t>(i)];
        const int qv = dp.q_var[static_cast<size_t>(i)];
        if (pv >= 0) {
            if (dir == Direction::Upper) {
                dp.prog.add_bound(pv, 1.0, c.p_max);
                dp.row_desc.push_back("p upper bound at node " + net.label(i + 1));
            } else {
                dp.prog.add_bound(pv, -1.0, -c.p_min);
                dp.row_desc.push_back("p lower bound at node " + net.label(i + 1));
            }
            dp.prog.add_log_term(pv, sigma);
        }
        if (qv >= 0 && c.kind == CapabilityCase::Box) {
            dp.prog.add_bound(qv, 1.0, c.q_max);
            dp.row_desc.push_back("q upper bound at node " + net.label(i + 1));
            dp.prog.add_bound(qv, -1.0, -c.q_min);
            dp.row_desc.push_back("q lower bound at node " + net.label(i + 1));
        }
        if (qv >= 0 && c.kind == CapabilityCase::Quadratic) {
            if (pv >= 0) {
                dp.prog.add_disk(pv, qv, c.s_max);  // described after the affine rows
            } else {
                const double head = c.s_max - dp.p_const(i) * dp.p_const(i);
                if (head < 0.0)
                    throw InfeasibleProgramError("pinned injection exceeds the apparent power "
                                                 "limit at node " + net.label(i + 1), i + 1);
                dp.prog.add_bound(qv, 1.0, std::sqrt(head));
                dp.row_desc.push_back("apparent power limit at node " + net.label(i + 1));
                dp.prog.add_bound(qv, -1.0, std::sqrt(head));
                dp.row_desc.push_back("apparent power limit at node " + net.label(i + 1));
            }
        }
    }
    // disks and objective-domain terms come after the affine rows in the
    // constraint ordering; name them for infeasibility reports
    for (int i = 0; i < n; ++i)
        if (dp.q_var[static_cast<size_t>(i)] >= 0 && cap.at(i).kind == CapabilityCase::Quadratic &&
            dp.p_var[static_cast<size_t>(i)] >= 0)
            dp.row_desc.push_back("apparent power limit at node " + net.label(i + 1));
    for (int i = 0; i < n; ++i)
        if (dp.p_var[static_cast<size_t>(i)] >= 0)
            dp.row_desc.push_back(std::string(dir == Direction::Upper ? "positive" : "negative") +
                                  " injection domain at node " + net.label(i + 1));
    return dp;
}

inline DirectionSolve solve_direction(const FeederNetwork& net, const SensitivityMatrices& m,
                                      const CapabilitySpec& cap, const Vec& shift, Direction dir,
                                      const BarrierProgram::Options& opt = BarrierProgram::Options{}) {
    DirectionProgram dp = build_direction_program(net, m, cap, shift, dir);
    const BarrierProgram::Result r = dp.prog.solve(dp.start, opt);
    if (r.status == SolveStatus::Infeasible) {
        const std::string what =
            r.worst_row >= 0 && r.worst_row < static_cast<int>(dp.row_desc.size())
                ? dp.row_desc[static_cast<size_t>(r.worst_row)]
                : "unknown constraint";
        // the first 2n rows are the voltage box; recover the node for them
        int binding_node = -1;
        if (r.worst_row >= 0 && r.worst_row < 2 * net.n)
            binding_node = r.worst_row % net.n + 1;
        throw InfeasibleProgramError("operating-region program is infeasible (" +
                                         std::string(dir == Direction::Upper ? "upper" : "lower") +
                                         " direction); binding: " + what,
                                     binding_node);
    }

    DirectionSolve out;
    out.direction = dir;
    out.status = r.status;
    out.duality_gap = r.gap;
    out.kkt_residual = r.kkt_residual;
    out.p = dp.p_const;
    out.q = dp.q_const;
    for (int i = 0; i < net.n; ++i) {
        const int pv = dp.p_var[static_cast<size_t>(i)];
        const int qv = dp.q_var[static_cast<size_t>(i)];
        if (pv >= 0) out.p(i) = r.z(pv);
        if (qv >= 0) out.q(i) = r.z(qv);
        if (pv >= 0 && cap.at(i).kind == CapabilityCase::ConstantPF)
            out.q(i) = cap.at(i).gamma * out.p(i);
    }
    out.V = Vec::Constant(net.n, net.v0) + m.M_p * out.p + m.M_q * out.q - shift;
    return out;
}

}  // namespace detail

/// Upper direction of the inner approximation: maximize sum log(p_i) under
/// the voltage box shifted by H l_min. With l_min = 0 this coincides with
/// the linearized upper problem.
inline DirectionSolve solve_p3(const FeederNetwork& net, const SensitivityMatrices& m,
                               const CapabilitySpec& cap, const CurrentBounds& bounds,
                               const BarrierProgram::Options& opt = BarrierProgram::Options{}) {
    return detail::solve_direction(net, m, cap, m.H * bounds.l_min, Direction::Upper, opt);
}

/// Lower direction of the inner approximation: maximize sum log(-p_i) with
/// the voltage box shifted by H l_max, which tightens the lower-voltage side
/// and makes the region conservative relative to the linearized model.
inline DirectionSolve solve_p4(const FeederNetwork& net, const SensitivityMatrices& m,
                               const CapabilitySpec& cap, const CurrentBounds& bounds,
                               const BarrierProgram::Options& opt = BarrierProgram::Options{}) {
    return detail::solve_direction(net, m, cap, m.H * bounds.l_max, Direction::Lower, opt);
}

/// Linearized baseline with no current term at all.
inline DirectionSolve solve_p5(const FeederNetwork& net, const SensitivityMatrices& m,
                               const CapabilitySpec& cap, Direction dir,
                               const BarrierProgram::Options& opt = BarrierProgram::Options{}) {
    return detail::solve_direction(net, m, cap, Vec::Zero(net.n), dir, opt);
}

/// Combines the two direction solves into the per-node operating region and
/// applies the forecast offsets to express the flexible-resource bounds.
inline OperatingRegion assemble_region(const DirectionSolve& upper, const DirectionSolve& lower,
                                       const CapabilitySpec& cap, RegionModel model) {
    if (upper.direction != Direction::Upper || lower.direction != Direction::Lower)
        throw StatusMismatchError("assemble_region needs one upper and one lower solve");
    if (upper.status != SolveStatus::Optimal || lower.status != SolveStatus::Optimal)
        throw StatusMismatchError(std::string("cannot assemble region from non-optimal solves "
                                              "(upper ") + to_string(upper.status) + ", lower " +
                                  to_string(lower.status) + ")");
    OperatingRegion region;
    region.model = model;
    region.status = SolveStatus::Optimal;
    region.p_plus = upper.p;
    region.p_minus = lower.p;
    region.q_plus = upper.q;
    region.q_minus = lower.q;
    region.V_plus = upper.V;
    region.V_minus = lower.V;
    region.delta_p = upper.p - lower.p;
    const int n = static_cast<int>(upper.p.size());
    region.flex_plus = region.p_plus;
    region.flex_minus = region.p_minus;
    for (int i = 0; i < n && i < cap.size(); ++i) {
        const double offset = cap.at(i).fixed_injection();  // solar - demand
        region.flex_plus(i) = region.p_plus(i) - offset;
        region.flex_minus(i) = region.p_minus(i) - offset;
    }
    return region;
}

}  // namespace hostcap
