#pragma once

#include "hostcap/common.hpp"
#include "hostcap/feeder.hpp"

namespace hostcap {

/// Constant matrices of the linearized branch-flow model. With nodes in
/// breadth-first order, A is strictly upper triangular, I - A is unit upper
/// triangular (determinant exactly 1) and C = (I - A)^{-1} is the 0/1
/// root-to-node path indicator. All are immutable once built and safe to
/// share across threads.
struct SensitivityMatrices {
    int n = 0;
    Mat B;            // (n+1) x n node-branch incidence over {0,1}
    Mat A;            // n x n, A(i,j) = 1 iff node i+1 is the parent of node j+1
    Mat C;            // (I - A)^{-1}, path indicator
    Mat D_r, D_x;     // C A R and C A X, loss redistribution terms
    Mat M_p, M_q;     // 2 C' R C and 2 C' X C, voltage sensitivities (SPD)
    Mat H;            // C' (2 (R D_r + X D_x) + Z^2), voltage loss sensitivity
    Vec branch_r, branch_x, branch_z2;

    bool complete = false;  // true once build_sensitivities has run
};

/// Builds B and A from the breadth-first parent array.
/// Every column of B has exactly two unit entries (the branch endpoints).
inline SensitivityMatrices build_incidence(const FeederNetwork& net) {
    SensitivityMatrices m;
    m.n = net.n;
    m.B = Mat::Zero(net.n + 1, net.n);
    m.A = Mat::Zero(net.n, net.n);
    for (int j = 1; j <= net.n; ++j) {
        const int b = j - 1;
        const int p = net.parent[static_cast<size_t>(j)];
        m.B(j, b) = 1.0;
        m.B(p, b) = 1.0;
        if (p >= 1) m.A(p - 1, b) = 1.0;  // row of B without the substation, minus identity
    }
    m.branch_r = net.branch_r;
    m.branch_x = net.branch_x;
    m.branch_z2 = (net.branch_r.array().square() + net.branch_x.array().square()).matrix();
    return m;
}

/// Determinant of I - A exploiting the triangular structure. Exact.
inline double incidence_determinant(const SensitivityMatrices& m) {
    double det = 1.0;
    for (int i = 0; i < m.n; ++i) det *= 1.0 - m.A(i, i);
    return det;
}

/// Completes C, D_r, D_x, M_p, M_q and H. C is materialized through a unit
/// upper triangular solve (never an explicit inverse); it is reused by every
/// downstream product so the n^2 storage is paid once.
inline void build_sensitivities(const FeederNetwork& net, SensitivityMatrices& m) {
    if (m.n != net.n) throw DimensionError("incidence was built for a different network");
    const int n = m.n;
    const Mat ImA = Mat::Identity(n, n) - m.A;
    for (int i = 0; i < n; ++i)
        if (ImA(i, i) == 0.0)
            throw SingularSystemError("zero pivot in I - A; node ordering is broken");
    m.C = ImA.triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));

    const Mat AR = m.A * m.branch_r.asDiagonal();
    const Mat AX = m.A * m.branch_x.asDiagonal();
    m.D_r = ImA.triangularView<Eigen::Upper>().solve(AR);
    m.D_x = ImA.triangularView<Eigen::Upper>().solve(AX);

    m.M_p = 2.0 * m.C.transpose() * m.branch_r.asDiagonal() * m.C;
    m.M_q = 2.0 * m.C.transpose() * m.branch_x.asDiagonal() * m.C;
    m.H = m.C.transpose() *
          (2.0 * (m.branch_r.asDiagonal() * m.D_r + m.branch_x.asDiagonal() * m.D_x) +
           Mat(m.branch_z2.asDiagonal()));
    m.complete = true;
}

/// One-call construction of the full matrix set.
inline SensitivityMatrices build_matrices(const FeederNetwork& net) {
    SensitivityMatrices m = build_incidence(net);
    build_sensitivities(net, m);
    return m;
}

}  // namespace hostcap
