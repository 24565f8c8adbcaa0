/*
 Copyright 2026 The safe_adp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "safe_adp/lqr.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "safe_adp/errors.hpp"

namespace safe_adp {

CostSpec::CostSpec(Matrix Q_in, Matrix R_in)
    : Q(linalg::symmetrize(Q_in)), R(linalg::symmetrize(R_in)) {
    if (Q_in.rows() < 1 || Q_in.rows() != Q_in.cols()) throw ContractViolation("CostSpec: Q must be square");
    if (R_in.rows() < 1 || R_in.rows() != R_in.cols()) throw ContractViolation("CostSpec: R must be square");
    if (!Q.allFinite() || !R.allFinite()) throw ContractViolation("CostSpec: non-finite entries");
    if ((Q_in - Q_in.transpose()).norm() > 1e-12 * (1.0 + Q_in.norm()) ||
        (R_in - R_in.transpose()).norm() > 1e-12 * (1.0 + R_in.norm()))
        throw ContractViolation("CostSpec: Q and R must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(Q, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12) throw ContractViolation("CostSpec: Q must be positive semidefinite");
    if (Eigen::LLT<Matrix>(R).info() != Eigen::Success)
        throw ContractViolation("CostSpec: R must be positive definite");
}

namespace {

void check_dims(const LinearSystem& sys, const CostSpec& cost) {
    if (cost.n() != sys.n() || cost.m() != sys.m())
        throw ContractViolation("cost dimensions do not match the system (Q " + std::to_string(cost.n()) +
                                "x" + std::to_string(cost.n()) + ", R " + std::to_string(cost.m()) + "x" +
                                std::to_string(cost.m()) + ")");
}

Matrix riccati_map(const LinearSystem& sys, const CostSpec& cost, const Matrix& P) {
    const Matrix& A = sys.A();
    const Matrix& B = sys.B();
    const Matrix BtPA = B.transpose() * P * A;
    const Matrix S = cost.R + B.transpose() * P * B;
    return linalg::symmetrize(A.transpose() * P * A + cost.Q - BtPA.transpose() * S.ldlt().solve(BtPA));
}

}  // namespace

bool is_observable(const LinearSystem& sys, const CostSpec& cost) {
    check_dims(sys, cost);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cost.Q);
    const Vector ev = es.eigenvalues().cwiseMax(0.0);
    const Matrix C = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    const Eigen::Index n = sys.n();
    Matrix O(n * n, n);
    Matrix blk = C;
    for (Eigen::Index k = 0; k < n; ++k) {
        O.middleRows(k * n, n) = blk;
        blk = blk * sys.A();
    }
    return linalg::numerical_rank(O, 1e-9) == n;
}

double dare_residual(const LinearSystem& sys, const CostSpec& cost, const Matrix& P) {
    check_dims(sys, cost);
    return (riccati_map(sys, cost, P) - P).norm();
}

Matrix greedy_gain(const LinearSystem& sys, const CostSpec& cost, const Matrix& P) {
    check_dims(sys, cost);
    if (P.rows() != sys.n() || P.cols() != sys.n()) throw ContractViolation("greedy_gain: P must be n x n");
    const Matrix& B = sys.B();
    const Matrix S = cost.R + B.transpose() * P * B;
    Eigen::LDLT<Matrix> ldlt(S);
    if (ldlt.info() != Eigen::Success) throw ContractViolation("greedy_gain: R + B'PB is singular");
    return -ldlt.solve(B.transpose() * P * sys.A());
}

LqrSolution solve_dare(const LinearSystem& sys, const CostSpec& cost) {
    check_dims(sys, cost);
    constexpr long kMaxIter = 100000;
    Matrix P = cost.Q;
    for (long it = 1; it <= kMaxIter; ++it) {
        Matrix next = riccati_map(sys, cost, P);
        const double norm = next.norm();
        if (!std::isfinite(norm) || norm > 1e12)
            throw NotStabilizableError("solve_dare: value iteration diverged; (A, B) is not stabilizable");
        const double change = (next - P).norm();
        P = std::move(next);
        if (change <= 1e-12 * std::max(1.0, norm)) {
            LqrSolution sol;
            sol.P_inf = P;
            sol.K_inf = greedy_gain(sys, cost, P);
            sol.residual = dare_residual(sys, cost, P);
            sol.iterations = it;
            return sol;
        }
    }
    throw ConvergenceError("solve_dare: iteration cap reached", dare_residual(sys, cost, P));
}

Matrix lyapunov_evaluate(const LinearSystem& sys, const Matrix& K, const CostSpec& cost) {
    check_dims(sys, cost);
    const Matrix Acl = sys.closed_loop(K);
    if (!(linalg::spectral_radius(Acl) < 1.0))
        throw InstabilityError("lyapunov_evaluate: A + BK is not Schur stable");
    return linalg::discrete_lyapunov(Acl, cost.Q + K.transpose() * cost.R * K);
}

std::vector<HewerStep> hewer_iterate(const LinearSystem& sys, const Matrix& K0, const CostSpec& cost,
                                     int iters) {
    if (iters < 0) throw ContractViolation("hewer_iterate: iters must be >= 0");
    std::vector<HewerStep> out;
    out.reserve(static_cast<std::size_t>(iters));
    Matrix K = K0;
    for (int k = 0; k < iters; ++k) {
        HewerStep s;
        s.P = lyapunov_evaluate(sys, K, cost);
        s.K = greedy_gain(sys, cost, s.P);
        if (!out.empty()) {
            const Matrix& prev = out.back().P;
            if (!linalg::is_psd(prev - s.P, 1e-10 * (1.0 + prev.norm())))
                throw ConvergenceError("hewer_iterate: value matrices lost monotonicity at step " +
                                           std::to_string(k),
                                       (prev - s.P).norm());
        }
        K = s.K;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace safe_adp
