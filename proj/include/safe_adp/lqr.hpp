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
#ifndef SAFE_ADP_LQR_HPP
#define SAFE_ADP_LQR_HPP

#include <vector>

#include "safe_adp/linalg.hpp"
#include "safe_adp/linear_system.hpp"

namespace safe_adp {

/// Quadratic stage cost x^T Q x + u^T R u.
struct CostSpec {
    Matrix Q;
    Matrix R;

    CostSpec() = default;
    /// Validates Q >= 0 (eigenvalues >= -1e-12) and R > 0 (Cholesky).
    CostSpec(Matrix Q_in, Matrix R_in);

    Eigen::Index n() const noexcept { return Q.rows(); }
    Eigen::Index m() const noexcept { return R.rows(); }
};

/// Rank test on [C; CA; ...; CA^{n-1}] with C = Q^{1/2}.
bool is_observable(const LinearSystem& sys, const CostSpec& cost);

struct LqrSolution {
    Matrix P_inf;
    Matrix K_inf;
    double residual = 0.0;
    long iterations = 0;
};

/// Frobenius norm of A^T P A + Q - A^T P B (R + B^T P B)^{-1} B^T P A - P.
double dare_residual(const LinearSystem& sys, const CostSpec& cost, const Matrix& P);

/// Greedy gain -(R + B^T P B)^{-1} B^T P A for a value matrix P.
Matrix greedy_gain(const LinearSystem& sys, const CostSpec& cost, const Matrix& P);

/**
 * @brief Solves the discrete algebraic Riccati equation by value iteration.
 *
 * Starts from P = Q and iterates the Riccati map until the Frobenius change is
 * at most 1e-12 * max(1, ||P||_F) or 1e5 iterations elapse. Throws
 * NotStabilizableError when ||P||_F exceeds 1e12 and ConvergenceError when
 * the iteration cap is reached.
 */
LqrSolution solve_dare(const LinearSystem& sys, const CostSpec& cost);

/// Exact cost-to-go matrix of u = K x: solves
/// (A+BK)^T P (A+BK) - P + Q + K^T R K = 0. Throws InstabilityError when
/// A + BK is not Schur stable.
Matrix lyapunov_evaluate(const LinearSystem& sys, const Matrix& K, const CostSpec& cost);

struct HewerStep {
    Matrix P;  ///< cost-to-go of the previous gain
    Matrix K;  ///< greedy gain with respect to P
};

/**
 * Classical model-based policy iteration from a stabilizing K0. Entry k holds
 * P_k = lyapunov_evaluate(K_{k-1}) and K_k = greedy_gain(P_k). Throws
 * ConvergenceError if two consecutive value matrices are not ordered in the
 * Loewner sense within a 1e-10 relative slack.
 */
std::vector<HewerStep> hewer_iterate(const LinearSystem& sys, const Matrix& K0, const CostSpec& cost,
                                     int iters);

}  // namespace safe_adp

#endif  // SAFE_ADP_LQR_HPP
