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
#ifndef SAFE_ADP_CONSTRAINTS_HPP
#define SAFE_ADP_CONSTRAINTS_HPP

#include <optional>
#include <vector>

#include "safe_adp/linalg.hpp"
#include "safe_adp/linear_system.hpp"

namespace safe_adp {

/// One normalised polytope row c^T x + d^T u <= 1.
struct ConstraintRow {
    Vector c;
    Vector d;
};

/**
 * @brief Polytopic state/input constraints in normalised form.
 *
 * Every row has right-hand side 1, so the origin is strictly feasible.
 * General rows a^T x + b^T u <= g are accepted through add_general(), which
 * divides by g and rejects g <= 0.
 */
class ConstraintSet {
public:
    ConstraintSet(Eigen::Index n, Eigen::Index m);

    /// |x_i| <= state_bound for all i, and |u_j| <= input_bound when given.
    static ConstraintSet box(Eigen::Index n, Eigen::Index m, std::optional<double> state_bound,
                             std::optional<double> input_bound);

    void add_row(Vector c, Vector d);
    void add_general(const Vector& a, const Vector& b, double g);

    Eigen::Index n() const noexcept { return n_; }
    Eigen::Index m() const noexcept { return m_; }
    std::size_t size() const noexcept { return rows_.size(); }
    bool empty() const noexcept { return rows_.empty(); }
    const std::vector<ConstraintRow>& rows() const noexcept { return rows_; }

    /// max_i (c_i^T x + d_i^T u) - 1; nonpositive iff (x, u) is admissible.
    /// Returns -1 for an empty set.
    double max_violation(const Vector& x, const Vector& u) const;

    /// Rows rescaled so that K x satisfies them with room for an additive
    /// input perturbation bounded by `amplitude` in the sup norm.
    ConstraintSet tightened_for_input_noise(double amplitude) const;

    /// Every bound multiplied by `factor` (factor > 1 loosens).
    ConstraintSet inflated(double factor) const;

private:
    Eigen::Index n_;
    Eigen::Index m_;
    std::vector<ConstraintRow> rows_;
};

/// Sublevel set {x : x^T P x <= rho} with P symmetric positive definite.
struct Ellipsoid {
    Matrix P;
    double rho = 1.0;

    Ellipsoid() = default;
    Ellipsoid(Matrix P_in, double rho_in);

    Eigen::Index n() const noexcept { return P.rows(); }
    double value(const Vector& x) const { return x.dot(P * x); }
};

/// Gain together with the ellipsoid that certifies it and its contraction factor.
struct CertifiedPolicy {
    Matrix K;
    Ellipsoid cais;
    double lambda = 0.0;
};

bool contains(const Ellipsoid& e, const Vector& x);

/// Row vectors c_i + K^T d_i of the closed-loop state constraints.
std::vector<Vector> closed_loop_rows(const ConstraintSet& cs, const Matrix& K);

/// Largest rho for which {x^T P x <= rho} satisfies every closed-loop row:
/// min_i 1 / (v_i^T P^{-1} v_i). +infinity when no row constrains the state.
double max_admissible_level(const Matrix& P, const Matrix& K, const ConstraintSet& cs);

/// P - rho v_i v_i^T >= 0 for all rows, tested by Cholesky.
bool admissibility_check(const Ellipsoid& e, const Matrix& K, const ConstraintSet& cs);

/// lambda P - (A+BK)^T P (A+BK) >= 0, tested by Cholesky.
bool invariance_check(const Ellipsoid& e, const LinearSystem& sys, const Matrix& K, double lambda);

/// Smallest lambda with lambda P - (A+BK)^T P (A+BK) >= 0.
double contraction_factor(const Matrix& P, const LinearSystem& sys, const Matrix& K);

/**
 * Builds an ellipsoidal constraint-admissible invariant set for u = K0 x.
 *
 * Solves (A+BK0)^T P (A+BK0) - lambda P = -W (W = identity unless given),
 * then takes rho as the largest admissible level of P. Throws
 * PreconditionError when A+BK0 is not Schur stable or lambda is not in (0,1],
 * and SynthesisError (carrying the maximal feasible rho) when x0 is not
 * strictly inside the state constraints or lies outside that level set.
 */
Ellipsoid synthesize_initial_cais(const LinearSystem& sys, const ConstraintSet& cs, const Matrix& K0,
                                  const Vector& x0, double lambda,
                                  const std::optional<Matrix>& weight = std::nullopt);

}  // namespace safe_adp

#endif  // SAFE_ADP_CONSTRAINTS_HPP
