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
#ifndef SAFE_ADP_SDP_HPP
#define SAFE_ADP_SDP_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "safe_adp/linalg.hpp"

namespace safe_adp {

/**
 * @brief Affine matrix expression F0 + sum_k y_k F_k required to be PSD.
 *
 * The decision vector y is laid out as [svec(P), rho / rho_unit, s] (s only
 * when the owning problem has an epigraph variable). Terms are accumulated through the
 * builder methods; G stores vec(F_k) in column k.
 */
class Lmi {
public:
    Lmi(Eigen::Index dim, Eigen::Index n, Eigen::Index num_vars, Eigen::Index rho_index,
        Eigen::Index s_index, std::string name, bool certify, double rho_unit = 1.0);

    /// F0 += C
    Lmi& constant(const Matrix& C);
    /// += weight * M^T P M, with M of size n x dim.
    Lmi& congruence(const Matrix& M, double weight = 1.0);
    /// += rho * C
    Lmi& rho_term(const Matrix& C);
    /// += s * C (requires an epigraph variable)
    Lmi& s_term(const Matrix& C);

    Eigen::Index dim() const noexcept { return dim_; }
    const Matrix& F0() const noexcept { return F0_; }
    const Matrix& G() const noexcept { return G_; }
    const std::string& name() const noexcept { return name_; }
    /// Whether the block is re-checked by Cholesky after solving. Epigraph
    /// blocks of the objective are not.
    bool certify() const noexcept { return certify_; }

    /// F0 + sum_k y_k F_k
    Matrix evaluate(const Vector& y) const;

private:
    friend class SdpProblem;
    void add_var_term(Eigen::Index k, const Matrix& C);

    Eigen::Index dim_;
    Eigen::Index n_;
    Eigen::Index rho_index_;
    Eigen::Index s_index_;
    double rho_unit_;
    Matrix F0_;
    Matrix G_;
    std::string name_;
    bool certify_;
};

/**
 * @brief Small SDP over a symmetric n x n matrix P, a level rho and an
 * optional epigraph scalar s.
 *
 * minimize 0.5 y^T W y + w^T y + c0  subject to every Lmi being PSD.
 *
 * The solver works with rho / rho_unit. Every builder method takes rho in
 * its natural units; the unit only matters when rho is many orders of
 * magnitude away from the entries of P.
 */
class SdpProblem {
public:
    SdpProblem(Eigen::Index n, bool with_epigraph, double rho_unit = 1.0);

    Eigen::Index n() const noexcept { return n_; }
    Eigen::Index num_vars() const noexcept { return num_vars_; }
    Eigen::Index rho_index() const noexcept { return linalg::svec_size(n_); }
    bool has_epigraph() const noexcept { return with_epigraph_; }
    double rho_unit() const noexcept { return rho_unit_; }
    Eigen::Index s_index() const;

    /// Fresh LMI of size dim bound to this problem's variable layout.
    Lmi new_lmi(Eigen::Index dim, std::string name, bool certify = true) const;
    void add_lmi(Lmi lmi);

    /// Scalar inequality a^T (P, rho, s) + b >= 0, stored as a 1 x 1 LMI.
    void add_scalar(const Vector& a, double b, std::string name);

    /// Objective += 0.5 * weight * (a^T y + b)^2
    void add_squared_affine(const Vector& a, double b, double weight = 1.0);
    /// Objective += coef * y_k (coef per unit of rho when k is rho_index())
    void add_linear(Eigen::Index k, double coef);

    /// Coefficients a with <M, P> = a^T y for the P-part of y.
    Vector trace_coefficients(const Matrix& M) const;

    const std::vector<Lmi>& lmis() const noexcept { return lmis_; }
    const Matrix& W() const noexcept { return W_; }
    const Vector& w() const noexcept { return w_; }
    double objective_constant() const noexcept { return c0_; }

    double objective(const Vector& y) const { return 0.5 * y.dot(W_ * y) + w_.dot(y) + c0_; }

    /// Decision vector for the given (P, rho, s).
    Vector pack(const Matrix& P, double rho, double s = 0.0) const;

private:
    Eigen::Index n_;
    bool with_epigraph_;
    Eigen::Index num_vars_;
    double rho_unit_;
    std::vector<Lmi> lmis_;
    Matrix W_;
    Vector w_;
    double c0_ = 0.0;
};

struct SdpConfig {
    double feas_tol = 1e-7;
    int max_iter = 20000;
    double sigma = 1.0;            ///< initial ADMM penalty
    double relaxation = 1.6;       ///< over-relaxation factor in (0, 2)
    double proximal = 1e-8;        ///< proximal regularisation of the y-step
    int check_interval = 25;       ///< iterations between termination checks
    double infeasibility_tol = 1e-6;
    double certification_margin = 1e-6;  ///< relative PSD margin of certified blocks
    int certification_retries = 3;       ///< margin is multiplied by 10 per retry
    std::ostream* trace = nullptr;       ///< optional CSV diagnostic stream
};

enum class SdpStatus { optimal, max_iterations, infeasible };

const char* to_string(SdpStatus s);

struct SdpSolution {
    Matrix P;
    double rho = 0.0;
    double s = 0.0;
    SdpStatus status = SdpStatus::max_iterations;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double objective_value = 0.0;
    int iterations = 0;
    /// Every certify() block passed the Cholesky test at the returned point.
    bool certified = false;
    Vector y;
};

/// Frobenius projection onto the PSD cone (input is symmetrised first).
Matrix project_psd(const Matrix& M);

/**
 * Solves the problem by ADMM with PSD-cone projections, Ruiz equilibration,
 * over-relaxation and residual balancing of the penalty. status=optimal
 * means the residuals met feas_tol and every certified block passed an
 * independent Cholesky test; otherwise the last iterate is returned with
 * status max_iterations, or infeasible when a Farkas-type certificate is
 * detected in the dual iterates.
 */
SdpSolution solve(const SdpProblem& prob, const SdpConfig& cfg = {},
                  const std::optional<Vector>& warm_start = std::nullopt);

}  // namespace safe_adp

#endif  // SAFE_ADP_SDP_HPP
