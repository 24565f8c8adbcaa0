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
#ifndef SAFE_ADP_LINALG_HPP
#define SAFE_ADP_LINALG_HPP

#include <Eigen/Dense>

namespace safe_adp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

inline Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

/// Cholesky-based positive semidefiniteness test. The symmetric part of `M`
/// is shifted by `shift` on the diagonal before factorization, so matrices
/// with eigenvalues down to -shift are accepted.
bool is_psd(const Matrix& M, double shift);

/// Relative shift used by every certification test: 1e-12 * trace(P) / n.
double certification_shift(const Matrix& P);

/// Column-major vectorisation, vec(AXB) = (B^T kron A) vec(X).
Vector vec(const Matrix& M);
Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols);

Matrix kron(const Matrix& A, const Matrix& B);

/// Dimension of the space of symmetric n x n matrices.
constexpr Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// Coordinates of a symmetric matrix in the basis {E_ii} U {E_ij + E_ji, i<j},
/// ordered column by column over the upper triangle.
Vector svec(const Matrix& S);
Matrix smat(const Vector& s, Eigen::Index n);

/// Basis element k of the svec coordinate system.
Matrix svec_basis(Eigen::Index k, Eigen::Index n);

/// Numerical rank: number of singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const Matrix& M, double rel_tol);

double spectral_radius(const Matrix& A);

/// [B, AB, ..., A^{n-1}B]
Matrix controllability_matrix(const Matrix& A, const Matrix& B);

/// Symmetric inverse square root of a positive definite matrix.
Matrix inverse_sqrt_spd(const Matrix& P);

/// Solves Acl^T P Acl - P + W = 0 through the Kronecker form
/// (I - Acl^T kron Acl^T) vec(P) = vec(W). Throws InstabilityError when the
/// linear system is numerically singular. The result is symmetrised.
Matrix discrete_lyapunov(const Matrix& Acl, const Matrix& W);

inline double max_singular_value(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

}  // namespace linalg
}  // namespace safe_adp

#endif  // SAFE_ADP_LINALG_HPP
