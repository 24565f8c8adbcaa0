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
#include "safe_adp/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>

#include "safe_adp/errors.hpp"

namespace safe_adp::linalg {

bool is_psd(const Matrix& M, double shift) {
    if (M.rows() != M.cols()) throw ContractViolation("is_psd: matrix must be square");
    if (M.size() == 0) return true;
    if (!M.allFinite()) return false;
    Matrix S = symmetrize(M);
    S.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt(S);
    return llt.info() == Eigen::Success;
}

double certification_shift(const Matrix& P) {
    if (P.rows() == 0) return 0.0;
    return 1e-12 * std::abs(P.trace()) / static_cast<double>(P.rows());
}

Vector vec(const Matrix& M) { return Eigen::Map<const Vector>(M.data(), M.size()); }

Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw ContractViolation("unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Matrix kron(const Matrix& A, const Matrix& B) { return Eigen::kroneckerProduct(A, B).eval(); }

Vector svec(const Matrix& S) {
    const Eigen::Index n = S.rows();
    Vector s(svec_size(n));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) s(k++) = (i == j) ? S(i, i) : 0.5 * (S(i, j) + S(j, i));
    return s;
}

Matrix smat(const Vector& s, Eigen::Index n) {
    if (s.size() != svec_size(n)) throw ContractViolation("smat: size mismatch");
    Matrix S(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) {
            S(i, j) = s(k);
            S(j, i) = s(k);
            ++k;
        }
    return S;
}

Matrix svec_basis(Eigen::Index k, Eigen::Index n) {
    Vector e = Vector::Zero(svec_size(n));
    e(k) = 1.0;
    return smat(e, n);
}

Eigen::Index numerical_rank(const Matrix& M, double rel_tol) {
    if (M.size() == 0) return 0;
    Eigen::BDCSVD<Matrix> svd(M);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double thr = rel_tol * sv(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > thr) ++r;
    return r;
}

double spectral_radius(const Matrix& A) {
    if (A.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix controllability_matrix(const Matrix& A, const Matrix& B) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    Matrix C(n, n * m);
    Matrix blk = B;
    for (Eigen::Index k = 0; k < n; ++k) {
        C.middleCols(k * m, m) = blk;
        blk = A * blk;
    }
    return C;
}

Matrix inverse_sqrt_spd(const Matrix& P) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(P));
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw ContractViolation("inverse_sqrt_spd: matrix is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

Matrix discrete_lyapunov(const Matrix& Acl, const Matrix& W) {
    const Eigen::Index n = Acl.rows();
    if (Acl.cols() != n || W.rows() != n || W.cols() != n)
        throw ContractViolation("discrete_lyapunov: dimension mismatch");
    const Matrix At = Acl.transpose();
    const Matrix L = Matrix::Identity(n * n, n * n) - kron(At, At);
    Eigen::FullPivLU<Matrix> lu(L);
    if (!lu.isInvertible() || lu.rcond() < 1e-14)
        throw InstabilityError("discrete_lyapunov: closed loop has an eigenvalue pair with product 1");
    const Vector p = lu.solve(vec(W));
    return symmetrize(unvec(p, n, n));
}

}  // namespace safe_adp::linalg
