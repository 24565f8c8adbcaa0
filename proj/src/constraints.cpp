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
#include "safe_adp/constraints.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <string>

#include "safe_adp/errors.hpp"

namespace safe_adp {

ConstraintSet::ConstraintSet(Eigen::Index n, Eigen::Index m) : n_(n), m_(m) {
    if (n < 1 || m < 1) throw ContractViolation("ConstraintSet: n and m must be >= 1");
}

ConstraintSet ConstraintSet::box(Eigen::Index n, Eigen::Index m, std::optional<double> state_bound,
                                 std::optional<double> input_bound) {
    ConstraintSet cs(n, m);
    if (state_bound) {
        if (!(*state_bound > 0.0)) throw ContractViolation("ConstraintSet::box: state bound must be > 0");
        for (Eigen::Index i = 0; i < n; ++i)
            for (double sign : {1.0, -1.0}) {
                Vector c = Vector::Zero(n);
                c(i) = sign / *state_bound;
                cs.add_row(std::move(c), Vector::Zero(m));
            }
    }
    if (input_bound) {
        if (!(*input_bound > 0.0)) throw ContractViolation("ConstraintSet::box: input bound must be > 0");
        for (Eigen::Index j = 0; j < m; ++j)
            for (double sign : {1.0, -1.0}) {
                Vector d = Vector::Zero(m);
                d(j) = sign / *input_bound;
                cs.add_row(Vector::Zero(n), std::move(d));
            }
    }
    return cs;
}

void ConstraintSet::add_row(Vector c, Vector d) {
    if (c.size() != n_ || d.size() != m_)
        throw ContractViolation("ConstraintSet: row has c of length " + std::to_string(c.size()) +
                                " and d of length " + std::to_string(d.size()) + ", expected " +
                                std::to_string(n_) + " and " + std::to_string(m_));
    if (!c.allFinite() || !d.allFinite()) throw ContractViolation("ConstraintSet: non-finite row");
    rows_.push_back({std::move(c), std::move(d)});
}

void ConstraintSet::add_general(const Vector& a, const Vector& b, double g) {
    if (!(g > 0.0) || !std::isfinite(g))
        throw ContractViolation("ConstraintSet: general row bound must be finite and > 0");
    add_row(a / g, b / g);
}

double ConstraintSet::max_violation(const Vector& x, const Vector& u) const {
    if (x.size() != n_ || u.size() != m_) throw ContractViolation("max_violation: dimension mismatch");
    double worst = -1.0;
    bool any = false;
    for (const auto& r : rows_) {
        const double val = r.c.dot(x) + r.d.dot(u) - 1.0;
        worst = any ? std::max(worst, val) : val;
        any = true;
    }
    return worst;
}

ConstraintSet ConstraintSet::tightened_for_input_noise(double amplitude) const {
    if (!(amplitude >= 0.0)) throw ContractViolation("tightened_for_input_noise: amplitude must be >= 0");
    ConstraintSet out(n_, m_);
    for (const auto& r : rows_) {
        const double margin = r.d.lpNorm<1>() * amplitude;
        if (margin >= 1.0)
            throw ContractViolation("tightened_for_input_noise: noise amplitude exhausts an input bound");
        const double scale = 1.0 / (1.0 - margin);
        out.add_row(r.c * scale, r.d * scale);
    }
    return out;
}

ConstraintSet ConstraintSet::inflated(double factor) const {
    if (!(factor > 0.0)) throw ContractViolation("inflated: factor must be > 0");
    ConstraintSet out(n_, m_);
    for (const auto& r : rows_) out.add_row(r.c / factor, r.d / factor);
    return out;
}

Ellipsoid::Ellipsoid(Matrix P_in, double rho_in) : P(linalg::symmetrize(P_in)), rho(rho_in) {
    if (P.rows() < 1 || P.rows() != P.cols()) throw ContractViolation("Ellipsoid: P must be square");
    if (!P.allFinite()) throw ContractViolation("Ellipsoid: P has non-finite entries");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ContractViolation("Ellipsoid: rho must be finite and > 0");
    Eigen::LLT<Matrix> llt(P);
    if (llt.info() != Eigen::Success) throw ContractViolation("Ellipsoid: P is not positive definite");
}

bool contains(const Ellipsoid& e, const Vector& x) {
    if (x.size() != e.n()) throw ContractViolation("contains: dimension mismatch");
    return e.value(x) <= e.rho;
}

std::vector<Vector> closed_loop_rows(const ConstraintSet& cs, const Matrix& K) {
    if (K.rows() != cs.m() || K.cols() != cs.n())
        throw ContractViolation("closed_loop_rows: K must be m x n");
    std::vector<Vector> out;
    out.reserve(cs.size());
    for (const auto& r : cs.rows()) out.push_back(r.c + K.transpose() * r.d);
    return out;
}

double max_admissible_level(const Matrix& P, const Matrix& K, const ConstraintSet& cs) {
    Eigen::LLT<Matrix> llt(linalg::symmetrize(P));
    if (llt.info() != Eigen::Success)
        throw ContractViolation("max_admissible_level: P is not positive definite");
    double level = std::numeric_limits<double>::infinity();
    for (const Vector& v : closed_loop_rows(cs, K)) {
        const double q = v.dot(llt.solve(v));
        if (q > 0.0) level = std::min(level, 1.0 / q);
    }
    return level;
}

bool admissibility_check(const Ellipsoid& e, const Matrix& K, const ConstraintSet& cs) {
    if (cs.n() != e.n()) throw ContractViolation("admissibility_check: dimension mismatch");
    const double shift = linalg::certification_shift(e.P);
    for (const Vector& v : closed_loop_rows(cs, K)) {
        const Matrix M = e.P - e.rho * v * v.transpose();
        if (!linalg::is_psd(M, shift)) return false;
    }
    return true;
}

bool invariance_check(const Ellipsoid& e, const LinearSystem& sys, const Matrix& K, double lambda) {
    if (sys.n() != e.n()) throw ContractViolation("invariance_check: dimension mismatch");
    const Matrix Acl = sys.closed_loop(K);
    const Matrix M = lambda * e.P - Acl.transpose() * e.P * Acl;
    return linalg::is_psd(M, linalg::certification_shift(e.P));
}

double contraction_factor(const Matrix& P, const LinearSystem& sys, const Matrix& K) {
    if (P.rows() != sys.n()) throw ContractViolation("contraction_factor: dimension mismatch");
    Eigen::LLT<Matrix> llt(linalg::symmetrize(P));
    if (llt.info() != Eigen::Success) throw ContractViolation("contraction_factor: P is not positive definite");
    const Matrix Acl = sys.closed_loop(K);
    // With P = L L^T the factor is the largest eigenvalue of L^{-1} Acl^T P Acl L^{-T}.
    const Matrix M = llt.matrixL().solve(Matrix(Acl.transpose() * P * Acl));
    const Matrix S = llt.matrixL().solve(Matrix(M.transpose()));
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(S), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

Ellipsoid synthesize_initial_cais(const LinearSystem& sys, const ConstraintSet& cs, const Matrix& K0,
                                  const Vector& x0, double lambda, const std::optional<Matrix>& weight) {
    const Eigen::Index n = sys.n();
    if (cs.n() != n || cs.m() != sys.m()) throw ContractViolation("synthesize_initial_cais: constraint dimensions");
    if (x0.size() != n) throw ContractViolation("synthesize_initial_cais: x0 has wrong length");
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw PreconditionError("synthesize_initial_cais: lambda must lie in (0, 1]");

    const Matrix Acl = sys.closed_loop(K0);
    const double radius = linalg::spectral_radius(Acl);
    if (!(radius < 1.0)) throw PreconditionError("synthesize_initial_cais: A + B K0 is not Schur stable");
    if (!(radius * radius < lambda))
        throw PreconditionError("synthesize_initial_cais: lambda is below the squared closed-loop spectral radius");

    Matrix W = weight ? linalg::symmetrize(*weight) : Matrix(Matrix::Identity(n, n));
    if (W.rows() != n || W.cols() != n) throw ContractViolation("synthesize_initial_cais: weight must be n x n");
    if (Eigen::LLT<Matrix>(W).info() != Eigen::Success)
        throw ContractViolation("synthesize_initial_cais: weight must be positive definite");

    // Scaling the closed loop by 1/sqrt(lambda) turns the contraction equation
    // into a standard discrete Lyapunov equation.
    const double s = std::sqrt(lambda);
    const Matrix P = linalg::discrete_lyapunov(Acl / s, W / lambda);

    const double rho_max = max_admissible_level(P, K0, cs);
    if (!std::isfinite(rho_max)) {
        const double level = std::max(x0.dot(P * x0), 1.0);
        return Ellipsoid(P, level);
    }

    for (const Vector& v : closed_loop_rows(cs, K0))
        if (!(v.dot(x0) < 1.0))
            throw SynthesisError("synthesize_initial_cais: x0 is not strictly inside the constraint set", rho_max);

    const double level_x0 = x0.dot(P * x0);
    if (level_x0 > rho_max * (1.0 + 1e-12))
        throw SynthesisError("synthesize_initial_cais: x0 lies outside the largest admissible level set (x0'Px0 = " +
                                 std::to_string(level_x0) + ", max rho = " + std::to_string(rho_max) + ")",
                             rho_max);
    return Ellipsoid(P, std::max(rho_max * (1.0 - 1e-10), level_x0));
}

}  // namespace safe_adp
