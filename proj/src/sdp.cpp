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
#include "safe_adp/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "safe_adp/errors.hpp"

namespace safe_adp {

Lmi::Lmi(Eigen::Index dim, Eigen::Index n, Eigen::Index num_vars, Eigen::Index rho_index,
         Eigen::Index s_index, std::string name, bool certify, double rho_unit)
    : dim_(dim),
      n_(n),
      rho_index_(rho_index),
      s_index_(s_index),
      rho_unit_(rho_unit),
      F0_(Matrix::Zero(dim, dim)),
      G_(Matrix::Zero(dim * dim, num_vars)),
      name_(std::move(name)),
      certify_(certify) {
    if (dim < 1) throw ContractViolation("Lmi: dimension must be >= 1");
}

Lmi& Lmi::constant(const Matrix& C) {
    if (C.rows() != dim_ || C.cols() != dim_) throw ContractViolation("Lmi::constant: size mismatch in " + name_);
    F0_ += linalg::symmetrize(C);
    return *this;
}

Lmi& Lmi::congruence(const Matrix& M, double weight) {
    if (M.rows() != n_ || M.cols() != dim_) throw ContractViolation("Lmi::congruence: M must be n x dim in " + name_);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n_; ++j) {
        const Vector mj = M.row(j).transpose();
        for (Eigen::Index i = 0; i <= j; ++i, ++k) {
            const Vector mi = M.row(i).transpose();
            Matrix T = (i == j) ? Matrix(mi * mi.transpose())
                                : Matrix(mi * mj.transpose() + mj * mi.transpose());
            G_.col(k) += weight * linalg::vec(T);
        }
    }
    return *this;
}

void Lmi::add_var_term(Eigen::Index k, const Matrix& C) {
    if (C.rows() != dim_ || C.cols() != dim_) throw ContractViolation("Lmi: term size mismatch in " + name_);
    G_.col(k) += linalg::vec(linalg::symmetrize(C));
}

Lmi& Lmi::rho_term(const Matrix& C) {
    add_var_term(rho_index_, rho_unit_ * C);
    return *this;
}

Lmi& Lmi::s_term(const Matrix& C) {
    if (s_index_ < 0) throw ContractViolation("Lmi::s_term: problem has no epigraph variable");
    add_var_term(s_index_, C);
    return *this;
}

Matrix Lmi::evaluate(const Vector& y) const {
    if (y.size() != G_.cols()) throw ContractViolation("Lmi::evaluate: wrong decision vector length");
    Matrix M = F0_ + linalg::unvec(G_ * y, dim_, dim_);
    return linalg::symmetrize(M);
}

SdpProblem::SdpProblem(Eigen::Index n, bool with_epigraph, double rho_unit)
    : n_(n),
      with_epigraph_(with_epigraph),
      num_vars_(linalg::svec_size(n) + 1 + (with_epigraph ? 1 : 0)),
      rho_unit_(rho_unit) {
    if (n < 1) throw ContractViolation("SdpProblem: n must be >= 1");
    if (!(rho_unit > 0.0) || !std::isfinite(rho_unit))
        throw ContractViolation("SdpProblem: rho_unit must be finite and > 0");
    W_ = Matrix::Zero(num_vars_, num_vars_);
    w_ = Vector::Zero(num_vars_);
}

Eigen::Index SdpProblem::s_index() const {
    if (!with_epigraph_) throw ContractViolation("SdpProblem: no epigraph variable");
    return num_vars_ - 1;
}

Lmi SdpProblem::new_lmi(Eigen::Index dim, std::string name, bool certify) const {
    return Lmi(dim, n_, num_vars_, rho_index(), with_epigraph_ ? num_vars_ - 1 : -1, std::move(name), certify,
               rho_unit_);
}

void SdpProblem::add_lmi(Lmi lmi) {
    if (lmi.G().cols() != num_vars_) throw ContractViolation("SdpProblem::add_lmi: variable layout mismatch");
    lmis_.push_back(std::move(lmi));
}

void SdpProblem::add_scalar(const Vector& a, double b, std::string name) {
    if (a.size() != num_vars_) throw ContractViolation("SdpProblem::add_scalar: wrong coefficient length");
    Lmi l = new_lmi(1, std::move(name));
    Matrix c(1, 1);
    c(0, 0) = b;
    l.constant(c);
    for (Eigen::Index k = 0; k < num_vars_; ++k) {
        Matrix t(1, 1);
        t(0, 0) = k == rho_index() ? a(k) * rho_unit_ : a(k);
        l.add_var_term(k, t);
    }
    add_lmi(std::move(l));
}

void SdpProblem::add_squared_affine(const Vector& a, double b, double weight) {
    if (a.size() != num_vars_) throw ContractViolation("SdpProblem::add_squared_affine: wrong length");
    Vector as = a;
    as(rho_index()) *= rho_unit_;
    W_ += weight * as * as.transpose();
    w_ += weight * b * as;
    c0_ += 0.5 * weight * b * b;
}

void SdpProblem::add_linear(Eigen::Index k, double coef) {
    if (k < 0 || k >= num_vars_) throw ContractViolation("SdpProblem::add_linear: index out of range");
    w_(k) += k == rho_index() ? coef * rho_unit_ : coef;
}

Vector SdpProblem::trace_coefficients(const Matrix& M) const {
    if (M.rows() != n_ || M.cols() != n_) throw ContractViolation("trace_coefficients: M must be n x n");
    Vector a = Vector::Zero(num_vars_);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n_; ++j)
        for (Eigen::Index i = 0; i <= j; ++i, ++k) a(k) = (i == j) ? M(i, i) : M(i, j) + M(j, i);
    return a;
}

Vector SdpProblem::pack(const Matrix& P, double rho, double s) const {
    if (P.rows() != n_ || P.cols() != n_) throw ContractViolation("SdpProblem::pack: P must be n x n");
    Vector y(num_vars_);
    y.head(linalg::svec_size(n_)) = linalg::svec(P);
    y(rho_index()) = rho / rho_unit_;
    if (with_epigraph_) y(num_vars_ - 1) = s;
    return y;
}

const char* to_string(SdpStatus s) {
    switch (s) {
        case SdpStatus::optimal: return "optimal";
        case SdpStatus::max_iterations: return "max-iterations";
        case SdpStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

Matrix project_psd(const Matrix& M) {
    if (M.rows() != M.cols()) throw ContractViolation("project_psd: matrix must be square");
    const Matrix S = linalg::symmetrize(M);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const Vector ev = es.eigenvalues().cwiseMax(0.0);
    return linalg::symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

namespace {

// In-place projection of a vectorised dim x dim block onto the PSD cone.
void project_block(Eigen::Ref<Vector> v, Eigen::Index dim) {
    if (dim == 1) {
        v(0) = std::max(v(0), 0.0);
        return;
    }
    Eigen::Map<Matrix> M(v.data(), dim, dim);
    Matrix S = 0.5 * (M + M.transpose());
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() == Eigen::Success) {
        M = S;
        return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const Vector ev = es.eigenvalues().cwiseMax(0.0);
    M = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    M = 0.5 * (M + M.transpose()).eval();
}

struct Layout {
    std::vector<Eigen::Index> dim;
    std::vector<Eigen::Index> offset;
    Eigen::Index rows = 0;
};

struct AdmmState {
    Vector y;  // scaled
    Vector z;
    Vector u;
};

class Admm {
public:
    Admm(const SdpProblem& prob, const SdpConfig& cfg) : prob_(prob), cfg_(cfg) {
        const auto& lmis = prob.lmis();
        const Eigen::Index d = prob.num_vars();
        for (const auto& l : lmis) {
            layout_.dim.push_back(l.dim());
            layout_.offset.push_back(layout_.rows);
            layout_.rows += l.dim() * l.dim();
        }
        G_.resize(layout_.rows, d);
        f0_.resize(layout_.rows);
        for (std::size_t b = 0; b < lmis.size(); ++b) {
            G_.middleRows(layout_.offset[b], lmis[b].G().rows()) = lmis[b].G();
            f0_.segment(layout_.offset[b], lmis[b].G().rows()) = linalg::vec(lmis[b].F0());
        }
        margin_.assign(lmis.size(), 0.0);
        equilibrate();
    }

    Eigen::Index blocks() const { return static_cast<Eigen::Index>(layout_.dim.size()); }
    double block_scale(std::size_t b) const { return E_(static_cast<Eigen::Index>(b)); }
    std::vector<double>& margins() { return margin_; }

    Vector unscale_y(const Vector& yhat) const { return D_.cwiseProduct(yhat); }
    Vector scale_y(const Vector& y) const { return y.cwiseQuotient(D_); }

    AdmmState initial_state(const std::optional<Vector>& y0) {
        AdmmState st;
        st.y = y0 ? scale_y(*y0) : Vector(Vector::Zero(prob_.num_vars()));
        st.z = Ghat_ * st.y + f0hat();
        project(st.z);
        st.u = Vector::Zero(layout_.rows);
        return st;
    }

    struct Outcome {
        SdpStatus status = SdpStatus::max_iterations;
        int iterations = 0;
        double primal = 0.0;
        double dual = 0.0;
    };

    Outcome run(AdmmState& st, int max_iter, int attempt) {
        const Vector f0h = f0hat();
        double sigma = sigma_;
        const Eigen::Index d = prob_.num_vars();
        const Matrix GtG = Ghat_.transpose() * Ghat_;
        auto factor = [&](double sg) {
            Matrix Kmat = What_ + sg * GtG;
            Kmat.diagonal().array() += cfg_.proximal;
            return Eigen::LDLT<Matrix>(Kmat);
        };
        Eigen::LDLT<Matrix> kkt = factor(sigma);
        Vector u_prev = st.u;
        int infeasible_hits = 0;
        Outcome out;
        for (int it = 1; it <= max_iter; ++it) {
            const Vector rhs = -what_ - sigma * Ghat_.transpose() * (f0h - st.z + st.u) + cfg_.proximal * st.y;
            st.y = kkt.solve(rhs);
            const Vector h = Ghat_ * st.y + f0h;
            const Vector ht = cfg_.relaxation * h + (1.0 - cfg_.relaxation) * st.z;
            u_prev = st.u;
            Vector v = ht + st.u;
            st.z = v;
            project(st.z);
            st.u = v - st.z;

            if (it % cfg_.check_interval != 0 && it != max_iter) continue;

            // Residuals in the original scaling.
            // The primal test is relative per block so that small blocks are not
            // masked by large ones.
            double prim = 0.0, prim_rel = 0.0;
            for (Eigen::Index b = 0; b < blocks(); ++b) {
                const Eigen::Index off = layout_.offset[b];
                const Eigen::Index len = layout_.dim[b] * layout_.dim[b];
                const double e = E_(b);
                const double r = (h.segment(off, len) - st.z.segment(off, len)).lpNorm<Eigen::Infinity>() / e;
                const double scale = std::max(h.segment(off, len).lpNorm<Eigen::Infinity>(),
                                              st.z.segment(off, len).lpNorm<Eigen::Infinity>()) / e;
                prim = std::max(prim, r);
                prim_rel = std::max(prim_rel, r / (1.0 + scale));
            }
            const Vector Wy = What_ * st.y;
            const Vector Gu = sigma * (Ghat_.transpose() * st.u);
            const Vector rd = (Wy + what_ + Gu).cwiseQuotient(D_) / cost_scale_;
            const double dual = rd.lpNorm<Eigen::Infinity>();
            const double dual_scale = std::max({Wy.cwiseQuotient(D_).lpNorm<Eigen::Infinity>(),
                                                what_.cwiseQuotient(D_).lpNorm<Eigen::Infinity>(),
                                                Gu.cwiseQuotient(D_).lpNorm<Eigen::Infinity>()}) /
                                      cost_scale_;
            out.iterations = it;
            out.primal = prim;
            out.dual = dual;
            if (cfg_.trace) {
                const Vector y = unscale_y(st.y);
                *cfg_.trace << attempt << ',' << it << ',' << prim << ',' << dual << ',' << sigma << ','
                            << prob_.objective(y) << '\n';
            }
            const double dual_rel = dual / (1.0 + dual_scale);
            if (prim_rel <= cfg_.feas_tol && dual_rel <= cfg_.feas_tol) {
                out.status = SdpStatus::optimal;
                sigma_ = sigma;
                return out;
            }

            // Farkas certificate in the dual increments: G^T du ~ 0 with <f0, du> > 0.
            const Vector du = st.u - u_prev;
            const double dn = du.lpNorm<Eigen::Infinity>();
            if (it >= 200 && dn > 1e-10) {
                const double gt = (Ghat_.transpose() * du).lpNorm<Eigen::Infinity>();
                const double f0du = f0h.dot(du);
                if (gt <= cfg_.infeasibility_tol * dn && f0du > cfg_.infeasibility_tol * dn)
                    ++infeasible_hits;
                else
                    infeasible_hits = 0;
                if (infeasible_hits >= 3) {
                    out.status = SdpStatus::infeasible;
                    sigma_ = sigma;
                    return out;
                }
            }

            double ratio = prim_rel / std::max(dual_rel, 1e-300);
            if (ratio > 10.0 && sigma < 1e8) {
                sigma *= 2.0;
                st.u *= 0.5;
                kkt = factor(sigma);
            } else if (ratio < 0.1 && sigma > 1e-8) {
                sigma *= 0.5;
                st.u *= 2.0;
                kkt = factor(sigma);
            }
        }
        (void)d;
        sigma_ = sigma;
        return out;
    }

private:
    Vector f0hat() const {
        Vector f = f0_;
        for (Eigen::Index b = 0; b < blocks(); ++b) {
            const Eigen::Index dim = layout_.dim[b];
            const Eigen::Index off = layout_.offset[b];
            for (Eigen::Index i = 0; i < dim; ++i) f(off + i * dim + i) -= margin_[b];
            f.segment(off, dim * dim) *= E_(b);
        }
        return f;
    }

    void project(Vector& z) const {
        for (Eigen::Index b = 0; b < blocks(); ++b)
            project_block(z.segment(layout_.offset[b], layout_.dim[b] * layout_.dim[b]), layout_.dim[b]);
    }

    void equilibrate() {
        const Eigen::Index d = prob_.num_vars();
        const Eigen::Index nb = blocks();
        Matrix colmax(nb, d);
        for (Eigen::Index b = 0; b < nb; ++b)
            for (Eigen::Index j = 0; j < d; ++j)
                colmax(b, j) = G_.block(layout_.offset[b], j, layout_.dim[b] * layout_.dim[b], 1)
                                   .lpNorm<Eigen::Infinity>();
        D_ = Vector::Ones(d);
        E_ = Vector::Ones(nb);
        const Matrix& W = prob_.W();
        auto clamp = [](double v) { return std::clamp(v, 1e-4, 1e4); };
        // A block can be rescaled freely without changing its feasible set, so
        // its scale gets a much wider range than the variable scales.
        auto clamp_block = [](double v) { return std::clamp(v, 1e-14, 1e14); };
        for (int pass = 0; pass < 15; ++pass) {
            Vector cn(d);
            for (Eigen::Index j = 0; j < d; ++j) {
                double c = 0.0;
                for (Eigen::Index b = 0; b < nb; ++b) c = std::max(c, E_(b) * colmax(b, j) * D_(j));
                for (Eigen::Index i = 0; i < d; ++i) c = std::max(c, std::abs(D_(i) * W(i, j) * D_(j)));
                cn(j) = c;
            }
            Vector bn(nb);
            for (Eigen::Index b = 0; b < nb; ++b) {
                double c = 0.0;
                for (Eigen::Index j = 0; j < d; ++j) c = std::max(c, E_(b) * colmax(b, j) * D_(j));
                bn(b) = c;
            }
            for (Eigen::Index j = 0; j < d; ++j)
                if (cn(j) > 1e-12) D_(j) = clamp(D_(j) / std::sqrt(cn(j)));
            for (Eigen::Index b = 0; b < nb; ++b)
                if (bn(b) > 1e-300) E_(b) = clamp_block(E_(b) / std::sqrt(bn(b)));
        }
        Ghat_ = G_;
        for (Eigen::Index b = 0; b < nb; ++b)
            Ghat_.middleRows(layout_.offset[b], layout_.dim[b] * layout_.dim[b]) *= E_(b);
        Ghat_ = Ghat_ * D_.asDiagonal();

        const Matrix DWD = D_.asDiagonal() * W * D_.asDiagonal();
        const Vector Dw = D_.cwiseProduct(prob_.w());
        double mean_col = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) mean_col += DWD.col(j).lpNorm<Eigen::Infinity>();
        mean_col /= static_cast<double>(d);
        const double denom = std::max(mean_col, Dw.lpNorm<Eigen::Infinity>());
        cost_scale_ = denom > 1e-300 ? clamp_block(1.0 / denom) : 1.0;
        What_ = cost_scale_ * DWD;
        what_ = cost_scale_ * Dw;
    }

    const SdpProblem& prob_;
    const SdpConfig& cfg_;
    Layout layout_;
    Matrix G_;
    Vector f0_;
    Matrix Ghat_;
    Vector D_;
    Vector E_;
    Matrix What_;
    Vector what_;
    double cost_scale_ = 1.0;
    double sigma_ = 1.0;
    std::vector<double> margin_;

public:
    void set_sigma(double s) { sigma_ = s; }
};

}  // namespace

SdpSolution solve(const SdpProblem& prob, const SdpConfig& cfg, const std::optional<Vector>& warm_start) {
    if (!(cfg.feas_tol > 0.0) || cfg.max_iter < 1 || !(cfg.sigma > 0.0) || !(cfg.relaxation > 0.0) ||
        !(cfg.relaxation < 2.0) || cfg.check_interval < 1)
        throw ContractViolation("sdp solve: invalid configuration");
    if (warm_start && warm_start->size() != prob.num_vars())
        throw ContractViolation("sdp solve: warm start has wrong length");
    if (prob.lmis().empty()) throw ContractViolation("sdp solve: problem has no constraints");

    const auto& lmis = prob.lmis();
    Admm admm(prob, cfg);
    admm.set_sigma(cfg.sigma);
    if (cfg.trace) *cfg.trace << "attempt,iteration,primal_residual,dual_residual,sigma,objective\n";

    // Initial margins are relative to the block magnitudes at the warm start when
    // one is given, otherwise to the equilibrated block scale.
    auto& margin = admm.margins();
    for (std::size_t b = 0; b < lmis.size(); ++b) {
        if (!lmis[b].certify()) continue;
        double mag = 1.0 / admm.block_scale(b);
        if (warm_start) {
            const double nrm = lmis[b].evaluate(*warm_start).norm();
            if (nrm > 0.0) mag = nrm;
        }
        margin[b] = cfg.certification_margin * mag;
    }

    AdmmState st = admm.initial_state(warm_start);
    SdpSolution sol;
    int total = 0;
    for (int attempt = 0; attempt <= cfg.certification_retries; ++attempt) {
        const auto outcome = admm.run(st, cfg.max_iter, attempt);
        total += outcome.iterations;
        sol.y = admm.unscale_y(st.y);
        sol.status = outcome.status;
        sol.primal_residual = outcome.primal;
        sol.dual_residual = outcome.dual;
        bool all_ok = true;
        for (std::size_t b = 0; b < lmis.size(); ++b) {
            if (!lmis[b].certify()) continue;
            const Matrix M = lmis[b].evaluate(sol.y);
            if (!linalg::is_psd(M, linalg::certification_shift(M))) {
                all_ok = false;
                const double bump = cfg.certification_margin * std::pow(10.0, attempt + 1) *
                                    std::max(M.norm(), 1.0 / admm.block_scale(b) * 1e-3);
                margin[b] = std::max(2.0 * margin[b], bump);
            }
        }
        sol.certified = all_ok;
        if (outcome.status != SdpStatus::optimal) break;
        if (all_ok) break;
        sol.status = SdpStatus::max_iterations;
    }

    const Eigen::Index n = prob.n();
    sol.P = linalg::smat(sol.y.head(linalg::svec_size(n)), n);
    sol.rho = sol.y(prob.rho_index()) * prob.rho_unit();
    sol.s = prob.has_epigraph() ? sol.y(prob.s_index()) : 0.0;
    sol.objective_value = prob.objective(sol.y);
    sol.iterations = total;
    return sol;
}

}  // namespace safe_adp
