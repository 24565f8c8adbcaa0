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
#include "safe_adp/constrained_pi.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <sstream>

#include "safe_adp/errors.hpp"

namespace safe_adp {

LearningSchedule::LearningSchedule(int window) : N(window) {
    if (window < 1) throw ContractViolation("LearningSchedule: N must be >= 1");
}

double compute_lambda_bound(double p_min, double p_max, int N) {
    if (!(p_min > 0.0) || !(p_max >= p_min)) throw ContractViolation("compute_lambda_bound: need 0 < p_min <= p_max");
    if (N < 1) throw ContractViolation("compute_lambda_bound: N must be >= 1");
    return std::pow(p_min / p_max, 2.0 / static_cast<double>(N));
}

void AdpConfig::validate(const LearningSchedule& schedule) const {
    if (!(p_min > 0.0) || !(p_max >= p_min) || !std::isfinite(p_max))
        throw ContractViolation("AdpConfig: need 0 < p_min <= p_max < inf");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ContractViolation("AdpConfig: lambda must lie in (0, 1)");
    const double bound = compute_lambda_bound(p_min, p_max, schedule.N);
    if (!(lambda < bound)) {
        std::ostringstream os;
        os << "AdpConfig: lambda = " << lambda << " violates lambda < (p_min/p_max)^(2/N) = " << bound;
        throw ContractViolation(os.str());
    }
    if (!(rho_weight >= 0.0)) throw ContractViolation("AdpConfig: rho_weight must be >= 0");
    if (!(beta > 0.0 && beta < 1.0)) throw ContractViolation("AdpConfig: beta must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ContractViolation("AdpConfig: epsilon must be > 0");
    if (!(hessian_init_scale > 0.0)) throw ContractViolation("AdpConfig: hessian_init_scale must be > 0");
    if (!(step_size > 0.0)) throw ContractViolation("AdpConfig: step_size must be > 0");
    if (!(rho_min > 0.0)) throw ContractViolation("AdpConfig: rho_min must be > 0");
}

LearningBuffer::LearningBuffer(Matrix B) : B_(std::move(B)) {}

void LearningBuffer::add(Sample s) {
    const Eigen::Index n = B_.rows();
    const Eigen::Index m = B_.cols();
    if (s.x.size() != n || s.x_next.size() != n || s.u.size() != m || s.nu.size() != m || s.K.rows() != m ||
        s.K.cols() != n)
        throw ContractViolation("LearningBuffer::add: sample dimensions do not match B");
    samples_.push_back(std::move(s));
}

Vector LearningBuffer::nominal_successor(std::size_t i) const {
    const Sample& s = samples_.at(i);
    return s.x_next - B_ * s.nu;
}

Vector LearningBuffer::nominal_input(std::size_t i) const {
    const Sample& s = samples_.at(i);
    return s.K * s.x;
}

namespace {

// svec coordinates of the linear functional P -> <M, P>.
Vector trace_coefficients(const Matrix& M) {
    const Eigen::Index n = M.rows();
    Vector a(linalg::svec_size(n));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i <= j; ++i, ++k) a(k) = (i == j) ? M(i, i) : M(i, j) + M(j, i);
    return a;
}

// Closed-loop constraint rows with zero rows dropped and +-v duplicates merged.
std::vector<Vector> distinct_rows(const ConstraintSet& cs, const Matrix& K) {
    std::vector<Vector> out;
    for (const Vector& v : closed_loop_rows(cs, K)) {
        const double nv = v.norm();
        if (!(nv > 0.0)) continue;
        bool dup = false;
        for (const Vector& w : out)
            if ((v - w).norm() <= 1e-12 * nv || (v + w).norm() <= 1e-12 * nv) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(v);
    }
    return out;
}

// Natural scale of rho for the closed-loop rows: the admissible level of the
// identity matrix.
double rho_unit(const ConstraintSet& cs, const Matrix& K) {
    double worst = 0.0;
    for (const Vector& v : distinct_rows(cs, K)) worst = std::max(worst, v.squaredNorm());
    return worst > 0.0 ? 1.0 / worst : 1.0;
}

void add_common_constraints(SdpProblem& prob, const ConstraintSet& cs, const Matrix& K, const Vector& x,
                            const AdpConfig& cfg) {
    const Eigen::Index n = prob.n();
    const Matrix I = Matrix::Identity(n, n);

    Lmi member = prob.new_lmi(1, "membership");
    member.rho_term(Matrix::Ones(1, 1)).congruence(Matrix(x), -1.0);
    prob.add_lmi(std::move(member));

    int idx = 0;
    for (const Vector& v : distinct_rows(cs, K)) {
        Lmi adm = prob.new_lmi(n, "admissibility_" + std::to_string(idx++));
        adm.congruence(I).rho_term(-v * v.transpose());
        prob.add_lmi(std::move(adm));
    }

    Lmi lo = prob.new_lmi(n, "box_lower");
    lo.congruence(I).constant(-cfg.p_min * I);
    prob.add_lmi(std::move(lo));
    Lmi hi = prob.new_lmi(n, "box_upper");
    hi.congruence(I, -1.0).constant(cfg.p_max * I);
    prob.add_lmi(std::move(hi));

    Vector a = Vector::Zero(prob.num_vars());
    a(prob.rho_index()) = 1.0;
    prob.add_scalar(a, -cfg.rho_min, "rho_min");
}

EvaluationResult finalize(const SdpProblem& prob, const SdpConfig& sdp_cfg, const std::optional<Vector>& warm,
                          const ConstraintSet& cs, const Matrix& K, const Vector& x, const Ellipsoid& previous,
                          const char* who) {
    SdpSolution sol = solve(prob, sdp_cfg, warm);
    // An iterate that stopped at the iteration cap is still usable when every
    // certified block holds; optimality only affects the convergence rate.
    const bool usable = sol.status == SdpStatus::optimal ||
                        (sol.status == SdpStatus::max_iterations && sol.certified);
    if (!usable)
        throw EvaluationError(std::string(who) + ": SDP returned status " + to_string(sol.status), previous,
                              sol.status);
    const Matrix P = linalg::symmetrize(sol.P);
    if (Eigen::LLT<Matrix>(P).info() != Eigen::Success)
        throw EvaluationError(std::string(who) + ": SDP solution is not positive definite", previous,
                              SdpStatus::max_iterations);

    // rho enters only through admissibility and membership, so it is raised to
    // the largest admissible level.
    const double level = max_admissible_level(P, K, cs);
    double rho = std::isfinite(level) ? (1.0 - 1e-9) * level : std::max(sol.rho, x.dot(P * x));
    rho = std::max(rho, x.dot(P * x));
    if (!(rho > 0.0)) rho = std::max(sol.rho, 1e-300);
    Ellipsoid e(P, rho);
    if (!admissibility_check(e, K, cs) || !contains(e, x))
        throw EvaluationError(std::string(who) + ": solution failed certification", previous,
                              SdpStatus::max_iterations);
    return {std::move(e), std::move(sol)};
}

}  // namespace

Matrix pe_matrix(const LearningBuffer& buffer) {
    if (buffer.empty()) throw ContractViolation("pe_matrix: buffer is empty");
    const Eigen::Index n = buffer.B().rows();
    Matrix D(static_cast<Eigen::Index>(buffer.size()), linalg::svec_size(n));
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const Sample& s = buffer.samples()[i];
        const Matrix M = s.x * s.x.transpose() - s.x_next * s.x_next.transpose();
        D.row(static_cast<Eigen::Index>(i)) = trace_coefficients(M).transpose();
    }
    return D;
}

bool pe_check(const LearningBuffer& buffer) {
    const Eigen::Index n = buffer.B().rows();
    return linalg::numerical_rank(pe_matrix(buffer), 1e-8) == linalg::svec_size(n);
}

SdpProblem build_model_based_problem(const LinearSystem& sys, const CostSpec& cost, const ConstraintSet& cs,
                                     const Matrix& K, const Vector& x, const AdpConfig& cfg) {
    const Eigen::Index n = sys.n();
    if (x.size() != n) throw ContractViolation("build_model_based_problem: x has wrong length");
    const Matrix I = Matrix::Identity(n, n);
    const Matrix Acl = sys.closed_loop(K);
    const Matrix stage = cost.Q + K.transpose() * cost.R * K;

    SdpProblem prob(n, true, rho_unit(cs, K));
    // -s I <= Acl^T P Acl - P + stage <= s I
    Lmi upper = prob.new_lmi(n, "residual_upper", false);
    upper.s_term(I).constant(-stage).congruence(Acl, -1.0).congruence(I, 1.0);
    prob.add_lmi(std::move(upper));
    Lmi lower = prob.new_lmi(n, "residual_lower", false);
    lower.s_term(I).constant(stage).congruence(Acl, 1.0).congruence(I, -1.0);
    prob.add_lmi(std::move(lower));

    Lmi contraction = prob.new_lmi(n, "contraction");
    contraction.congruence(I, cfg.lambda).congruence(Acl, -1.0);
    prob.add_lmi(std::move(contraction));

    add_common_constraints(prob, cs, K, x, cfg);
    prob.add_linear(prob.s_index(), 1.0);
    return prob;
}

SdpProblem build_data_driven_problem(const LearningBuffer& buffer, const CostSpec& cost, const ConstraintSet& cs,
                                     const Vector& x_end, const Matrix& K, const AdpConfig& cfg,
                                     const std::optional<Matrix>& identified_drift) {
    const Eigen::Index n = buffer.B().rows();
    if (x_end.size() != n) throw ContractViolation("build_data_driven_problem: x_end has wrong length");
    SdpProblem prob(n, false, rho_unit(cs, K));

    double scale = 0.0;
    std::size_t used = 0;
    for (const Sample& s : buffer.samples()) {
        const double nx = s.x.squaredNorm();
        if (nx > 0.0) {
            scale += nx * nx;
            ++used;
        }
    }
    if (used == 0) throw PeError("build_data_driven_problem: no sample with a nonzero state");
    scale /= static_cast<double>(used);

    for (std::size_t i = 0; i < buffer.size(); ++i) {
        const Sample& s = buffer.samples()[i];
        if (!(s.x.squaredNorm() > 0.0)) continue;
        const Vector xt = buffer.nominal_successor(i);
        const Vector ut = buffer.nominal_input(i);
        const Vector a = prob.trace_coefficients(xt * xt.transpose() - s.x * s.x.transpose());
        const double b = s.x.dot(cost.Q * s.x) + ut.dot(cost.R * ut);
        prob.add_squared_affine(a, b, 1.0 / scale);

        Lmi row = prob.new_lmi(1, "data_" + std::to_string(s.t));
        row.congruence(Matrix(s.x), cfg.lambda).congruence(Matrix(xt), -1.0);
        prob.add_lmi(std::move(row));
    }

    if (identified_drift) {
        if (identified_drift->rows() != n || identified_drift->cols() != n)
            throw ContractViolation("build_data_driven_problem: identified drift must be n x n");
        const Matrix Acl = *identified_drift + buffer.B() * K;
        const Matrix I = Matrix::Identity(n, n);
        Lmi contraction = prob.new_lmi(n, "contraction");
        contraction.congruence(I, cfg.lambda).congruence(Acl, -1.0);
        prob.add_lmi(std::move(contraction));
    }

    add_common_constraints(prob, cs, K, x_end, cfg);
    if (!distinct_rows(cs, K).empty()) prob.add_linear(prob.rho_index(), -cfg.rho_weight);
    return prob;
}

EvaluationResult evaluate_policy_model_based(const LinearSystem& sys, const CostSpec& cost, const ConstraintSet& cs,
                                             const Matrix& K, const Vector& x, const AdpConfig& cfg,
                                             const Ellipsoid& previous) {
    if (!x.allFinite()) throw ContractViolation("evaluate_policy_model_based: x is not finite");
    const SdpProblem prob = build_model_based_problem(sys, cost, cs, K, x, cfg);
    const Matrix Acl = sys.closed_loop(K);
    const Matrix J = Acl.transpose() * previous.P * Acl - previous.P + cost.Q + K.transpose() * cost.R * K;
    const double s0 = linalg::max_singular_value(linalg::symmetrize(J));
    EvaluationResult r = finalize(prob, cfg.sdp, prob.pack(previous.P, previous.rho, s0), cs, K, x, previous,
                                  "evaluate_policy_model_based");
    if (!invariance_check(r.ellipsoid, sys, K, cfg.lambda))
        throw EvaluationError("evaluate_policy_model_based: contraction certificate failed", previous,
                              SdpStatus::max_iterations);
    return r;
}

EvaluationResult evaluate_policy_data_driven(const LearningBuffer& buffer, const CostSpec& cost,
                                             const ConstraintSet& cs, const Vector& x_end, const Matrix& K,
                                             const AdpConfig& cfg, const Ellipsoid& previous,
                                             const std::optional<Matrix>& identified_drift) {
    if (buffer.empty() || !pe_check(buffer))
        throw PeError("evaluate_policy_data_driven: buffer is not persistently exciting");
    const SdpProblem prob = build_data_driven_problem(buffer, cost, cs, x_end, K, cfg, identified_drift);
    EvaluationResult r = finalize(prob, cfg.sdp, prob.pack(previous.P, previous.rho), cs, K, x_end, previous,
                                  "evaluate_policy_data_driven");
    if (identified_drift && !invariance_check(r.ellipsoid, LinearSystem(*identified_drift, buffer.B()), K, cfg.lambda))
        throw EvaluationError("evaluate_policy_data_driven: contraction certificate failed", previous,
                              SdpStatus::max_iterations);
    return r;
}

Matrix ideal_improvement(const Matrix& P_next, const LinearSystem& sys, const CostSpec& cost) {
    return greedy_gain(sys, cost, P_next);
}

BacktrackResult backtrack_policy(const Matrix& K_star, const Matrix& K_t, const Ellipsoid& e, const ConstraintSet& cs,
                                 double beta, const std::function<bool(const Matrix&)>& extra) {
    if (K_star.rows() != K_t.rows() || K_star.cols() != K_t.cols())
        throw ContractViolation("backtrack_policy: gain dimensions differ");
    if (!(beta > 0.0 && beta < 1.0)) throw ContractViolation("backtrack_policy: beta must lie in (0, 1)");
    auto ok = [&](const Matrix& K) { return admissibility_check(e, K, cs) && (!extra || extra(K)); };
    if (!ok(K_t)) throw PreconditionError("backtrack_policy: the incumbent gain is not admissible");

    constexpr int kMaxIter = 100;
    double alpha = 1.0;
    const Matrix step = K_star - K_t;
    for (int it = 0; it < kMaxIter; ++it) {
        Matrix K = K_t + alpha * step;
        if (ok(K)) return {std::move(K), alpha, it};
        alpha *= beta;
    }
    return {K_t, 0.0, kMaxIter};
}

RlsState rls_init(const Matrix& K, double hessian_init_scale) {
    if (!(hessian_init_scale > 0.0)) throw ContractViolation("rls_init: scale must be > 0");
    const Eigen::Index d = K.size();
    RlsState s;
    s.H = hessian_init_scale * Matrix::Identity(d, d);
    s.H_inv = Matrix::Identity(d, d) / hessian_init_scale;
    s.g = Vector::Zero(d);
    s.K = K;
    return s;
}

Vector rls_gradient(const RlsSample& s, const Matrix& P_next, const CostSpec& cost, const Matrix& B) {
    const Vector inner = cost.R * s.u_nominal + B.transpose() * P_next * s.x_next_nominal;
    return linalg::kron(s.x, inner);
}

namespace {

// Rank-one Sherman-Morrison updates of H_inv for H += sum_k (x (x) l_k)(x (x) l_k)^T.
bool sherman_morrison(Matrix& H_inv, const Vector& x, const Matrix& L) {
    for (Eigen::Index k = 0; k < L.cols(); ++k) {
        const Vector u = linalg::kron(x, L.col(k));
        const Vector Hu = H_inv * u;
        const double den = 1.0 + u.dot(Hu);
        if (!(den > 0.0) || !std::isfinite(den)) return false;
        H_inv -= (Hu * Hu.transpose()) / den;
    }
    H_inv = linalg::symmetrize(H_inv);
    return H_inv.allFinite();
}

}  // namespace

RlsState rls_improvement_step(const RlsState& state, const RlsSample& sample, const Matrix& P_next,
                              const CostSpec& cost, const Matrix& B, const RlsStepOptions& opt) {
    const Eigen::Index n = B.rows();
    const Eigen::Index m = B.cols();
    if (sample.x.size() != n || sample.x_next_nominal.size() != n || sample.u_nominal.size() != m)
        throw ContractViolation("rls_improvement_step: sample dimensions");
    if (state.K.rows() != m || state.K.cols() != n) throw ContractViolation("rls_improvement_step: K must be m x n");

    RlsState next = state;
    const Matrix M = cost.R + B.transpose() * P_next * B;
    Eigen::LLT<Matrix> llt(linalg::symmetrize(M));
    if (llt.info() != Eigen::Success) throw ContractViolation("rls_improvement_step: R + B'PB is not positive definite");
    const Matrix L = llt.matrixL();

    next.H += linalg::kron(sample.x * sample.x.transpose(), M);
    if (!sherman_morrison(next.H_inv, sample.x, L)) {
        next.H = opt.hessian_init_scale * Matrix::Identity(n * m, n * m);
        next.H_inv = Matrix::Identity(n * m, n * m) / opt.hessian_init_scale;
        next.H += linalg::kron(sample.x * sample.x.transpose(), M);
        if (!sherman_morrison(next.H_inv, sample.x, L)) next.H_inv = next.H.ldlt().solve(Matrix::Identity(n * m, n * m));
        ++next.resets;
    }

    next.g = rls_gradient(sample, P_next, cost, B);
    const Vector vk = linalg::vec(state.K) - opt.step_size * (next.H_inv * next.g);
    Matrix candidate = linalg::unvec(vk, m, n);
    if (opt.accept && !opt.accept(state.K)) {
        const bool admissible =
            !(opt.ellipsoid && opt.constraints) || admissibility_check(*opt.ellipsoid, candidate, *opt.constraints);
        next.K = (admissible && opt.accept(candidate)) ? std::move(candidate) : state.K;
    } else if (opt.ellipsoid && opt.constraints)
        next.K = backtrack_policy(candidate, state.K, *opt.ellipsoid, *opt.constraints, opt.beta, opt.accept).K;
    else if (opt.accept && !opt.accept(candidate))
        next.K = state.K;
    else
        next.K = std::move(candidate);
    if (opt.accept && next.K == state.K) {
        // A fully rejected step leaves the curvature untouched, so the step
        // length is not consumed by samples that could not be used.
        next.H = state.H;
        next.H_inv = state.H_inv;
        next.resets = state.resets;
    }
    return next;
}

DriftEstimator::DriftEstimator(Matrix B) : B_(std::move(B)) {
    xx_ = Matrix::Zero(B_.rows(), B_.rows());
    zx_ = Matrix::Zero(B_.rows(), B_.rows());
}

void DriftEstimator::add(const Vector& x, const Vector& u, const Vector& x_next) {
    if (x.size() != B_.rows() || x_next.size() != B_.rows() || u.size() != B_.cols())
        throw ContractViolation("DriftEstimator::add: dimension mismatch");
    xx_ += x * x.transpose();
    zx_ += (x_next - B_ * u) * x.transpose();
    ++count_;
}

std::optional<Matrix> DriftEstimator::estimate() const {
    const Eigen::Index n = B_.rows();
    if (count_ < static_cast<std::size_t>(n)) return std::nullopt;
    Eigen::SelfAdjointEigenSolver<Matrix> es(xx_, Eigen::EigenvaluesOnly);
    const double hi = es.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * hi) return std::nullopt;
    return Matrix(xx_.ldlt().solve(zx_.transpose()).transpose());
}

double convergence_lambda_floor(const LqrSolution& lqr, const CostSpec& cost) {
    const Eigen::Index n = lqr.P_inf.rows();
    const Matrix Pis = linalg::inverse_sqrt_spd(lqr.P_inf);
    const Matrix stage = cost.Q + lqr.K_inf.transpose() * cost.R * lqr.K_inf;
    return linalg::max_singular_value(Matrix::Identity(n, n) - Pis * stage * Pis);
}

BoxCheck convergence_box_check(const Matrix& P_inf, double p_min, double p_max) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::symmetrize(P_inf), Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return {p_min <= lo && lo <= p_max, p_min <= lo && hi <= p_max};
}

EpisodeLog run_constrained_adp(const EpisodeSpec& spec) {
    const LinearSystem& sys = spec.sys;
    const Eigen::Index n = sys.n();
    const Eigen::Index m = sys.m();
    const AdpConfig& cfg = spec.cfg;
    cfg.validate(spec.schedule);
    if (spec.horizon < 0) throw ContractViolation("run_constrained_adp: horizon must be >= 0");
    if (spec.x0.size() != n || spec.K0.rows() != m || spec.K0.cols() != n || spec.cais0.n() != n)
        throw ContractViolation("run_constrained_adp: dimension mismatch");
    if (!(spec.cais0_contraction >= 0.0) || !std::isfinite(spec.cais0_contraction))
        throw ContractViolation("run_constrained_adp: cais0_contraction must be finite and >= 0");
    if (!contains(spec.cais0, spec.x0)) throw PreconditionError("run_constrained_adp: x0 is not in the initial CAIS");
    if (!admissibility_check(spec.cais0, spec.K0, spec.design_constraints))
        throw PreconditionError("run_constrained_adp: K0 is not admissible for the initial CAIS");

    const bool data_driven = spec.mode == EvaluationMode::data_driven;
    EpisodeLog log;
    log.ellipsoids.push_back(spec.cais0);
    log.steps.reserve(static_cast<std::size_t>(spec.horizon));

    Ellipsoid e = spec.cais0;
    int eid = 0;
    Matrix K = spec.K0;
    Vector x = spec.x0;
    NoiseSource noise(spec.noise);
    LearningBuffer buffer(sys.B());
    RlsState rls = rls_init(K, cfg.hessian_init_scale);
    int resets = 0;
    DriftEstimator drift(sys.B());

    for (long t = 0; t < spec.horizon; ++t) {
        const Vector nu = data_driven ? noise.sample(m) : Vector(Vector::Zero(m));
        const Vector u = K * x + nu;

        StepRecord rec;
        rec.t = t;
        rec.x = x;
        rec.u = u;
        rec.nu = nu;
        rec.K = K;
        rec.ellipsoid_id = eid;
        rec.value = e.value(x);
        rec.max_violation = spec.constraints.max_violation(x, u);
        if (spec.K_reference) rec.policy_error = linalg::max_singular_value(K - *spec.K_reference);
        log.max_violation = (t == 0) ? rec.max_violation : std::max(log.max_violation, rec.max_violation);
        if (rec.value > e.rho * (1.0 + 1e-9)) ++log.ellipsoid_exits;
        if (rec.max_violation > 1e-9) {
            std::ostringstream os;
            os << "constraint violated at t = " << t << " by " << rec.max_violation;
            log.steps.push_back(rec);
            throw SafetyViolation(os.str(), t, rec.max_violation);
        }

        const Vector x_next = step(sys, x, u);
        const bool instant = spec.schedule.is_learning_instant(t + 1);

        if (data_driven) {
            const RlsSample rs{x, K * x, x_next - sys.B() * nu};
            drift.add(x, u, x_next);
            const Vector g = rls_gradient(rs, e.P, spec.cost, sys.B());
            const double threshold = cfg.gate == GateMode::relative ? cfg.epsilon * x.squaredNorm() : cfg.epsilon;
            rec.gated = g.norm() <= threshold;
            if (rec.gated) buffer.add(Sample{t, x, u, K, nu, x_next});

            if (instant) {
                LearningEvent ev;
                ev.t = t + 1;
                ev.samples = buffer.size();
                ev.pe_passed = !buffer.empty() && pe_check(buffer);
                if (!ev.pe_passed) {
                    ev.status = "pe-failed";
                } else {
                    try {
                        std::optional<Matrix> drift_now;
                        if (cfg.lookahead_guard) drift_now = drift.estimate();
                        EvaluationResult r = evaluate_policy_data_driven(buffer, spec.cost, spec.design_constraints,
                                                                         x_next, K, cfg, e, drift_now);
                        e = r.ellipsoid;
                        eid = static_cast<int>(log.ellipsoids.size());
                        log.ellipsoids.push_back(e);
                        log.learning_instants.push_back(t + 1);
                        buffer.clear();
                        resets += rls.resets;
                        rls = rls_init(K, cfg.hessian_init_scale);
                        ev.success = true;
                        ev.status = to_string(r.sdp.status);
                        ev.sdp_iterations = r.sdp.iterations;
                        ev.ellipsoid_id = eid;
                    } catch (const EvaluationError& err) {
                        ev.status = to_string(err.status());
                    }
                }
                log.events.push_back(ev);
            }

            RlsStepOptions opt;
            opt.step_size = cfg.step_size;
            opt.beta = cfg.beta;
            opt.hessian_init_scale = cfg.hessian_init_scale;
            opt.ellipsoid = &e;
            opt.constraints = &spec.design_constraints;
            std::optional<Matrix> A_hat;
            double noise_radius = 0.0;
            if (cfg.lookahead_guard) {
                A_hat = drift.estimate();
                for (Eigen::Index j = 0; j < m; ++j)
                    noise_radius += std::sqrt(std::max(0.0, e.value(sys.B().col(j))));
                noise_radius *= spec.noise.amplitude;
                opt.accept = [&](const Matrix& Kc) {
                    if (A_hat) {
                        const LinearSystem identified(*A_hat, sys.B());
                        const Vector predicted = identified.closed_loop(Kc) * x_next;
                        return std::sqrt(e.value(predicted)) + noise_radius <= std::sqrt(e.rho) &&
                               (eid == 0 || invariance_check(e, identified, Kc, cfg.lambda));
                    }
                    if (eid != 0) return Kc == K;
                    // Before identification: the successor under Kc is the K0 successor,
                    // which contracts by cais0_contraction, plus B (Kc - K0) x.
                    const Vector shift = sys.B() * ((Kc - spec.K0) * x_next);
                    const double bound = std::sqrt(spec.cais0_contraction * e.value(x_next)) +
                                         std::sqrt(e.value(shift)) + noise_radius;
                    return bound <= std::sqrt(e.rho);
                };
            }
            rls.K = K;
            rls = rls_improvement_step(rls, rs, e.P, spec.cost, sys.B(), opt);
            K = rls.K;
            if (!invariance_check(e, sys, K, cfg.lambda)) ++log.contraction_violations;
        } else if (instant) {
            LearningEvent ev;
            ev.t = t + 1;
            ev.pe_passed = true;
            try {
                EvaluationResult r =
                    evaluate_policy_model_based(sys, spec.cost, spec.design_constraints, K, x_next, cfg, e);
                const Matrix K_star = ideal_improvement(r.ellipsoid.P, sys, spec.cost);
                const Ellipsoid& en = r.ellipsoid;
                const BacktrackResult br = backtrack_policy(
                    K_star, K, en, spec.design_constraints, cfg.beta,
                    [&](const Matrix& Kc) { return invariance_check(en, sys, Kc, cfg.lambda); });
                e = r.ellipsoid;
                K = br.K;
                eid = static_cast<int>(log.ellipsoids.size());
                log.ellipsoids.push_back(e);
                log.learning_instants.push_back(t + 1);
                ev.success = true;
                ev.status = to_string(r.sdp.status);
                ev.sdp_iterations = r.sdp.iterations;
                ev.ellipsoid_id = eid;
            } catch (const EvaluationError& err) {
                ev.status = to_string(err.status());
            }
            log.events.push_back(ev);
            if (!invariance_check(e, sys, K, cfg.lambda)) ++log.contraction_violations;
        }

        log.steps.push_back(std::move(rec));
        x = x_next;
    }

    log.x_final = x;
    log.K_final = K;
    log.hessian_resets = resets + rls.resets;
    return log;
}

DecreaseReport check_value_decrease(const EpisodeLog& log, const LinearSystem& sys, const AdpConfig& cfg, double rel_tol) {
    DecreaseReport rep;
    for (const StepRecord& s : log.steps) {
        ++rep.states_checked;
        const Ellipsoid& e = log.ellipsoids.at(static_cast<std::size_t>(s.ellipsoid_id));
        if (s.value > e.rho * (1.0 + rel_tol)) ++rep.states_outside;
    }

    const Eigen::Index n = sys.n();
    const Matrix I = Matrix::Identity(n, n);
    std::vector<const Matrix*> in_box;
    for (std::size_t j = 1; j < log.ellipsoids.size(); ++j) {
        const Matrix& P = log.ellipsoids[j].P;
        const double shift = linalg::certification_shift(P);
        if (linalg::is_psd(P - cfg.p_min * I, shift) && linalg::is_psd(cfg.p_max * I - P, shift))
            in_box.push_back(&P);
    }

    const auto& inst = log.learning_instants;
    for (std::size_t i = 0; i + 1 < inst.size(); ++i) {
        const long ta = inst[i];
        const long tb = inst[i + 1];
        if (tb > static_cast<long>(log.steps.size())) break;
        const Vector& x_start = log.steps[static_cast<std::size_t>(ta)].x;
        Vector x_end = x_start;
        for (long t = ta; t < tb; ++t) x_end = sys.closed_loop(log.steps[static_cast<std::size_t>(t)].K) * x_end;
        ++rep.cycles_checked;
        for (const Matrix* P : in_box) {
            const double v0 = x_start.dot(*P * x_start);
            if (!(v0 > 1e-250)) continue;
            const double v1 = x_end.dot(*P * x_end);
            ++rep.decrease_checks;
            rep.worst_ratio = std::max(rep.worst_ratio, v1 / v0);
            if (!(v1 < v0 * (1.0 + rel_tol))) ++rep.decrease_failures;
        }
    }
    return rep;
}

}  // namespace safe_adp
