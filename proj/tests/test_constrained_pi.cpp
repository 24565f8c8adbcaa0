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
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "safe_adp/constrained_pi.hpp"
#include "safe_adp/errors.hpp"
#include "safe_adp/experiment.hpp"
#include "safe_adp/lqr.hpp"
#include "support.hpp"

namespace safe_adp {
namespace {

using test::gaussian_matrix;
using test::scalar;
using test::vec2;

Sample make_sample(long t, const Vector& x, const Matrix& K, const Vector& nu, const LinearSystem& sys) {
    Sample s;
    s.t = t;
    s.x = x;
    s.K = K;
    s.nu = nu;
    s.u = K * x + nu;
    s.x_next = step(sys, x, s.u);
    return s;
}

TEST(LambdaBound, Examples) {
    EXPECT_DOUBLE_EQ(compute_lambda_bound(2.0, 2.0, 8), 1.0);
    EXPECT_DOUBLE_EQ(compute_lambda_bound(1.0, 4.0, 2), 0.25);
    EXPECT_NEAR(compute_lambda_bound(1.0, 4.0, 8), std::sqrt(0.5), 1e-15);
}

TEST(AdpConfig, ValidateRejectsLambdaAtOrAboveBound) {
    AdpConfig cfg;
    cfg.p_min = 1.0;
    cfg.p_max = 4.0;
    cfg.lambda = 0.25;
    EXPECT_THROW(cfg.validate(LearningSchedule(2)), ContractViolation);
    cfg.lambda = 0.2499;
    EXPECT_NO_THROW(cfg.validate(LearningSchedule(2)));
    cfg.p_min = 5.0;
    EXPECT_THROW(cfg.validate(LearningSchedule(2)), ContractViolation);
}

TEST(LearningSchedule, Instants) {
    const LearningSchedule s(8);
    EXPECT_FALSE(s.is_learning_instant(0));
    EXPECT_FALSE(s.is_learning_instant(7));
    EXPECT_TRUE(s.is_learning_instant(8));
    EXPECT_TRUE(s.is_learning_instant(24));
    EXPECT_THROW(LearningSchedule(0), ContractViolation);
}

TEST(LearningBuffer, NominalQuantities) {
    const LinearSystem sys = test::two_state_system();
    Matrix K(1, 2);
    K << 0.3, -0.1;
    LearningBuffer buf(sys.B());
    buf.add(make_sample(0, vec2(0.5, 0.2), K, scalar(0.01).col(0), sys));
    EXPECT_LE((buf.nominal_successor(0) - sys.closed_loop(K) * vec2(0.5, 0.2)).norm(), 1e-15);
    EXPECT_LE((buf.nominal_input(0) - K * vec2(0.5, 0.2)).norm(), 1e-15);
}

TEST(PeCheck, ScalarDistinctMagnitudes) {
    LinearSystem sys(scalar(0.5), scalar(1.0));
    LearningBuffer buf(sys.B());
    buf.add(make_sample(0, scalar(1.0).col(0), scalar(0.0), scalar(0.0).col(0), sys));
    buf.add(make_sample(1, scalar(0.3).col(0), scalar(0.0), scalar(0.0).col(0), sys));
    EXPECT_TRUE(pe_check(buf));
}

TEST(PeCheck, CollinearStatesAreRankDeficient) {
    // Drift and gain chosen so that every successor stays on the same ray.
    LinearSystem sys(0.5 * Matrix::Identity(2, 2), Matrix::Identity(2, 1));
    const Matrix K = Matrix::Zero(1, 2);
    LearningBuffer buf(sys.B());
    for (int t = 0; t < 10; ++t)
        buf.add(make_sample(t, (1.0 + t) * vec2(1.0, 2.0), K, Vector::Zero(1), sys));
    EXPECT_FALSE(pe_check(buf));
    EXPECT_EQ(linalg::numerical_rank(pe_matrix(buf), 1e-8), 1);
}

TEST(PeCheck, MatchesSvdRankOracle) {
    std::mt19937_64 rng(4);
    for (Eigen::Index n = 2; n <= 4; ++n) {
        const LinearSystem sys = random_controllable_system(n, 1, {0.5, 0.9}, 10 + n);
        const Matrix K = Matrix::Zero(1, n);
        LearningBuffer full(sys.B());
        for (int t = 0; t < 20; ++t)
            full.add(make_sample(t, gaussian_matrix(rng, n, 1).col(0), K, gaussian_matrix(rng, 1, 1).col(0), sys));
        const Eigen::Index rank = Eigen::JacobiSVD<Matrix>(pe_matrix(full)).rank();
        EXPECT_EQ(rank, linalg::svec_size(n));
        EXPECT_TRUE(pe_check(full));

        LearningBuffer few(sys.B());
        for (int t = 0; t < linalg::svec_size(n) - 1; ++t)
            few.add(make_sample(t, gaussian_matrix(rng, n, 1).col(0), K, Vector::Zero(1), sys));
        EXPECT_LT(Eigen::JacobiSVD<Matrix>(pe_matrix(few)).rank(), linalg::svec_size(n));
        EXPECT_FALSE(pe_check(few));
    }
}

TEST(Evaluation, IdenticalStatesRaisePeError) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, cost).K_inf;
    LearningBuffer buf(sys.B());
    for (int t = 0; t < 8; ++t) buf.add(make_sample(t, vec2(0.2, 0.1), K, Vector::Zero(1), sys));
    AdpConfig cfg;
    cfg.p_min = 0.1;
    cfg.p_max = 10.0;
    cfg.lambda = 0.9;
    const Ellipsoid prev(Matrix::Identity(2, 2), 1.0);
    EXPECT_THROW(evaluate_policy_data_driven(buf, cost, ConstraintSet(2, 1), vec2(0.1, 0.1), K, cfg, prev), PeError);
}

TEST(Evaluation, ModelBasedWithInactiveConstraintsMatchesLyapunov) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, CostSpec(Matrix::Identity(2, 2), scalar(5.0))).K_inf;
    const Matrix P_ref = lyapunov_evaluate(sys, K, cost);
    AdpConfig cfg;
    cfg.p_min = 0.01;
    cfg.p_max = 100.0;
    cfg.lambda = 0.999;
    const ConstraintSet cs = ConstraintSet::box(2, 1, 1.0, 1.0).inflated(1e6);
    const Ellipsoid prev(P_ref, 1e6);
    const EvaluationResult r = evaluate_policy_model_based(sys, cost, cs, K, vec2(0.3, -0.2), cfg, prev);
    EXPECT_LE((r.ellipsoid.P - P_ref).norm(), 1e-4);
    EXPECT_TRUE(admissibility_check(r.ellipsoid, K, cs));
    EXPECT_TRUE(invariance_check(r.ellipsoid, sys, K, cfg.lambda));
}

TEST(Evaluation, ZeroStateIsFeasible) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, cost).K_inf;
    AdpConfig cfg;
    cfg.p_min = 0.01;
    cfg.p_max = 100.0;
    cfg.lambda = 0.99;
    const ConstraintSet cs = ConstraintSet::box(2, 1, 1.0, std::nullopt);
    const EvaluationResult r =
        evaluate_policy_model_based(sys, cost, cs, K, Vector::Zero(2), cfg, Ellipsoid(Matrix::Identity(2, 2), 1.0));
    EXPECT_GT(r.ellipsoid.rho, 0.0);
    EXPECT_TRUE(admissibility_check(r.ellipsoid, K, cs));
}

TEST(Evaluation, ImpossibleBoxCarriesPreviousEllipsoid) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, cost).K_inf;
    AdpConfig cfg;
    cfg.p_min = 0.5;
    cfg.p_max = 0.6;  // P_inf is far outside this box, the residual cannot vanish but stays feasible
    cfg.lambda = 0.2;  // below the squared closed-loop radius: contraction is impossible
    cfg.sdp.max_iter = 4000;
    const Ellipsoid prev(Matrix::Identity(2, 2) * 0.55, 0.01);
    try {
        evaluate_policy_model_based(sys, cost, ConstraintSet(2, 1), K, vec2(0.01, 0.0), cfg, prev);
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_EQ(e.previous().P, prev.P);
        EXPECT_EQ(e.previous().rho, prev.rho);
    }
}

TEST(IdealImprovement, Examples) {
    LinearSystem zero(Matrix::Zero(2, 2), Matrix::Identity(2, 1));
    EXPECT_LE(ideal_improvement(Matrix::Identity(2, 2), zero, CostSpec(Matrix::Identity(2, 2), scalar(1.0))).norm(),
              1e-15);
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution lqr = solve_dare(sys, cost);
    EXPECT_LE((ideal_improvement(lqr.P_inf, sys, cost) - lqr.K_inf).norm(), 1e-10);
    LinearSystem s1(scalar(0.5), scalar(1.0));
    EXPECT_NEAR(ideal_improvement(scalar(4.0 / 3.0), s1, CostSpec(scalar(1.0), scalar(1.0)))(0, 0), -2.0 / 7.0,
                1e-15);
}

TEST(Backtrack, AdmissibleTargetOrNoRowsReturnsTarget) {
    const Ellipsoid e(Matrix::Identity(2, 2), 1.0);
    Matrix Ks(1, 2);
    Ks << 5.0, -3.0;
    const BacktrackResult free = backtrack_policy(Ks, Matrix::Zero(1, 2), e, ConstraintSet(2, 1), 0.5);
    EXPECT_EQ(free.K, Ks);
    EXPECT_EQ(free.alpha, 1.0);
    ConstraintSet cs(2, 1);
    cs.add_row(vec2(0.5, 0.0), Vector::Zero(1));
    const BacktrackResult adm = backtrack_policy(Ks, Matrix::Zero(1, 2), e, cs, 0.5);
    EXPECT_EQ(adm.K, Ks);
    EXPECT_EQ(adm.iterations, 0);
}

TEST(Backtrack, AgreesWithBisectionOracle) {
    const Ellipsoid e(Matrix::Identity(2, 2), 1.0);
    ConstraintSet cs(2, 1);
    cs.add_row(vec2(1.0, 0.0), scalar(1.0).col(0));
    Matrix Kt(1, 2);
    Kt << -1.0, 0.0;  // row vector c + K^T d = 0: slack
    Matrix Ks(1, 2);
    Ks << 0.5, 0.5;   // row vector (1.5, 0.5): inadmissible
    for (double beta : {0.5, 0.7, 0.3}) {
        const BacktrackResult r = backtrack_policy(Ks, Kt, e, cs, beta);
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (admissibility_check(e, Kt + mid * (Ks - Kt), cs) ? lo : hi) = mid;
        }
        EXPECT_NEAR(lo, 1.0 / std::sqrt(2.5), 1e-9);
        EXPECT_LE(r.alpha, lo);
        EXPECT_GT(r.alpha / beta, lo);
        EXPECT_LE((r.K - (Kt + r.alpha * (Ks - Kt))).norm(), 1e-15);
    }
    EXPECT_THROW(backtrack_policy(Kt, Ks, e, cs, 0.5), PreconditionError);
    EXPECT_THROW(backtrack_policy(Ks, Kt, e, cs, 1.0), ContractViolation);
}

TEST(Backtrack, ExtraPredicateIsApplied) {
    const Ellipsoid e(Matrix::Identity(2, 2), 1.0);
    Matrix Ks(1, 2);
    Ks << 1.0, 0.0;
    const BacktrackResult r = backtrack_policy(Ks, Matrix::Zero(1, 2), e, ConstraintSet(2, 1), 0.5,
                                               [](const Matrix& K) { return K(0, 0) <= 0.2; });
    EXPECT_DOUBLE_EQ(r.alpha, 0.125);
}

TEST(Rls, GradientVanishesAtTheOptimum) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution lqr = solve_dare(sys, cost);
    const Vector x = vec2(0.4, -0.7);
    const RlsSample s{x, lqr.K_inf * x, sys.closed_loop(lqr.K_inf) * x};
    EXPECT_LE(rls_gradient(s, lqr.P_inf, cost, sys.B()).norm(), 1e-10);
    const RlsState st = rls_init(lqr.K_inf, 1e-4);
    RlsStepOptions opt;
    const RlsState next = rls_improvement_step(st, s, lqr.P_inf, cost, sys.B(), opt);
    EXPECT_LE((next.K - lqr.K_inf).norm(), 1e-6);
}

TEST(Rls, ZeroStateLeavesEverythingUnchanged) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    Matrix K(1, 2);
    K << 0.2, 0.1;
    const RlsState st = rls_init(K, 1e-4);
    const RlsSample s{Vector::Zero(2), Vector::Zero(1), Vector::Zero(2)};
    const RlsState next = rls_improvement_step(st, s, Matrix::Identity(2, 2), cost, sys.B(), RlsStepOptions{});
    EXPECT_EQ(next.H, st.H);
    EXPECT_EQ(next.H_inv, st.H_inv);
    EXPECT_TRUE(next.g.isZero());
    EXPECT_EQ(next.K, K);
}

TEST(Rls, ShermanMorrisonTracksDirectInverse) {
    const LinearSystem sys = random_controllable_system(3, 2, {0.8, 1.0}, 77);
    const CostSpec cost(Matrix::Identity(3, 3), 0.5 * Matrix::Identity(2, 2));
    const LqrSolution lqr = solve_dare(sys, cost);
    std::mt19937_64 rng(91);
    RlsState st = rls_init(lqr.K_inf, 1e-4);
    RlsStepOptions opt;
    opt.hessian_init_scale = 1e-4;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Vector x = gaussian_matrix(rng, 3, 1).col(0);
        const RlsSample s{x, st.K * x, sys.closed_loop(st.K) * x};
        st = rls_improvement_step(st, s, lqr.P_inf, cost, sys.B(), opt);
        const Matrix direct = st.H.inverse();
        worst = std::max(worst, (st.H_inv - direct).norm() / direct.norm());
    }
    EXPECT_EQ(st.resets, 0);
    EXPECT_LE(worst, 1e-8);
}

TEST(Rls, NewtonStepRecoversGreedyGainForExactData) {
    // With exact model data and a tiny initial Hessian, one step per direction
    // lands on the greedy gain for P_next.
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix P = 2.0 * Matrix::Identity(2, 2);
    const Matrix target = greedy_gain(sys, cost, P);
    Matrix K(1, 2);
    K << 0.0, 0.0;
    RlsState st = rls_init(K, 1e-10);
    RlsStepOptions opt;
    opt.hessian_init_scale = 1e-10;
    for (const Vector& x : {vec2(1.0, 0.0), vec2(0.0, 1.0), vec2(0.6, 0.8)}) {
        const RlsSample s{x, st.K * x, sys.closed_loop(st.K) * x};
        st = rls_improvement_step(st, s, P, cost, sys.B(), opt);
    }
    EXPECT_LE((st.K - target).norm(), 1e-6);
}

TEST(DriftEstimator, ExactOnceStatesSpan) {
    const LinearSystem sys = random_controllable_system(3, 2, {0.9, 1.1}, 5);
    DriftEstimator est(sys.B());
    std::mt19937_64 rng(6);
    for (int t = 0; t < 2; ++t) {
        const Vector x = gaussian_matrix(rng, 3, 1).col(0);
        const Vector u = gaussian_matrix(rng, 2, 1).col(0);
        est.add(x, u, step(sys, x, u));
    }
    EXPECT_FALSE(est.estimate().has_value());
    const Vector x = gaussian_matrix(rng, 3, 1).col(0);
    const Vector u = gaussian_matrix(rng, 2, 1).col(0);
    est.add(x, u, step(sys, x, u));
    ASSERT_TRUE(est.estimate().has_value());
    EXPECT_LE((*est.estimate() - sys.A()).norm(), 1e-10);
    EXPECT_EQ(est.size(), 3u);
    EXPECT_THROW(est.add(Vector::Zero(2), u, x), ContractViolation);
}

TEST(DriftEstimator, CollinearStatesGiveNoEstimate) {
    const LinearSystem sys = test::two_state_system();
    DriftEstimator est(sys.B());
    for (int t = 1; t <= 5; ++t) est.add(t * vec2(1, 1), Vector::Zero(1), step(sys, t * vec2(1, 1), Vector::Zero(1)));
    EXPECT_FALSE(est.estimate().has_value());
}

TEST(ConvergenceFloor, Examples) {
    LinearSystem sys(scalar(0.5), scalar(1.0));
    const CostSpec cost(scalar(1.0), scalar(1.0));
    const LqrSolution lqr = solve_dare(sys, cost);
    // |1 - (1 + k^2) / p| with the scalar DARE pair (p, k).
    EXPECT_NEAR(convergence_lambda_floor(lqr, cost), 0.05496003316413156, 1e-12);
    // Zero drift: P_inf = Q and K_inf = 0, so the inner matrix is the identity.
    LinearSystem dead(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
    const CostSpec c2(Matrix::Identity(2, 2) * 3.0, Matrix::Identity(2, 2));
    EXPECT_NEAR(convergence_lambda_floor(solve_dare(dead, c2), c2), 0.0, 1e-12);
}

TEST(ConvergenceFloor, TwoStatePlantWindowIsNonempty) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution lqr = solve_dare(sys, cost);
    const double floor = convergence_lambda_floor(lqr, cost);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(lqr.P_inf);
    const double bound_best = std::pow(es.eigenvalues().minCoeff() / es.eigenvalues().maxCoeff(), 2.0 / 8.0);
    EXPECT_LT(floor, bound_best);
}

TEST(BoxCheckTest, LiteralAndSpectral) {
    Matrix P = Matrix::Zero(2, 2);
    P(0, 0) = 1.0;
    P(1, 1) = 5.0;
    BoxCheck b = convergence_box_check(P, 0.5, 2.0);
    EXPECT_TRUE(b.literal);
    EXPECT_FALSE(b.spectral);
    b = convergence_box_check(P, 0.5, 6.0);
    EXPECT_TRUE(b.literal);
    EXPECT_TRUE(b.spectral);
    b = convergence_box_check(P, 1.5, 6.0);
    EXPECT_FALSE(b.literal);
    EXPECT_FALSE(b.spectral);
}

io::Json small_config() {
    return io::Json::parse(R"({
      "name": "unit", "mode": "data-driven", "seed": 1, "horizon": 40,
      "system": {"A": [[1.1387, 0.0491], [-0.8680, 0.9679]], "B": [[-0.5507], [0.0758]]},
      "cost": {"Q": 1.0, "R": 0.5},
      "constraints": {"state_bound": 1.0},
      "schedule": {"N": 8}
    })");
}

TEST(RunConstrainedAdp, StateOutsideInitialSetIsAPreconditionError) {
    PreparedEpisode prep = prepare_episode(parse_experiment_config(small_config()), 1);
    prep.spec.x0 *= 1.5;
    EXPECT_THROW(run_constrained_adp(prep.spec), PreconditionError);
}

TEST(RunConstrainedAdp, ZeroHorizonGivesEmptyLog) {
    PreparedEpisode prep = prepare_episode(parse_experiment_config(small_config()), 1);
    prep.spec.horizon = 0;
    const EpisodeLog log = run_constrained_adp(prep.spec);
    EXPECT_TRUE(log.steps.empty());
    EXPECT_EQ(log.ellipsoids.size(), 1u);
    EXPECT_EQ(log.x_final, prep.spec.x0);
}

TEST(RunConstrainedAdp, LearningInstantsAreMultiplesOfN) {
    const PreparedEpisode prep = prepare_episode(parse_experiment_config(small_config()), 1);
    const EpisodeLog log = run_constrained_adp(prep.spec);
    ASSERT_EQ(log.steps.size(), 40u);
    EXPECT_FALSE(log.learning_instants.empty());
    for (long t : log.learning_instants) EXPECT_EQ(t % 8, 0);
    EXPECT_LE(log.max_violation, 0.0);
    EXPECT_EQ(log.ellipsoid_exits, 0);
}

}  // namespace
}  // namespace safe_adp
