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

#include "safe_adp/constrained_pi.hpp"
#include "safe_adp/constraints.hpp"
#include "safe_adp/errors.hpp"
#include "safe_adp/lqr.hpp"
#include "support.hpp"

namespace safe_adp {
namespace {

using test::scalar;
using test::vec2;

Matrix diag2(double a, double b) {
    Matrix M = Matrix::Zero(2, 2);
    M(0, 0) = a;
    M(1, 1) = b;
    return M;
}

TEST(ConstraintSet, BoxRowsAndViolation) {
    const ConstraintSet cs = ConstraintSet::box(2, 1, 1.0, 2.0);
    ASSERT_EQ(cs.size(), 6u);
    EXPECT_DOUBLE_EQ(cs.max_violation(vec2(0.5, -0.25), scalar(1.0).col(0)), -0.5);
    EXPECT_DOUBLE_EQ(cs.max_violation(vec2(1.5, 0.0), Vector::Zero(1)), 0.5);
    EXPECT_DOUBLE_EQ(ConstraintSet(2, 1).max_violation(vec2(9, 9), Vector::Zero(1)), -1.0);
    EXPECT_THROW(ConstraintSet::box(2, 1, -1.0, std::nullopt), ContractViolation);
}

TEST(ConstraintSet, GeneralRowsAreNormalised) {
    ConstraintSet cs(2, 1);
    cs.add_general(vec2(2.0, 0.0), scalar(4.0).col(0), 2.0);
    EXPECT_DOUBLE_EQ(cs.rows()[0].c(0), 1.0);
    EXPECT_DOUBLE_EQ(cs.rows()[0].d(0), 2.0);
    EXPECT_THROW(cs.add_general(vec2(1, 0), Vector::Zero(1), 0.0), ContractViolation);
    EXPECT_THROW(cs.add_general(vec2(1, 0), Vector::Zero(1), -1.0), ContractViolation);
    EXPECT_THROW(cs.add_row(Vector::Zero(3), Vector::Zero(1)), ContractViolation);
}

TEST(ConstraintSet, InflateAndTighten) {
    const ConstraintSet cs = ConstraintSet::box(1, 1, 1.0, 1.0);
    const ConstraintSet loose = cs.inflated(1e6);
    EXPECT_DOUBLE_EQ(loose.rows()[0].c(0), 1e-6);
    const ConstraintSet tight = cs.tightened_for_input_noise(0.2);
    EXPECT_DOUBLE_EQ(tight.rows()[2].d(0), 1.25);
    EXPECT_DOUBLE_EQ(tight.rows()[0].c(0), 1.0);
    EXPECT_THROW(cs.tightened_for_input_noise(1.0), ContractViolation);
}

TEST(Ellipsoid, Contains) {
    EXPECT_TRUE(contains(Ellipsoid(Matrix::Identity(2, 2), 1.0), vec2(0, 0)));
    EXPECT_FALSE(contains(Ellipsoid(Matrix::Identity(2, 2), 1.0), vec2(1, 1)));
    EXPECT_TRUE(contains(Ellipsoid(diag2(4, 1), 4.0), vec2(1, 0)));
    EXPECT_THROW(contains(Ellipsoid(Matrix::Identity(2, 2), 1.0), Vector::Zero(3)), ContractViolation);
    EXPECT_THROW(Ellipsoid(diag2(1, -1), 1.0), ContractViolation);
    EXPECT_THROW(Ellipsoid(Matrix::Identity(2, 2), 0.0), ContractViolation);
}

TEST(Admissibility, UnitRowIsTight) {
    ConstraintSet cs(2, 1);
    cs.add_row(vec2(1, 0), Vector::Zero(1));
    Matrix K(1, 2);
    K << 3.0, -7.0;
    EXPECT_TRUE(admissibility_check(Ellipsoid(Matrix::Identity(2, 2), 1.0), K, cs));
}

TEST(Admissibility, LongRowIsIndefinite) {
    ConstraintSet cs(2, 1);
    cs.add_row(vec2(2, 0), Vector::Zero(1));
    EXPECT_FALSE(admissibility_check(Ellipsoid(Matrix::Identity(2, 2), 1.0), Matrix::Zero(1, 2), cs));
}

TEST(Admissibility, MatchesMaxAdmissibleLevel) {
    const ConstraintSet cs = ConstraintSet::box(2, 1, 1.0, 1.0);
    Matrix K(1, 2);
    K << -0.4, 0.9;
    const Matrix P = diag2(3.0, 1.5);
    const double level = max_admissible_level(P, K, cs);
    EXPECT_TRUE(admissibility_check(Ellipsoid(P, level * (1 - 1e-9)), K, cs));
    EXPECT_FALSE(admissibility_check(Ellipsoid(P, level * (1 + 1e-6)), K, cs));
    EXPECT_TRUE(std::isinf(max_admissible_level(P, K, ConstraintSet(2, 1))));
}

TEST(Invariance, ZeroClosedLoopContractsAtAnyLevel) {
    LinearSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1));
    Matrix K(1, 2);
    K << 5.0, -1.0;
    EXPECT_TRUE(invariance_check(Ellipsoid(diag2(2.0, 0.5), 1.0), sys, K, 0.5));
}

TEST(Invariance, ScalarBoundary) {
    LinearSystem sys(scalar(0.9), scalar(1.0));
    const Ellipsoid e(scalar(1.0), 1.0);
    EXPECT_TRUE(invariance_check(e, sys, scalar(0.0), 0.81));
    EXPECT_FALSE(invariance_check(e, sys, scalar(0.0), 0.8));
    EXPECT_NEAR(contraction_factor(scalar(1.0), sys, scalar(0.0)), 0.81, 1e-15);
}

TEST(Invariance, LqrSolutionContractsAtTheFloor) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution lqr = solve_dare(sys, cost);
    const double floor = convergence_lambda_floor(lqr, cost);
    const Ellipsoid e(lqr.P_inf, 1.0);
    EXPECT_TRUE(invariance_check(e, sys, lqr.K_inf, floor * (1.0 + 1e-9)));
    EXPECT_LE(contraction_factor(lqr.P_inf, sys, lqr.K_inf), floor * (1.0 + 1e-9));
}

TEST(ContractionFactor, MatchesSmallestCertifiedLambda) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, cost).K_inf;
    const Matrix P = diag2(2.0, 1.0);
    const double f = contraction_factor(P, sys, K);
    EXPECT_TRUE(invariance_check(Ellipsoid(P, 1.0), sys, K, f * (1 + 1e-9)));
    EXPECT_FALSE(invariance_check(Ellipsoid(P, 1.0), sys, K, f * (1 - 1e-6)));
}

TEST(Synthesis, ScalarExample) {
    LinearSystem sys(scalar(0.0), scalar(1.0));
    const ConstraintSet cs = ConstraintSet::box(1, 1, 1.0, std::nullopt);
    const Vector x0 = scalar(0.5).col(0);
    const Ellipsoid e = synthesize_initial_cais(sys, cs, scalar(0.0), x0, 0.5);
    const double p = e.P(0, 0);
    EXPECT_GT(p, 0.0);
    EXPECT_GE(e.rho / p, 0.25);
    EXPECT_LE(e.rho / p, 1.0);
    EXPECT_NEAR(x0.dot(e.P * x0) / p, 0.25, 1e-15);
    EXPECT_TRUE(invariance_check(e, sys, scalar(0.0), 0.5));
    EXPECT_TRUE(admissibility_check(e, scalar(0.0), cs));
    EXPECT_TRUE(contains(e, x0));
}

TEST(Synthesis, BoundaryStateReportsMaximalLevel) {
    LinearSystem sys(scalar(0.0), scalar(1.0));
    const ConstraintSet cs = ConstraintSet::box(1, 1, 1.0, std::nullopt);
    try {
        synthesize_initial_cais(sys, cs, scalar(0.0), scalar(1.0).col(0), 0.5);
        FAIL() << "expected SynthesisError";
    } catch (const SynthesisError& e) {
        EXPECT_NEAR(e.max_feasible_rho(), 2.0, 1e-12);
    }
}

TEST(Synthesis, RejectsUnstableGainAndSmallLambda) {
    LinearSystem sys(scalar(1.2), scalar(1.0));
    const ConstraintSet cs = ConstraintSet::box(1, 1, 1.0, std::nullopt);
    const Vector x0 = scalar(0.1).col(0);
    EXPECT_THROW(synthesize_initial_cais(sys, cs, scalar(0.0), x0, 0.9), PreconditionError);
    EXPECT_THROW(synthesize_initial_cais(sys, cs, scalar(-0.5), x0, 0.4), PreconditionError);
    EXPECT_THROW(synthesize_initial_cais(sys, cs, scalar(-0.5), x0, 1.5), PreconditionError);
}

TEST(Synthesis, TwoStatePlantCertifiesInteriorState) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const ConstraintSet cs = ConstraintSet::box(2, 1, 1.0, std::nullopt);
    const Matrix K0 = solve_dare(sys, cost).K_inf;
    const Vector x0 = vec2(0.1, -0.1);
    const Ellipsoid e = synthesize_initial_cais(sys, cs, K0, x0, 0.99);
    EXPECT_TRUE(invariance_check(e, sys, K0, 0.99));
    EXPECT_TRUE(admissibility_check(e, K0, cs));
    EXPECT_TRUE(contains(e, x0));
}

}  // namespace
}  // namespace safe_adp
