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

#include "safe_adp/errors.hpp"
#include "safe_adp/lqr.hpp"
#include "support.hpp"

namespace safe_adp {
namespace {

using test::scalar;

// Closed-form scalar DARE with a = 0.5, b = q = r = 1: p^2 - 0.25 p - 1 = 0.
constexpr double kScalarP = 1.1327822185373186;
constexpr double kScalarK = -0.2655644370746374;

TEST(CostSpec, Validation) {
    EXPECT_NO_THROW(CostSpec(Matrix::Zero(2, 2), scalar(1.0)));
    EXPECT_THROW(CostSpec(-Matrix::Identity(2, 2), scalar(1.0)), ContractViolation);
    EXPECT_THROW(CostSpec(Matrix::Identity(2, 2), scalar(0.0)), ContractViolation);
    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 0.5;
    EXPECT_THROW(CostSpec(asym, scalar(1.0)), ContractViolation);
}

TEST(CostSpec, Observability) {
    const LinearSystem sys = test::two_state_system();
    EXPECT_TRUE(is_observable(sys, test::two_state_cost()));
    LinearSystem diag(Matrix::Identity(2, 2), Matrix::Identity(2, 1));
    Matrix Q = Matrix::Zero(2, 2);
    Q(0, 0) = 1.0;
    EXPECT_FALSE(is_observable(diag, CostSpec(Q, scalar(1.0))));
}

TEST(Dare, ZeroDrift) {
    LinearSystem sys(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
    const LqrSolution sol = solve_dare(sys, CostSpec(Matrix::Identity(2, 2), Matrix::Identity(2, 2)));
    EXPECT_LE((sol.P_inf - Matrix::Identity(2, 2)).norm(), 1e-14);
    EXPECT_LE(sol.K_inf.norm(), 1e-14);
}

TEST(Dare, ScalarClosedForm) {
    LinearSystem sys(scalar(0.5), scalar(1.0));
    const LqrSolution sol = solve_dare(sys, CostSpec(scalar(1.0), scalar(1.0)));
    EXPECT_NEAR(sol.P_inf(0, 0), (0.25 + std::sqrt(4.0625)) / 2.0, 1e-12);
    EXPECT_NEAR(sol.P_inf(0, 0), kScalarP, 1e-12);
    EXPECT_NEAR(sol.K_inf(0, 0), kScalarK, 1e-12);
    EXPECT_LE(sol.residual, 1e-12);
}

TEST(Dare, TwoStatePlantResidualAndStability) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution sol = solve_dare(sys, cost);
    EXPECT_LE(dare_residual(sys, cost, sol.P_inf), 1e-9 * (1.0 + sol.P_inf.norm()));
    EXPECT_LT(linalg::spectral_radius(sys.closed_loop(sol.K_inf)), 1.0);
    EXPECT_LE((greedy_gain(sys, cost, sol.P_inf) - sol.K_inf).norm(), 1e-12);
}

TEST(Dare, UnstabilizableThrows) {
    // Unstable mode that the input cannot reach.
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = 1.5;
    A(1, 1) = 0.5;
    Matrix B(2, 1);
    B << 0.0, 1.0;
    EXPECT_THROW(solve_dare(LinearSystem(A, B), CostSpec(Matrix::Identity(2, 2), scalar(1.0))),
                 NotStabilizableError);
}

TEST(Lyapunov, DeadbeatIsStageCost) {
    LinearSystem sys(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    const Matrix K = -Matrix::Identity(2, 2);
    const CostSpec cost(Matrix::Identity(2, 2) * 2.0, Matrix::Identity(2, 2) * 3.0);
    EXPECT_LE((lyapunov_evaluate(sys, K, cost) - (cost.Q + K.transpose() * cost.R * K)).norm(), 1e-14);
}

TEST(Lyapunov, ScalarGeometricSeries) {
    LinearSystem sys(scalar(0.5), scalar(1.0));
    EXPECT_NEAR(lyapunov_evaluate(sys, scalar(0.0), CostSpec(scalar(1.0), scalar(1.0)))(0, 0), 4.0 / 3.0, 1e-14);
    EXPECT_THROW(lyapunov_evaluate(sys, scalar(0.6), CostSpec(scalar(1.0), scalar(1.0))), InstabilityError);
}

TEST(Lyapunov, OptimalGainReproducesDareSolution) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution sol = solve_dare(sys, cost);
    EXPECT_LE((lyapunov_evaluate(sys, sol.K_inf, cost) - sol.P_inf).norm(), 1e-8);
}

TEST(Hewer, FixedPointAtOptimum) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution sol = solve_dare(sys, cost);
    for (const auto& s : hewer_iterate(sys, sol.K_inf, cost, 5)) {
        EXPECT_LE((s.K - sol.K_inf).norm(), 1e-9);
        EXPECT_LE((s.P - sol.P_inf).norm(), 1e-8);
    }
}

TEST(Hewer, ScalarFirstStep) {
    LinearSystem sys(scalar(0.5), scalar(1.0));
    const auto steps = hewer_iterate(sys, scalar(0.0), CostSpec(scalar(1.0), scalar(1.0)), 3);
    ASSERT_EQ(steps.size(), 3u);
    EXPECT_NEAR(steps[0].P(0, 0), 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(steps[0].K(0, 0), -2.0 / 7.0, 1e-14);
}

TEST(Hewer, TwoStatePlantConvergesMonotonically) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const LqrSolution sol = solve_dare(sys, cost);
    // A deliberately poor but stabilizing start: the optimal gain for a heavy input penalty.
    const Matrix K0 = solve_dare(sys, CostSpec(Matrix::Identity(2, 2), scalar(50.0))).K_inf;
    const auto steps = hewer_iterate(sys, K0, cost, 30);
    for (std::size_t k = 1; k < steps.size(); ++k)
        EXPECT_TRUE(linalg::is_psd(steps[k - 1].P - steps[k].P, 1e-10 * (1.0 + steps[k].P.norm())));
    EXPECT_LE(test::spectral_norm(steps.back().K - sol.K_inf), 1e-8);
}

class RandomDareSeeds : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(RandomDareSeeds, ResidualAndHewerLimit) {
    const std::uint64_t seed = GetParam();
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(seed % 6);
    const Eigen::Index m = 1 + static_cast<Eigen::Index>((seed / 6) % 3);
    const LinearSystem sys = random_controllable_system(n, m, {0.5, 1.2}, seed);
    const CostSpec cost(Matrix::Identity(n, n), 0.5 * Matrix::Identity(m, m));
    const LqrSolution sol = solve_dare(sys, cost);
    EXPECT_LE(sol.residual, 1e-9 * (1.0 + sol.P_inf.norm()));
    const Matrix K0 = solve_dare(sys, CostSpec(Matrix::Identity(n, n), 20.0 * Matrix::Identity(m, m))).K_inf;
    const auto steps = hewer_iterate(sys, K0, cost, 40);
    EXPECT_LE((steps.back().P - sol.P_inf).norm(), 1e-7 * (1.0 + sol.P_inf.norm()));
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomDareSeeds, ::testing::Range<std::uint64_t>(0, 24));

}  // namespace
}  // namespace safe_adp
