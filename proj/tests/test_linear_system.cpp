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

#include "safe_adp/errors.hpp"
#include "safe_adp/linear_system.hpp"
#include "safe_adp/lqr.hpp"
#include "support.hpp"

namespace safe_adp {
namespace {

using test::vec2;

TEST(LinearSystem, ValidatesShapes) {
    EXPECT_THROW(LinearSystem(Matrix::Zero(2, 3), Matrix::Zero(2, 1)), ContractViolation);
    EXPECT_THROW(LinearSystem(Matrix::Zero(2, 2), Matrix::Zero(3, 1)), ContractViolation);
    EXPECT_THROW(LinearSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 0)), ContractViolation);
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(LinearSystem(bad, Matrix::Zero(2, 1)), ContractViolation);
}

TEST(LinearSystem, StepZeroDriftPassesInputThrough) {
    LinearSystem sys(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
    EXPECT_EQ(step(sys, vec2(1, 1), vec2(2, 3)), vec2(2, 3));
}

TEST(LinearSystem, StepIdentityDynamicsIgnoresZeroInputMatrix) {
    LinearSystem sys(Matrix::Identity(2, 2), Matrix::Zero(2, 1));
    EXPECT_EQ(step(sys, vec2(1, -1), test::scalar(5).col(0)), vec2(1, -1));
}

TEST(LinearSystem, StepTwoStatePlant) {
    const LinearSystem sys = test::two_state_system();
    const Vector next = step(sys, vec2(1, 0), Vector::Zero(1));
    EXPECT_DOUBLE_EQ(next(0), 1.1387);
    EXPECT_DOUBLE_EQ(next(1), -0.8680);
    EXPECT_THROW(step(sys, Vector::Zero(3), Vector::Zero(1)), ContractViolation);
}

TEST(LinearSystem, NoiselessStableLoopDecreasesLyapunovValue) {
    const LinearSystem sys = test::two_state_system();
    const CostSpec cost = test::two_state_cost();
    const Matrix K = solve_dare(sys, cost).K_inf;
    const Matrix P = lyapunov_evaluate(sys, K, cost);
    const auto traj = simulate_closed_loop(sys, K, vec2(0.3, -0.4), ExplorationNoise{0.0, 1}, 40);
    ASSERT_EQ(traj.size(), 40u);
    for (const auto& tr : traj) {
        EXPECT_TRUE(tr.nu.isZero());
        EXPECT_LT(tr.x_next.dot(P * tr.x_next), tr.x.dot(P * tr.x));
    }
}

TEST(LinearSystem, NoiseStaysWithinAmplitude) {
    const LinearSystem sys = test::two_state_system();
    const Matrix K = solve_dare(sys, test::two_state_cost()).K_inf;
    const auto traj = simulate_closed_loop(sys, K, vec2(0.3, -0.4), ExplorationNoise{0.02, 99}, 500);
    double largest = 0.0;
    for (const auto& tr : traj) largest = std::max(largest, tr.nu.cwiseAbs().maxCoeff());
    EXPECT_LE(largest, 0.02);
    EXPECT_GT(largest, 0.015);
}

TEST(LinearSystem, HorizonOneIsDirectSubstitution) {
    const LinearSystem sys = test::two_state_system();
    Matrix K(1, 2);
    K << 0.7, -0.2;
    const Vector x0 = vec2(0.5, 0.25);
    const auto traj = simulate_closed_loop(sys, K, x0, ExplorationNoise{0.02, 5}, 1);
    ASSERT_EQ(traj.size(), 1u);
    const Vector expected = sys.A() * x0 + sys.B() * (K * x0 + traj[0].nu);
    EXPECT_LE((traj[0].x_next - expected).norm(), 1e-15);
    EXPECT_THROW(simulate_closed_loop(sys, K, x0, ExplorationNoise{0.02, 5}, 0), ContractViolation);
}

TEST(LinearSystem, NoiseSourceIsReproducible) {
    NoiseSource a(ExplorationNoise{0.1, 42});
    NoiseSource b(ExplorationNoise{0.1, 42});
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a.sample(3), b.sample(3));
    EXPECT_THROW(NoiseSource(ExplorationNoise{-1.0, 0}), ContractViolation);
}

class RandomSystemSeeds : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(RandomSystemSeeds, TwoStateRadiusAndRank) {
    const LinearSystem sys = random_controllable_system(2, 1, {1.0, 1.2}, GetParam());
    const double r = linalg::spectral_radius(sys.A());
    EXPECT_GE(r, 1.0 - 1e-12);
    EXPECT_LE(r, 1.2 + 1e-12);
    EXPECT_EQ(linalg::numerical_rank(linalg::controllability_matrix(sys.A(), sys.B()), 1e-9), 2);
}

TEST_P(RandomSystemSeeds, FiveStateControllable) {
    const LinearSystem sys = random_controllable_system(5, 2, {1.0, 1.1}, GetParam());
    EXPECT_TRUE(sys.is_controllable());
    EXPECT_EQ(linalg::numerical_rank(linalg::controllability_matrix(sys.A(), sys.B()), 1e-9), 5);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomSystemSeeds, ::testing::Values(0u, 1u, 2u, 17u, 123456789u));

TEST(LinearSystem, ScalarRandomSystemHasFixedRadius) {
    const LinearSystem sys = random_controllable_system(1, 1, {1.05, 1.05}, 3);
    EXPECT_NEAR(std::abs(sys.A()(0, 0)), 1.05, 1e-15);
    EXPECT_NE(sys.B()(0, 0), 0.0);
}

TEST(LinearSystem, RandomSystemIsSeedDeterministic) {
    const LinearSystem a = random_controllable_system(3, 2, {0.9, 1.1}, 8);
    const LinearSystem b = random_controllable_system(3, 2, {0.9, 1.1}, 8);
    EXPECT_EQ(a.A(), b.A());
    EXPECT_EQ(a.B(), b.B());
    EXPECT_THROW(random_controllable_system(2, 1, {1.2, 1.0}, 0), ContractViolation);
}

}  // namespace
}  // namespace safe_adp
