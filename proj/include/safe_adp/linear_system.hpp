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
#ifndef SAFE_ADP_LINEAR_SYSTEM_HPP
#define SAFE_ADP_LINEAR_SYSTEM_HPP

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "safe_adp/linalg.hpp"

namespace safe_adp {

/**
 * @brief Discrete-time LTI plant x_{t+1} = A x_t + B u_t.
 *
 * Immutable after construction; the constructor validates that A is n x n and
 * B is n x m with n, m >= 1.
 */
class LinearSystem {
public:
    LinearSystem(Matrix A, Matrix B);

    const Matrix& A() const noexcept { return A_; }
    const Matrix& B() const noexcept { return B_; }
    Eigen::Index n() const noexcept { return A_.rows(); }
    Eigen::Index m() const noexcept { return B_.cols(); }

    /// A + BK
    Matrix closed_loop(const Matrix& K) const;

    /// Kalman rank test with threshold 1e-9 * sigma_max.
    bool is_controllable() const;

private:
    Matrix A_;
    Matrix B_;
};

/// Current state of a simulation and its integer time index.
struct SimState {
    Vector x;
    long t = 0;
};

/// Uniform, symmetric, per-component exploration noise.
struct ExplorationNoise {
    double amplitude = 0.02;
    std::uint64_t seed = 0;
};

/// Reproducible stream of exploration noise samples.
class NoiseSource {
public:
    explicit NoiseSource(const ExplorationNoise& spec);

    Vector sample(Eigen::Index m);
    double amplitude() const noexcept { return amplitude_; }

private:
    double amplitude_;
    std::mt19937_64 engine_;
};

/// One closed-loop sample (x_t, u_t = K x_t + nu_t, nu_t, x_{t+1}).
struct Transition {
    Vector x;
    Vector u;
    Vector nu;
    Vector x_next;
};

/// Returns A x + B u. Throws ContractViolation on dimension mismatch.
Vector step(const LinearSystem& sys, const Vector& x, const Vector& u);

std::vector<Transition> simulate_closed_loop(const LinearSystem& sys, const Matrix& K,
                                             const Vector& x0, const ExplorationNoise& noise,
                                             long horizon);

/**
 * Draws A with i.i.d. standard normal entries rescaled to a spectral radius
 * sampled uniformly from `spectral_radius_range`, and B i.i.d. normal.
 * Candidates failing the Kalman rank test are rejected; after `max_attempts`
 * rejections a SystemGenerationError is thrown.
 */
LinearSystem random_controllable_system(Eigen::Index n, Eigen::Index m,
                                        std::pair<double, double> spectral_radius_range,
                                        std::uint64_t seed, int max_attempts = 1000);

}  // namespace safe_adp

#endif  // SAFE_ADP_LINEAR_SYSTEM_HPP
