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
#include "safe_adp/linear_system.hpp"

#include <cmath>
#include <string>

#include "safe_adp/errors.hpp"

namespace safe_adp {

LinearSystem::LinearSystem(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    if (A_.rows() < 1 || A_.rows() != A_.cols())
        throw ContractViolation("LinearSystem: A must be square with n >= 1");
    if (B_.rows() != A_.rows() || B_.cols() < 1)
        throw ContractViolation("LinearSystem: B must be n x m with m >= 1");
    if (!A_.allFinite() || !B_.allFinite())
        throw ContractViolation("LinearSystem: non-finite entries");
}

Matrix LinearSystem::closed_loop(const Matrix& K) const {
    if (K.rows() != m() || K.cols() != n())
        throw ContractViolation("closed_loop: K must be m x n");
    return A_ + B_ * K;
}

bool LinearSystem::is_controllable() const {
    return linalg::numerical_rank(linalg::controllability_matrix(A_, B_), 1e-9) == n();
}

NoiseSource::NoiseSource(const ExplorationNoise& spec)
    : amplitude_(spec.amplitude), engine_(spec.seed) {
    if (!(spec.amplitude >= 0.0) || !std::isfinite(spec.amplitude))
        throw ContractViolation("ExplorationNoise: amplitude must be a finite nonnegative number");
}

Vector NoiseSource::sample(Eigen::Index m) {
    Vector nu(m);
    if (amplitude_ == 0.0) {
        nu.setZero();
        return nu;
    }
    std::uniform_real_distribution<double> dist(-amplitude_, amplitude_);
    for (Eigen::Index i = 0; i < m; ++i) nu(i) = dist(engine_);
    return nu;
}

Vector step(const LinearSystem& sys, const Vector& x, const Vector& u) {
    if (x.size() != sys.n() || u.size() != sys.m())
        throw ContractViolation("step: expected x of length " + std::to_string(sys.n()) +
                                " and u of length " + std::to_string(sys.m()));
    return sys.A() * x + sys.B() * u;
}

std::vector<Transition> simulate_closed_loop(const LinearSystem& sys, const Matrix& K,
                                             const Vector& x0, const ExplorationNoise& noise,
                                             long horizon) {
    if (K.rows() != sys.m() || K.cols() != sys.n())
        throw ContractViolation("simulate_closed_loop: K must be m x n");
    if (x0.size() != sys.n()) throw ContractViolation("simulate_closed_loop: x0 has wrong length");
    if (horizon < 1) throw ContractViolation("simulate_closed_loop: horizon must be >= 1");

    NoiseSource source(noise);
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(horizon));
    Vector x = x0;
    for (long t = 0; t < horizon; ++t) {
        Transition tr;
        tr.x = x;
        tr.nu = source.sample(sys.m());
        tr.u = K * x + tr.nu;
        tr.x_next = step(sys, x, tr.u);
        x = tr.x_next;
        out.push_back(std::move(tr));
    }
    return out;
}

LinearSystem random_controllable_system(Eigen::Index n, Eigen::Index m,
                                        std::pair<double, double> spectral_radius_range,
                                        std::uint64_t seed, int max_attempts) {
    const auto [lo, hi] = spectral_radius_range;
    if (n < 1 || m < 1) throw ContractViolation("random_controllable_system: n, m must be >= 1");
    if (!(lo > 0.0) || !(hi >= lo))
        throw ContractViolation("random_controllable_system: need 0 < lower <= upper");

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> radius(lo, hi);

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Matrix A(n, n);
        Matrix B(n, m);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) A(i, j) = normal(engine);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index i = 0; i < n; ++i) B(i, j) = normal(engine);
        const double target = (hi > lo) ? radius(engine) : lo;

        const double r = linalg::spectral_radius(A);
        if (!(r > 1e-12)) continue;
        A *= target / r;

        LinearSystem sys(std::move(A), std::move(B));
        if (sys.is_controllable()) return sys;
    }
    throw SystemGenerationError("random_controllable_system: no controllable system after " +
                                std::to_string(max_attempts) + " attempts");
}

}  // namespace safe_adp
