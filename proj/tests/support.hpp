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
#ifndef SAFE_ADP_TESTS_SUPPORT_HPP
#define SAFE_ADP_TESTS_SUPPORT_HPP

#include <cstdint>
#include <random>

#include "safe_adp/linalg.hpp"
#include "safe_adp/linear_system.hpp"
#include "safe_adp/lqr.hpp"

namespace safe_adp::test {

// Two-state plant used throughout the examples.
inline LinearSystem two_state_system() {
    Matrix A(2, 2);
    A << 1.1387, 0.0491, -0.8680, 0.9679;
    Matrix B(2, 1);
    B << -0.5507, 0.0758;
    return LinearSystem(A, B);
}

inline CostSpec two_state_cost() {
    return CostSpec(Matrix::Identity(2, 2), Matrix::Constant(1, 1, 0.5));
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

inline Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd;
    Matrix M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = nd(rng);
    return M;
}

inline double spectral_norm(const Matrix& M) { return linalg::max_singular_value(M); }

}  // namespace safe_adp::test

#endif  // SAFE_ADP_TESTS_SUPPORT_HPP
