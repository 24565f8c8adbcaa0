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
#ifndef SAFE_ADP_IO_HPP
#define SAFE_ADP_IO_HPP

#include <string>

#include <json.hpp>

#include "safe_adp/constraints.hpp"
#include "safe_adp/linalg.hpp"
#include "safe_adp/linear_system.hpp"
#include "safe_adp/lqr.hpp"

namespace safe_adp::io {

using Json = nlohmann::ordered_json;

/// Row-major nested arrays of finite doubles. Throws ConfigError on malformed input.
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);
Json matrix_to_json(const Matrix& M);
Json vector_to_json(const Vector& v);

/// {"A": [[...]], "B": [[...]]}
LinearSystem system_from_json(const Json& j);
Json system_to_json(const LinearSystem& sys);

/// {"Q": [[...]], "R": [[...]]}
CostSpec cost_from_json(const Json& j);
Json cost_to_json(const CostSpec& cost);

/// {"rows": [{"c": [...], "d": [...]}]}
ConstraintSet constraints_from_json(const Json& j, Eigen::Index n, Eigen::Index m);
Json constraints_to_json(const ConstraintSet& cs);

/// {"P": [[...]], "rho": x}
Ellipsoid ellipsoid_from_json(const Json& j);
Json ellipsoid_to_json(const Ellipsoid& e);

Json lqr_to_json(const LqrSolution& sol);

/// Parses a JSON file; throws ConfigError when it cannot be read or parsed.
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Shortest round-trip representation ("%.17g").
std::string format_double(double v);

}  // namespace safe_adp::io

#endif  // SAFE_ADP_IO_HPP
