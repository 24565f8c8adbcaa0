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
#include "safe_adp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "safe_adp/errors.hpp"

namespace safe_adp::io {

Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) throw ConfigError(what + ": rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
            throw ConfigError(what + ": ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) {
            const Json& v = r[static_cast<std::size_t>(k)];
            if (!v.is_number()) throw ConfigError(what + ": entries must be numbers");
            M(i, k) = v.get<double>();
            if (!std::isfinite(M(i, k))) throw ConfigError(what + ": entries must be finite");
        }
    }
    return M;
}

Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw ConfigError(what + ": expected a non-empty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(what + ": entries must be numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        if (!std::isfinite(v(static_cast<Eigen::Index>(i)))) throw ConfigError(what + ": entries must be finite");
    }
    return v;
}

Json matrix_to_json(const Matrix& M) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
        out.push_back(std::move(r));
    }
    return out;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

namespace {

const Json& require(const Json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(what + ": missing key \"" + key + "\"");
    return j.at(key);
}

}  // namespace

LinearSystem system_from_json(const Json& j) {
    Matrix A = matrix_from_json(require(j, "A", "system"), "system.A");
    Matrix B = matrix_from_json(require(j, "B", "system"), "system.B");
    try {
        return LinearSystem(std::move(A), std::move(B));
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("system: ") + e.what());
    }
}

Json system_to_json(const LinearSystem& sys) {
    Json j = Json::object();
    j["A"] = matrix_to_json(sys.A());
    j["B"] = matrix_to_json(sys.B());
    return j;
}

CostSpec cost_from_json(const Json& j) {
    Matrix Q = matrix_from_json(require(j, "Q", "cost"), "cost.Q");
    Matrix R = matrix_from_json(require(j, "R", "cost"), "cost.R");
    try {
        return CostSpec(std::move(Q), std::move(R));
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("cost: ") + e.what());
    }
}

Json cost_to_json(const CostSpec& cost) {
    Json j = Json::object();
    j["Q"] = matrix_to_json(cost.Q);
    j["R"] = matrix_to_json(cost.R);
    return j;
}

ConstraintSet constraints_from_json(const Json& j, Eigen::Index n, Eigen::Index m) {
    ConstraintSet cs(n, m);
    const Json& rows = require(j, "rows", "constraints");
    if (!rows.is_array()) throw ConfigError("constraints.rows must be an array");
    for (const Json& r : rows) {
        Vector c = r.contains("c") ? vector_from_json(r.at("c"), "constraints.rows[].c") : Vector(Vector::Zero(n));
        Vector d = r.contains("d") ? vector_from_json(r.at("d"), "constraints.rows[].d") : Vector(Vector::Zero(m));
        try {
            cs.add_row(std::move(c), std::move(d));
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }
    return cs;
}

Json constraints_to_json(const ConstraintSet& cs) {
    Json rows = Json::array();
    for (const auto& r : cs.rows()) {
        Json row = Json::object();
        row["c"] = vector_to_json(r.c);
        row["d"] = vector_to_json(r.d);
        rows.push_back(std::move(row));
    }
    Json j = Json::object();
    j["rows"] = std::move(rows);
    return j;
}

Ellipsoid ellipsoid_from_json(const Json& j) {
    Matrix P = matrix_from_json(require(j, "P", "ellipsoid"), "ellipsoid.P");
    const Json& rho = require(j, "rho", "ellipsoid");
    if (!rho.is_number()) throw ConfigError("ellipsoid.rho must be a number");
    try {
        return Ellipsoid(std::move(P), rho.get<double>());
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("ellipsoid: ") + e.what());
    }
}

Json ellipsoid_to_json(const Ellipsoid& e) {
    Json j = Json::object();
    j["P"] = matrix_to_json(e.P);
    j["rho"] = e.rho;
    return j;
}

Json lqr_to_json(const LqrSolution& sol) {
    Json j = Json::object();
    j["P_inf"] = matrix_to_json(sol.P_inf);
    j["K_inf"] = matrix_to_json(sol.K_inf);
    j["residual"] = sol.residual;
    j["iterations"] = sol.iterations;
    return j;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace safe_adp::io
