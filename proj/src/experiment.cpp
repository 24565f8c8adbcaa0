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
#include "safe_adp/experiment.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "safe_adp/errors.hpp"

namespace safe_adp {

CostSpec CostInput::resolve(Eigen::Index n, Eigen::Index m) const {
    Matrix Qm = Q ? *Q : Matrix(q_scale * Matrix::Identity(n, n));
    Matrix Rm = R ? *R : Matrix(r_scale * Matrix::Identity(m, m));
    if (Qm.rows() != n || Qm.cols() != n) throw ConfigError("cost.Q must be " + std::to_string(n) + "x" + std::to_string(n));
    if (Rm.rows() != m || Rm.cols() != m) throw ConfigError("cost.R must be " + std::to_string(m) + "x" + std::to_string(m));
    try {
        return CostSpec(std::move(Qm), std::move(Rm));
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
}

ConstraintSet ConstraintInput::resolve(Eigen::Index n, Eigen::Index m) const {
    try {
        ConstraintSet cs = ConstraintSet::box(n, m, state_bound, input_bound);
        auto or_zero = [](const Vector& v, Eigen::Index k) { return v.size() == 0 ? Vector(Vector::Zero(k)) : v; };
        for (const auto& r : rows) cs.add_row(or_zero(r.c, n), or_zero(r.d, m));
        for (const auto& r : general_rows) cs.add_general(or_zero(r.a, n), or_zero(r.b, m), r.g);
        if (inflation != 1.0) cs = cs.inflated(inflation);
        return cs;
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("constraints: ") + e.what());
    }
}

namespace {

using io::Json;

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
}

double number(const Json& j, const char* key, double fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(where + "." + key + " must be finite");
    return d;
}

long integer(const Json& j, const char* key, long fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
    return v.get<long>();
}

std::optional<double> optional_number(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return number(j, key, 0.0, where);
}

// Matrix given explicitly or as a scalar multiple of the identity.
void matrix_or_scale(const Json& j, const char* key, std::optional<Matrix>& M, double& scale) {
    if (!j.contains(key)) throw ConfigError(std::string("cost: missing key \"") + key + "\"");
    const Json& v = j.at(key);
    if (v.is_number()) {
        scale = v.get<double>();
    } else {
        M = io::matrix_from_json(v, std::string("cost.") + key);
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), stream};
    std::uint32_t out[2];
    ss.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Matrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix M(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) M(i, j) = nd(rng);
    return M;
}

}  // namespace

ExperimentConfig parse_experiment_config(const Json& doc) {
    check_keys(doc, {"name", "mode", "seed", "horizon", "system", "cost", "constraints", "schedule", "noise", "initial",
                     "adp", "sdp", "report"},
               "config");
    ExperimentConfig cfg;
    cfg.source = doc;
    if (doc.contains("name")) {
        if (!doc.at("name").is_string()) throw ConfigError("config.name must be a string");
        cfg.name = doc.at("name").get<std::string>();
    }
    if (doc.contains("mode")) {
        const std::string mode = doc.at("mode").is_string() ? doc.at("mode").get<std::string>() : "";
        if (mode == "data-driven")
            cfg.mode = EvaluationMode::data_driven;
        else if (mode == "model-based")
            cfg.mode = EvaluationMode::model_based;
        else
            throw ConfigError("config.mode must be \"data-driven\" or \"model-based\"");
    }
    const long seed = integer(doc, "seed", 0, "config");
    if (seed < 0) throw ConfigError("config.seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.horizon = integer(doc, "horizon", 0, "config");
    if (cfg.horizon < 0) throw ConfigError("config.horizon must be >= 0");

    // System
    if (!doc.contains("system")) throw ConfigError("config: missing key \"system\"");
    const Json& js = doc.at("system");
    if (js.is_object() && js.contains("random")) {
        check_keys(js, {"random"}, "system");
        const Json& jr = js.at("random");
        check_keys(jr, {"n", "m", "spectral_radius"}, "system.random");
        RandomSystemSpec rs;
        rs.n = integer(jr, "n", 5, "system.random");
        rs.m = integer(jr, "m", 2, "system.random");
        if (rs.n < 1 || rs.m < 1) throw ConfigError("system.random: n and m must be >= 1");
        if (jr.contains("spectral_radius")) {
            const Vector r = io::vector_from_json(jr.at("spectral_radius"), "system.random.spectral_radius");
            if (r.size() != 2 || !(r(0) > 0.0) || !(r(1) >= r(0)))
                throw ConfigError("system.random.spectral_radius must be [lo, hi] with 0 < lo <= hi");
            rs.radius_lo = r(0);
            rs.radius_hi = r(1);
        }
        cfg.random_system = rs;
    } else {
        check_keys(js, {"A", "B"}, "system");
        cfg.system = io::system_from_json(js);
    }

    // Cost
    if (!doc.contains("cost")) throw ConfigError("config: missing key \"cost\"");
    const Json& jc = doc.at("cost");
    check_keys(jc, {"Q", "R"}, "cost");
    matrix_or_scale(jc, "Q", cfg.cost.Q, cfg.cost.q_scale);
    matrix_or_scale(jc, "R", cfg.cost.R, cfg.cost.r_scale);

    // Constraints
    if (doc.contains("constraints")) {
        const Json& jk = doc.at("constraints");
        check_keys(jk, {"state_bound", "input_bound", "rows", "general_rows", "inflation", "tighten_for_noise"},
                   "constraints");
        cfg.constraints.state_bound = optional_number(jk, "state_bound", "constraints");
        cfg.constraints.input_bound = optional_number(jk, "input_bound", "constraints");
        if (jk.contains("rows")) {
            if (!jk.at("rows").is_array()) throw ConfigError("constraints.rows must be an array");
            for (const Json& r : jk.at("rows")) {
                check_keys(r, {"c", "d"}, "constraints.rows[]");
                ConstraintRow row;
                if (r.contains("c")) row.c = io::vector_from_json(r.at("c"), "constraints.rows[].c");
                if (r.contains("d")) row.d = io::vector_from_json(r.at("d"), "constraints.rows[].d");
                cfg.constraints.rows.push_back(std::move(row));
            }
        }
        if (jk.contains("general_rows")) {
            if (!jk.at("general_rows").is_array()) throw ConfigError("constraints.general_rows must be an array");
            for (const Json& r : jk.at("general_rows")) {
                check_keys(r, {"a", "b", "g"}, "constraints.general_rows[]");
                GeneralRow row;
                if (r.contains("a")) row.a = io::vector_from_json(r.at("a"), "constraints.general_rows[].a");
                if (r.contains("b")) row.b = io::vector_from_json(r.at("b"), "constraints.general_rows[].b");
                row.g = number(r, "g", 1.0, "constraints.general_rows[]");
                if (!(row.g > 0.0)) throw ConfigError("constraints.general_rows[].g must be > 0");
                cfg.constraints.general_rows.push_back(std::move(row));
            }
        }
        cfg.constraints.inflation = number(jk, "inflation", 1.0, "constraints");
        if (!(cfg.constraints.inflation > 0.0)) throw ConfigError("constraints.inflation must be > 0");
        if (jk.contains("tighten_for_noise")) {
            if (!jk.at("tighten_for_noise").is_boolean())
                throw ConfigError("constraints.tighten_for_noise must be a boolean");
            cfg.constraints.tighten_for_noise = jk.at("tighten_for_noise").get<bool>();
        }
    }

    if (doc.contains("schedule")) {
        check_keys(doc.at("schedule"), {"N"}, "schedule");
        cfg.N = static_cast<int>(integer(doc.at("schedule"), "N", 8, "schedule"));
    }
    if (cfg.N < 1) throw ConfigError("schedule.N must be >= 1");

    if (doc.contains("noise")) {
        check_keys(doc.at("noise"), {"amplitude"}, "noise");
        cfg.noise_amplitude = number(doc.at("noise"), "amplitude", 0.02, "noise");
    }
    if (!(cfg.noise_amplitude >= 0.0)) throw ConfigError("noise.amplitude must be >= 0");

    if (doc.contains("initial")) {
        const Json& ji = doc.at("initial");
        check_keys(ji, {"x0", "surrogate_regularization", "lambda"}, "initial");
        if (ji.contains("x0")) cfg.x0 = io::vector_from_json(ji.at("x0"), "initial.x0");
        cfg.surrogate_regularization = number(ji, "surrogate_regularization", 0.1, "initial");
        cfg.initial_lambda = number(ji, "lambda", 0.9999, "initial");
    }
    if (!(cfg.surrogate_regularization > 0.0)) throw ConfigError("initial.surrogate_regularization must be > 0");
    if (!(cfg.initial_lambda > 0.0 && cfg.initial_lambda <= 1.0)) throw ConfigError("initial.lambda must lie in (0, 1]");

    if (doc.contains("adp")) {
        const Json& ja = doc.at("adp");
        check_keys(ja, {"p_min", "p_max", "lambda", "rho_weight", "beta", "epsilon", "gate", "hessian_init_scale",
                        "step_size", "rho_min", "lookahead_guard"},
                   "adp");
        cfg.p_min = optional_number(ja, "p_min", "adp");
        cfg.p_max = optional_number(ja, "p_max", "adp");
        cfg.lambda = optional_number(ja, "lambda", "adp");
        cfg.adp.rho_weight = number(ja, "rho_weight", cfg.adp.rho_weight, "adp");
        cfg.adp.beta = number(ja, "beta", cfg.adp.beta, "adp");
        cfg.adp.epsilon = number(ja, "epsilon", cfg.adp.epsilon, "adp");
        cfg.adp.hessian_init_scale = number(ja, "hessian_init_scale", cfg.adp.hessian_init_scale, "adp");
        cfg.adp.step_size = number(ja, "step_size", cfg.adp.step_size, "adp");
        cfg.adp.rho_min = number(ja, "rho_min", cfg.adp.rho_min, "adp");
        if (ja.contains("lookahead_guard")) {
            if (!ja.at("lookahead_guard").is_boolean())
                throw ConfigError("adp.lookahead_guard must be a boolean");
            cfg.adp.lookahead_guard = ja.at("lookahead_guard").get<bool>();
        }
        if (ja.contains("gate")) {
            const std::string g = ja.at("gate").is_string() ? ja.at("gate").get<std::string>() : "";
            if (g == "relative")
                cfg.adp.gate = GateMode::relative;
            else if (g == "absolute")
                cfg.adp.gate = GateMode::absolute;
            else
                throw ConfigError("adp.gate must be \"relative\" or \"absolute\"");
        }
    }
    if (cfg.p_min.has_value() != cfg.p_max.has_value())
        throw ConfigError("adp.p_min and adp.p_max must be given together");

    if (doc.contains("sdp")) {
        const Json& jd = doc.at("sdp");
        check_keys(jd, {"feas_tol", "max_iter", "certification_margin", "certification_retries"}, "sdp");
        cfg.adp.sdp.feas_tol = number(jd, "feas_tol", cfg.adp.sdp.feas_tol, "sdp");
        cfg.adp.sdp.max_iter = static_cast<int>(integer(jd, "max_iter", cfg.adp.sdp.max_iter, "sdp"));
        cfg.adp.sdp.certification_margin = number(jd, "certification_margin", cfg.adp.sdp.certification_margin, "sdp");
        cfg.adp.sdp.certification_retries =
            static_cast<int>(integer(jd, "certification_retries", cfg.adp.sdp.certification_retries, "sdp"));
        if (!(cfg.adp.sdp.feas_tol > 0.0) || cfg.adp.sdp.max_iter < 1 || cfg.adp.sdp.certification_retries < 0 ||
            !(cfg.adp.sdp.certification_margin >= 0.0))
            throw ConfigError("sdp: invalid solver settings");
    }

    if (doc.contains("report")) {
        const Json& jr = doc.at("report");
        check_keys(jr, {"convergence_tolerance", "convergence_windows"}, "report");
        cfg.convergence_tol = number(jr, "convergence_tolerance", cfg.convergence_tol, "report");
        cfg.convergence_windows = static_cast<int>(integer(jr, "convergence_windows", cfg.convergence_windows, "report"));
    }
    if (!(cfg.convergence_tol > 0.0) || cfg.convergence_windows < 1) throw ConfigError("report: invalid settings");

    // Settings that can be validated without generating anything.
    AdpConfig probe = cfg.adp;
    probe.p_min = 1.0;
    probe.p_max = 1.0;
    probe.lambda = 0.5;
    try {
        probe.validate(LearningSchedule(cfg.N));
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    if (cfg.p_min) {
        probe.p_min = *cfg.p_min;
        probe.p_max = *cfg.p_max;
        probe.lambda = cfg.lambda.value_or(0.999 * compute_lambda_bound(std::max(*cfg.p_min, 1e-300),
                                                                         std::max(*cfg.p_max, *cfg.p_min), cfg.N));
        try {
            probe.validate(LearningSchedule(cfg.N));
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }
    if (cfg.system) {
        cfg.cost.resolve(cfg.system->n(), cfg.system->m());
        cfg.constraints.resolve(cfg.system->n(), cfg.system->m());
        if (cfg.x0 && cfg.x0->size() != cfg.system->n()) throw ConfigError("initial.x0 has the wrong length");
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) { return parse_experiment_config(io::read_json_file(path)); }

PreparedEpisode prepare_episode(const ExperimentConfig& cfg, std::uint64_t seed) {
    std::vector<std::string> warnings;
    LinearSystem sys = cfg.system ? *cfg.system
                                  : random_controllable_system(cfg.random_system->n, cfg.random_system->m,
                                                               {cfg.random_system->radius_lo, cfg.random_system->radius_hi},
                                                               derive_seed(seed, 1));
    const Eigen::Index n = sys.n();
    const Eigen::Index m = sys.m();
    const CostSpec cost = cfg.cost.resolve(n, m);
    const ConstraintSet original = cfg.constraints.resolve(n, m);
    const bool data_driven = cfg.mode == EvaluationMode::data_driven;
    const double amplitude = data_driven ? cfg.noise_amplitude : 0.0;
    ConstraintSet design = original;
    if (cfg.constraints.tighten_for_noise && amplitude > 0.0) {
        try {
            design = original.tightened_for_input_noise(amplitude);
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }

    const LqrSolution lqr = solve_dare(sys, cost);

    // Initial gain from a seeded surrogate cost distinct from (Q, R).
    std::mt19937_64 rng(derive_seed(seed, 2));
    const Matrix G = gaussian(rng, n, n);
    const Matrix Gr = gaussian(rng, m, m);
    const CostSpec surrogate(G * G.transpose() + cfg.surrogate_regularization * Matrix::Identity(n, n),
                             Gr * Gr.transpose() + cfg.surrogate_regularization * Matrix::Identity(m, m));
    const Matrix K0 = solve_dare(sys, surrogate).K_inf;

    Matrix weight = cost.Q + K0.transpose() * cost.R * K0;
    if (Eigen::LLT<Matrix>(weight).info() != Eigen::Success)
        weight += 1e-6 * std::max(1.0, weight.trace() / static_cast<double>(n)) * Matrix::Identity(n, n);

    Ellipsoid cais0;
    Vector x0;
    try {
        if (cfg.x0) {
            if (cfg.x0->size() != n) throw ConfigError("initial.x0 has the wrong length");
            x0 = *cfg.x0;
            cais0 = synthesize_initial_cais(sys, design, K0, x0, cfg.initial_lambda, weight);
        } else {
            cais0 = synthesize_initial_cais(sys, design, K0, Vector::Zero(n), cfg.initial_lambda, weight);
            std::mt19937_64 xr(derive_seed(seed, 3));
            Vector d = gaussian(xr, n, 1);
            x0 = d * std::sqrt(cais0.rho / d.dot(cais0.P * d)) * (1.0 - 1e-9);
        }
    } catch (const SynthesisError& e) {
        throw PreconditionError(std::string("initial invariant set: ") + e.what());
    }

    // Box and contraction factor.
    Eigen::SelfAdjointEigenSolver<Matrix> es_inf(lqr.P_inf, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> es_0(cais0.P, Eigen::EigenvaluesOnly);
    const double smin = es_inf.eigenvalues().minCoeff();
    const double smax = es_inf.eigenvalues().maxCoeff();
    const double floor = convergence_lambda_floor(lqr, cost);

    AdpConfig adp = cfg.adp;
    std::string rule;
    if (cfg.p_min) {
        adp.p_min = *cfg.p_min;
        adp.p_max = *cfg.p_max;
        rule = "configured";
    } else {
        adp.p_min = 0.5 * es_0.eigenvalues().minCoeff();
        adp.p_max = 2.0 * es_0.eigenvalues().maxCoeff();
        const double lam = 0.999 * compute_lambda_bound(adp.p_min, adp.p_max, cfg.N);
        rule = "initial-set";
        if (!(lam >= floor) || !convergence_box_check(lqr.P_inf, adp.p_min, adp.p_max).spectral) {
            // Centre the box on the LQR value matrix and widen it just enough to
            // open the window between the floor and the bound.
            const double ratio = smin / smax;
            const double bmax = std::pow(ratio, 2.0 / cfg.N);
            double c = 1.0;
            if (floor < bmax) {
                const double target = 0.5 * (floor + bmax);
                c = std::sqrt(ratio / std::pow(target, 0.5 * cfg.N));
            } else {
                warnings.push_back("lambda window is empty: the convergence floor exceeds every admissible bound");
            }
            adp.p_min = smin / c;
            adp.p_max = smax * c;
            rule = "lqr-centred";
        }
    }
    const double bound = compute_lambda_bound(adp.p_min, adp.p_max, cfg.N);
    adp.lambda = cfg.lambda ? *cfg.lambda : 0.999 * bound;
    try {
        adp.validate(LearningSchedule(cfg.N));
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    const BoxCheck box = convergence_box_check(lqr.P_inf, adp.p_min, adp.p_max);
    const double k0_radius = linalg::spectral_radius(sys.closed_loop(K0));
    const bool k0_contracts = k0_radius * k0_radius < adp.lambda;
    const bool window = adp.lambda >= floor && box.spectral && k0_contracts;
    if (!k0_contracts)
        warnings.push_back("the initial gain cannot contract at lambda; the first policy evaluation is infeasible");
    if (!(adp.lambda >= floor))
        warnings.push_back("lambda is below the convergence floor; convergence to the LQR solution is not guaranteed");
    if (!box.literal) warnings.push_back("eigenvalue box violates p_min <= sigma_min(P_inf) <= p_max");
    else if (!box.spectral) warnings.push_back("eigenvalue box does not contain the spectrum of P_inf");

    EpisodeSpec spec{sys,
                     cost,
                     original,
                     design,
                     K0,
                     cais0,
                     x0,
                     LearningSchedule(cfg.N),
                     ExplorationNoise{amplitude, derive_seed(seed, 4)},
                     adp,
                     cfg.horizon,
                     cfg.mode,
                     lqr.K_inf,
                     contraction_factor(cais0.P, sys, K0)};
    return PreparedEpisode{std::move(spec), lqr, floor, bound, box, window, rule, std::move(warnings)};
}

RunRecord summarize_run(const ExperimentConfig& cfg, const PreparedEpisode& prep, const EpisodeLog& log) {
    RunRecord r;
    r.max_violation = log.max_violation;
    r.safe = log.max_violation <= 1e-9;
    r.learning_cycles = log.learning_instants.size();
    r.ellipsoid_exits = log.ellipsoid_exits;
    r.policy_error.reserve(log.steps.size());
    const long limit = static_cast<long>(cfg.convergence_windows) * cfg.N;
    for (const StepRecord& s : log.steps) {
        r.policy_error.push_back(s.policy_error);
        if (r.convergence_time < 0 && s.policy_error >= 0.0 && s.policy_error <= cfg.convergence_tol)
            r.convergence_time = s.t;
    }
    r.final_policy_error = log.steps.empty() ? linalg::max_singular_value(prep.spec.K0 - prep.lqr.K_inf)
                                             : linalg::max_singular_value(log.K_final - prep.lqr.K_inf);
    r.converged = r.convergence_time >= 0 && r.convergence_time <= limit;
    r.decrease_ok = check_value_decrease(log, prep.spec.sys, prep.spec.cfg).ok();
    return r;
}

RunRecord run_one(const ExperimentConfig& cfg, std::uint64_t seed) {
    RunRecord r;
    try {
        const PreparedEpisode prep = prepare_episode(cfg, seed);
        const EpisodeLog log = run_constrained_adp(prep.spec);
        r = summarize_run(cfg, prep, log);
    } catch (const SafetyViolation& e) {
        r.safe = false;
        r.max_violation = e.slack();
        r.error = e.what();
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seed = seed;
    return r;
}

BatchReport run_batch(const ExperimentConfig& cfg, int count, bool parallel) {
    if (count < 1) throw ConfigError("batch: count must be >= 1");
    BatchReport rep;
    rep.runs.resize(static_cast<std::size_t>(count));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
#endif
    for (int i = 0; i < count; ++i) rep.runs[static_cast<std::size_t>(i)] = run_one(cfg, cfg.seed + static_cast<std::uint64_t>(i));
    (void)parallel;

    std::vector<long> times;
    long converged = 0;
    for (const RunRecord& r : rep.runs) {
        if (!r.safe) rep.all_safe = false;
        if (r.converged) {
            ++converged;
            times.push_back(r.convergence_time);
        }
    }
    rep.fraction_converged = static_cast<double>(converged) / count;
    if (!times.empty()) {
        std::sort(times.begin(), times.end());
        const std::size_t k = times.size();
        rep.median_convergence_time =
            (k % 2 == 1) ? static_cast<double>(times[k / 2]) : 0.5 * static_cast<double>(times[k / 2 - 1] + times[k / 2]);
    }
    return rep;
}

}  // namespace safe_adp
