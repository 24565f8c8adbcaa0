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
#ifndef SAFE_ADP_EXPERIMENT_HPP
#define SAFE_ADP_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safe_adp/constrained_pi.hpp"
#include "safe_adp/io.hpp"

namespace safe_adp {

struct RandomSystemSpec {
    Eigen::Index n = 5;
    Eigen::Index m = 2;
    double radius_lo = 1.0;
    double radius_hi = 1.1;
};

/// Cost matrices given explicitly or as multiples of the identity.
struct CostInput {
    std::optional<Matrix> Q;
    std::optional<Matrix> R;
    double q_scale = 1.0;
    double r_scale = 1.0;

    CostSpec resolve(Eigen::Index n, Eigen::Index m) const;
};

struct GeneralRow {
    Vector a;
    Vector b;
    double g = 1.0;
};

struct ConstraintInput {
    std::optional<double> state_bound;
    std::optional<double> input_bound;
    std::vector<ConstraintRow> rows;
    std::vector<GeneralRow> general_rows;
    double inflation = 1.0;
    bool tighten_for_noise = true;

    ConstraintSet resolve(Eigen::Index n, Eigen::Index m) const;
};

/// Everything needed to reproduce one episode (or a batch of them).
struct ExperimentConfig {
    std::string name = "experiment";
    EvaluationMode mode = EvaluationMode::data_driven;
    std::uint64_t seed = 0;
    long horizon = 0;

    std::optional<LinearSystem> system;
    std::optional<RandomSystemSpec> random_system;
    CostInput cost;
    ConstraintInput constraints;
    int N = 8;
    double noise_amplitude = 0.02;

    std::optional<Vector> x0;
    double surrogate_regularization = 0.1;
    double initial_lambda = 0.9999;

    std::optional<double> p_min;
    std::optional<double> p_max;
    std::optional<double> lambda;
    AdpConfig adp;  ///< p_min/p_max/lambda are filled in by prepare_episode

    double convergence_tol = 1e-2;
    int convergence_windows = 10;

    io::Json source;  ///< the parsed document, echoed into reports
};

/// Parses and validates a configuration document. Throws ConfigError.
ExperimentConfig parse_experiment_config(const io::Json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

struct PreparedEpisode {
    EpisodeSpec spec;
    LqrSolution lqr;
    double lambda_floor = 0.0;
    double lambda_bound = 0.0;
    BoxCheck box;
    bool convergence_window = false;
    std::string box_rule;
    std::vector<std::string> warnings;
};

/**
 * Builds the system, the LQR reference, an initial admissible gain from a
 * seeded surrogate cost, the initial CAIS, x0 on its boundary (unless given),
 * and the eigenvalue box [p_min, p_max] and lambda. Throws ConfigError for invalid settings,
 * PreconditionError when the initial set cannot certify x0 and
 * NotStabilizableError when the LQR reference does not exist.
 */
PreparedEpisode prepare_episode(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunRecord {
    std::uint64_t seed = 0;
    bool converged = false;
    long convergence_time = -1;  ///< first t with policy error <= tolerance
    double max_violation = 0.0;
    double final_policy_error = 0.0;
    std::size_t learning_cycles = 0;
    long ellipsoid_exits = 0;
    bool decrease_ok = false;
    bool safe = true;
    std::string error;
    std::vector<double> policy_error;  ///< per step, not serialised
};

RunRecord summarize_run(const ExperimentConfig& cfg, const PreparedEpisode& prep, const EpisodeLog& log);

struct BatchReport {
    std::vector<RunRecord> runs;
    double fraction_converged = 0.0;
    double median_convergence_time = -1.0;
    bool all_safe = true;
};

/// Runs seeds cfg.seed + 0 ... cfg.seed + count - 1. With parallel = true the
/// episodes are distributed over OpenMP threads; results do not depend on it.
BatchReport run_batch(const ExperimentConfig& cfg, int count, bool parallel = true);

/// Runs one prepared episode and summarises it, turning safety violations
/// and other failures into a record.
RunRecord run_one(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace safe_adp

#endif  // SAFE_ADP_EXPERIMENT_HPP
