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
#ifndef SAFE_ADP_CONSTRAINED_PI_HPP
#define SAFE_ADP_CONSTRAINED_PI_HPP

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safe_adp/constraints.hpp"
#include "safe_adp/linalg.hpp"
#include "safe_adp/linear_system.hpp"
#include "safe_adp/lqr.hpp"
#include "safe_adp/sdp.hpp"

namespace safe_adp {

/// Learning instants are the multiples of N; each cycle holds at least N samples.
struct LearningSchedule {
    int N = 8;

    LearningSchedule(int window = 8);  // NOLINT(google-explicit-constructor)
    bool is_learning_instant(long t) const noexcept { return t > 0 && t % N == 0; }
};

enum class EvaluationMode { model_based, data_driven };

/// How the gradient gate compares ||g_t|| against epsilon.
enum class GateMode {
    absolute,  ///< ||g_t|| <= epsilon
    relative   ///< ||g_t|| <= epsilon * ||x_t||^2
};

struct AdpConfig {
    double p_min = 0.0;
    double p_max = 0.0;
    double lambda = 0.0;
    double rho_weight = 1e-3;          ///< weight on rho in the data-driven objective
    double beta = 0.5;                 ///< backtracking factor
    double epsilon = 0.1;              ///< gradient gate threshold
    GateMode gate = GateMode::relative;
    double hessian_init_scale = 1e-4;  ///< RLS Hessian reset value q in H = q I
    double step_size = 1.0;            ///< RLS step size
    double rho_min = 1e-9;
    /// Data-driven mode: accept a gain update only when the next state,
    /// predicted with the drift identified from the logged transitions and
    /// widened by the worst exploration noise, stays in the active ellipsoid.
    bool lookahead_guard = true;
    SdpConfig sdp;

    /// Checks ranges and lambda < (p_min/p_max)^(2/N). Throws ContractViolation.
    void validate(const LearningSchedule& schedule) const;
};

/// (p_min/p_max)^(2/N)
double compute_lambda_bound(double p_min, double p_max, int N);

/// One logged closed-loop sample.
struct Sample {
    long t = 0;
    Vector x;       ///< state before the step
    Vector u;       ///< applied input K x + nu
    Matrix K;       ///< gain in force at time t
    Vector nu;      ///< exploration noise
    Vector x_next;  ///< measured successor state
};

/**
 * @brief Samples collected since the last successful evaluation.
 *
 * The noise-free successor x_next - B nu and the nominal input K x are
 * derived on demand from the stored sample.
 */
class LearningBuffer {
public:
    explicit LearningBuffer(Matrix B);

    void add(Sample s);
    void clear() noexcept { samples_.clear(); }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Matrix& B() const noexcept { return B_; }

    Vector nominal_successor(std::size_t i) const;  ///< x_next - B nu
    Vector nominal_input(std::size_t i) const;      ///< K x

private:
    Matrix B_;
    std::vector<Sample> samples_;
};

/// Rank test on the Kronecker difference rows x_t (x) x_t - x_{t+1} (x) x_{t+1}
/// restricted to symmetric matrices; true iff the rank is n(n+1)/2.
bool pe_check(const LearningBuffer& buffer);

/// The Kronecker difference matrix in svec coordinates (one row per sample).
Matrix pe_matrix(const LearningBuffer& buffer);

/// Raised when an evaluation SDP has no certified solution. The previous
/// ellipsoid is carried so that callers can keep using it.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(const std::string& what, Ellipsoid previous, SdpStatus status)
        : std::runtime_error(what), previous_(std::move(previous)), status_(status) {}
    const Ellipsoid& previous() const noexcept { return previous_; }
    SdpStatus status() const noexcept { return status_; }

private:
    Ellipsoid previous_;
    SdpStatus status_;
};

struct EvaluationResult {
    Ellipsoid ellipsoid;
    SdpSolution sdp;
};

/// Builds the model-based evaluation problem for gain K at state x.
SdpProblem build_model_based_problem(const LinearSystem& sys, const CostSpec& cost, const ConstraintSet& cs,
                                     const Matrix& K, const Vector& x, const AdpConfig& cfg);

/// Builds the data-driven evaluation problem from the buffer. Samples with a
/// zero state are skipped.
SdpProblem build_data_driven_problem(const LearningBuffer& buffer, const CostSpec& cost,
                                     const ConstraintSet& cs, const Vector& x_end, const Matrix& K,
                                     const AdpConfig& cfg,
                                     const std::optional<Matrix>& identified_drift = std::nullopt);

/**
 * Model-based policy evaluation: minimises the operator norm of the Bellman
 * residual subject to contraction, membership of x, admissibility of K and
 * the eigenvalue box [p_min, p_max]. rho is then raised to the largest admissible level.
 * Throws EvaluationError carrying `previous` when no certified solution is found.
 */
EvaluationResult evaluate_policy_model_based(const LinearSystem& sys, const CostSpec& cost,
                                             const ConstraintSet& cs, const Matrix& K, const Vector& x,
                                             const AdpConfig& cfg, const Ellipsoid& previous);

/// Data-driven counterpart. Throws PeError when pe_check fails.
EvaluationResult evaluate_policy_data_driven(const LearningBuffer& buffer, const CostSpec& cost,
                                             const ConstraintSet& cs, const Vector& x_end, const Matrix& K,
                                             const AdpConfig& cfg, const Ellipsoid& previous,
                                             const std::optional<Matrix>& identified_drift = std::nullopt);

/// Greedy gain -(R + B^T P B)^{-1} B^T P A.
Matrix ideal_improvement(const Matrix& P_next, const LinearSystem& sys, const CostSpec& cost);

struct BacktrackResult {
    Matrix K;
    double alpha = 1.0;  ///< step along K_t + alpha (K_star - K_t); 0 when the cap was hit
    int iterations = 0;
};

/**
 * Shrinks the step from K_t towards K_star by factors of beta until the gain
 * is admissible for `e` (and passes `extra` when given). After 100 halvings
 * K_t itself is returned. Throws PreconditionError when K_t fails the test.
 */
BacktrackResult backtrack_policy(const Matrix& K_star, const Matrix& K_t, const Ellipsoid& e,
                                 const ConstraintSet& cs, double beta,
                                 const std::function<bool(const Matrix&)>& extra = {});

struct RlsState {
    Matrix H;
    Matrix H_inv;
    Vector g;
    Matrix K;
    int resets = 0;
};

/// H = H_inv^{-1} = scale * I, g = 0.
RlsState rls_init(const Matrix& K, double hessian_init_scale);

struct RlsSample {
    Vector x;               ///< state
    Vector u_nominal;       ///< K x
    Vector x_next_nominal;  ///< x_next - B nu
};

/// Gradient x (x) (R u_nominal + B^T P x_next_nominal).
Vector rls_gradient(const RlsSample& s, const Matrix& P_next, const CostSpec& cost, const Matrix& B);

struct RlsStepOptions {
    double step_size = 1.0;
    double beta = 0.5;
    double hessian_init_scale = 1e-4;
    const Ellipsoid* ellipsoid = nullptr;        ///< backtrack against this set when given
    const ConstraintSet* constraints = nullptr;
    /// Extra acceptance test for the backtracked gain. When the incumbent
    /// gain fails it, the full step is taken if it passes and the incumbent
    /// is kept otherwise.
    std::function<bool(const Matrix&)> accept;
};

/**
 * One recursive least-squares Newton step: accumulates x x^T (x) (R + B^T P B)
 * into H, keeps H^{-1} by Sherman-Morrison updates, and moves vec(K) by
 * -step_size H^{-1} g. The step is backtracked when an ellipsoid is supplied.
 */
RlsState rls_improvement_step(const RlsState& state, const RlsSample& sample, const Matrix& P_next,
                              const CostSpec& cost, const Matrix& B, const RlsStepOptions& opt);

/**
 * Least-squares estimate of the drift matrix from logged transitions.
 *
 * With B known and the applied input measured, every transition gives
 * A x = x_next - B u exactly, so the estimate is exact once the logged states
 * span R^n. estimate() returns nothing before that.
 */
class DriftEstimator {
public:
    explicit DriftEstimator(Matrix B);

    void add(const Vector& x, const Vector& u, const Vector& x_next);
    std::optional<Matrix> estimate() const;
    std::size_t size() const noexcept { return count_; }

private:
    Matrix B_;
    Matrix xx_;
    Matrix zx_;
    std::size_t count_ = 0;
};

/// Largest singular value of I - P^{-1/2} (Q + K^T R K) P^{-1/2} at the LQR solution.
double convergence_lambda_floor(const LqrSolution& lqr, const CostSpec& cost);

/// p_min <= sigma_min(P_inf) <= p_max (literal form) and
/// p_min <= sigma_min(P_inf), sigma_max(P_inf) <= p_max.
struct BoxCheck {
    bool literal = false;
    bool spectral = false;
};
BoxCheck convergence_box_check(const Matrix& P_inf, double p_min, double p_max);

struct StepRecord {
    long t = 0;
    Vector x;
    Vector u;
    Vector nu;
    Matrix K;
    int ellipsoid_id = 0;
    double value = 0.0;          ///< x^T P x for the active ellipsoid
    double policy_error = -1.0;  ///< ||K - K_ref||_2 when a reference is given
    double max_violation = -1.0;
    bool gated = false;
};

struct LearningEvent {
    long t = 0;  ///< learning instant
    bool pe_passed = false;
    bool success = false;
    std::string status;
    int sdp_iterations = 0;
    std::size_t samples = 0;
    int ellipsoid_id = -1;  ///< id of the new ellipsoid on success
};

struct EpisodeSpec {
    LinearSystem sys;
    CostSpec cost;
    ConstraintSet constraints;         ///< constraints checked on every step
    ConstraintSet design_constraints;  ///< constraints used by evaluation and backtracking
    Matrix K0;
    Ellipsoid cais0;
    Vector x0;
    LearningSchedule schedule;
    ExplorationNoise noise;
    AdpConfig cfg;
    long horizon = 0;
    EvaluationMode mode = EvaluationMode::data_driven;
    std::optional<Matrix> K_reference;
    /// Certified contraction factor of K0 on cais0, used to bound the next
    /// state before the drift can be identified from data.
    double cais0_contraction = 1.0;
};

struct EpisodeLog {
    std::vector<StepRecord> steps;
    std::vector<Ellipsoid> ellipsoids;  ///< id i is ellipsoids[i]; id 0 is the initial set
    std::vector<long> learning_instants;  ///< successful evaluations only
    std::vector<LearningEvent> events;
    Vector x_final;
    Matrix K_final;
    double max_violation = -1.0;
    long ellipsoid_exits = 0;          ///< visited states outside the active ellipsoid
    long contraction_violations = 0;   ///< emitted gains failing the invariance test
    int hessian_resets = 0;
    std::vector<std::string> warnings;
};

/// Runs the constrained learning loop. Throws SafetyViolation when a visited
/// state or applied input leaves the constraint set by more than 1e-9 and
/// PreconditionError when x0 is not in cais0 or K0 is not admissible for it.
EpisodeLog run_constrained_adp(const EpisodeSpec& spec);

struct DecreaseReport {
    long states_checked = 0;
    long states_outside = 0;
    long cycles_checked = 0;
    long decrease_checks = 0;
    long decrease_failures = 0;
    double worst_ratio = 0.0;  ///< largest V_P(end) / V_P(start) observed
    bool ok() const noexcept { return states_outside == 0 && decrease_failures == 0; }
};

/**
 * Checks that every visited state lies in its active ellipsoid and that, for
 * every learned P inside the eigenvalue box [p_min, p_max], V_P decreases across each cycle
 * between consecutive learning instants. The cycle end state is obtained by
 * propagating the cycle start state through the logged gains without noise.
 */
DecreaseReport check_value_decrease(const EpisodeLog& log, const LinearSystem& sys, const AdpConfig& cfg,
                              double rel_tol = 1e-9);

}  // namespace safe_adp

#endif  // SAFE_ADP_CONSTRAINED_PI_HPP
