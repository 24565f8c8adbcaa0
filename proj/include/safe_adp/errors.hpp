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
#ifndef SAFE_ADP_ERRORS_HPP
#define SAFE_ADP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace safe_adp {

/// Dimension or argument contract broken by the caller.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an algorithm does not hold (e.g. x0 outside
/// the initial invariant set, or an inadmissible incumbent gain).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class SystemGenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when no admissible level set of the synthesized Lyapunov matrix
/// contains the requested state.
class SynthesisError : public std::runtime_error {
public:
    SynthesisError(const std::string& what, double max_feasible_rho)
        : std::runtime_error(what), max_feasible_rho_(max_feasible_rho) {}
    double max_feasible_rho() const noexcept { return max_feasible_rho_; }

private:
    double max_feasible_rho_;
};

class NotStabilizableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Closed loop A + BK is not Schur stable.
class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Collected data is not persistently exciting.
class PeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A visited state or applied input left the admissible polytope.
class SafetyViolation : public std::runtime_error {
public:
    SafetyViolation(const std::string& what, long step, double slack)
        : std::runtime_error(what), step_(step), slack_(slack) {}
    long step() const noexcept { return step_; }
    /// Largest row value minus one at the offending step.
    double slack() const noexcept { return slack_; }

private:
    long step_;
    double slack_;
};

/// Malformed experiment configuration or input file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace safe_adp

#endif  // SAFE_ADP_ERRORS_HPP
