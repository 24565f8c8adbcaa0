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
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "safe_adp/errors.hpp"
#include "safe_adp/experiment.hpp"
#include "safe_adp/lqr.hpp"
#include "safe_adp/report.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSafety = 3;
constexpr int kExitOracle = 4;

// Maps the library's exception types onto the process exit codes.
template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const safe_adp::SafetyViolation& e) {
        std::cerr << "safety violation: " << e.what() << '\n';
        return kExitSafety;
    } catch (const safe_adp::NotStabilizableError& e) {
        std::cerr << "oracle failure: " << e.what() << '\n';
        return kExitOracle;
    } catch (const safe_adp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const safe_adp::PreconditionError& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const safe_adp::ContractViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const safe_adp::SynthesisError& e) {
        std::cerr << "precondition error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const safe_adp::SystemGenerationError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInternal;
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    using namespace safe_adp;
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const PreparedEpisode prep = prepare_episode(cfg, cfg.seed);
    for (const auto& w : prep.warnings) std::cerr << "warning: " << w << '\n';
    const EpisodeLog log = run_constrained_adp(prep.spec);
    write_episode_outputs(out_dir, cfg, prep, log);
    const RunRecord rec = summarize_run(cfg, prep, log);
    std::cout << "steps " << log.steps.size() << ", learning cycles " << log.learning_instants.size()
              << ", final policy error " << io::format_double(rec.final_policy_error) << ", max violation "
              << io::format_double(log.max_violation) << '\n';
    return kExitOk;
}

int cmd_batch(const std::string& config_path, int count, const std::string& out_dir, bool serial) {
    using namespace safe_adp;
    if (count < 1) throw ConfigError("batch: --count must be >= 1");
    const ExperimentConfig cfg = load_experiment_config(config_path);
    const BatchReport report = run_batch(cfg, count, !serial);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path d(out_dir);
    io::write_text_file((d / "batch_report.json").string(), batch_report_json(cfg, report).dump(2) + "\n");
    io::write_text_file((d / "batch_policy_error.svg").string(),
                        batch_policy_error_svg(report, cfg.convergence_tol));
    std::cout << "runs " << report.runs.size() << ", converged fraction "
              << io::format_double(report.fraction_converged) << ", median convergence time "
              << io::format_double(report.median_convergence_time) << ", all safe "
              << (report.all_safe ? "yes" : "no") << '\n';
    for (const auto& r : report.runs)
        if (!r.error.empty()) std::cerr << "seed " << r.seed << ": " << r.error << '\n';
    return report.all_safe ? kExitOk : kExitSafety;
}

int cmd_oracle(const std::string& system_path, const std::string& cost_path) {
    using namespace safe_adp;
    LinearSystem sys = [&] {
        try {
            return io::system_from_json(io::read_json_file(system_path));
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }();
    CostSpec cost = [&] {
        try {
            return io::cost_from_json(io::read_json_file(cost_path));
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
    }();
    if (cost.Q.rows() != sys.n() || cost.R.rows() != sys.m())
        throw ConfigError("oracle: cost dimensions do not match the system");
    LqrSolution sol;
    try {
        sol = solve_dare(sys, cost);
    } catch (const ConvergenceError& e) {
        throw NotStabilizableError(e.what());
    } catch (const InstabilityError& e) {
        throw NotStabilizableError(e.what());
    }
    std::cout << io::lqr_to_json(sol).dump(2) << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safety-constrained approximate dynamic programming for discrete LTI systems"};
    app.require_subcommand(1);

    std::string run_config, run_out;
    auto* run = app.add_subcommand("run", "Run one episode and write trajectory, report and plots");
    run->add_option("--config", run_config, "Experiment configuration (JSON)")->required();
    run->add_option("--out", run_out, "Output directory")->required();

    std::string batch_config, batch_out;
    int batch_count = 1;
    bool batch_serial = false;
    auto* batch = app.add_subcommand("batch", "Run seeded episodes over random systems");
    batch->add_option("--config", batch_config, "Experiment configuration (JSON)")->required();
    batch->add_option("--count", batch_count, "Number of episodes")->required();
    batch->add_option("--out", batch_out, "Output directory")->required();
    batch->add_flag("--serial", batch_serial, "Run the episodes on one thread");

    std::string oracle_system, oracle_cost;
    auto* oracle = app.add_subcommand("oracle", "Print the infinite-horizon LQR solution");
    oracle->add_option("--system", oracle_system, "System JSON with A and B")->required();
    oracle->add_option("--cost", oracle_cost, "Cost JSON with Q and R")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (*run) return guarded([&] { return cmd_run(run_config, run_out); });
    if (*batch) return guarded([&] { return cmd_batch(batch_config, batch_count, batch_out, batch_serial); });
    return guarded([&] { return cmd_oracle(oracle_system, oracle_cost); });
}
