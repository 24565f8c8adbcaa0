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
// Serial versus OpenMP batch throughput, plus a single evaluation SDP solve.

#include <benchmark/benchmark.h>

#include "safe_adp/constrained_pi.hpp"
#include "safe_adp/experiment.hpp"
#include "safe_adp/lqr.hpp"
#include "safe_adp/sdp.hpp"

namespace {

using namespace safe_adp;

ExperimentConfig batch_config() {
    ExperimentConfig cfg = load_experiment_config(SAFE_ADP_CONFIG_DIR "/two_state.json");
    cfg.horizon = 80;
    return cfg;
}

void BM_BatchSerial(benchmark::State& state) {
    const ExperimentConfig cfg = batch_config();
    const int count = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_batch(cfg, count, false));
    state.SetItemsProcessed(state.iterations() * count);
}

void BM_BatchParallel(benchmark::State& state) {
    const ExperimentConfig cfg = batch_config();
    const int count = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_batch(cfg, count, true));
    state.SetItemsProcessed(state.iterations() * count);
}

void BM_ModelBasedSdp(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    const LinearSystem sys = random_controllable_system(n, 1, {0.8, 1.0}, 11);
    const CostSpec cost(Matrix::Identity(n, n), 0.5 * Matrix::Identity(1, 1));
    const Matrix K = solve_dare(sys, CostSpec(Matrix::Identity(n, n), 5.0 * Matrix::Identity(1, 1))).K_inf;
    AdpConfig cfg;
    cfg.p_min = 1e-3;
    cfg.p_max = 1e3;
    cfg.lambda = 0.9999;
    const ConstraintSet cs = ConstraintSet::box(n, 1, 10.0, 10.0);
    const SdpProblem prob = build_model_based_problem(sys, cost, cs, K, Vector::Constant(n, 0.1), cfg);
    for (auto _ : state) benchmark::DoNotOptimize(solve(prob));
}

}  // namespace

BENCHMARK(BM_BatchSerial)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelBasedSdp)->Arg(2)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
