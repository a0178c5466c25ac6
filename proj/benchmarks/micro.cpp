// Copyright 2026 The DSNGD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Microbenchmarks for the kernels on the per-step path. The `bench`
// subcommand remains the authority on per-step cost (it times whole steps on
// a shared sample stream); these isolate the pieces when a regression shows
// up there.

#include <benchmark/benchmark.h>

#include <utility>
#include <vector>

#include "dsngd/gradients.hpp"
#include "dsngd/lexyf.hpp"
#include "dsngd/optimizers.hpp"
#include "dsngd/random.hpp"

namespace {

using namespace dsngd;
using namespace dsngd::lexyf;

// (s, m) per benchmark size argument; spans the default ladder's range.
std::pair<int, int> size_arg(std::int64_t idx) {
  static const std::vector<std::pair<int, int>> sizes = {
      {2, 6}, {3, 16}, {5, 41}, {6, 152}, {8, 251}};
  return sizes[static_cast<std::size_t>(idx)];
}

void apply_size_args(benchmark::internal::Benchmark* b) {
  for (std::int64_t i = 0; i < 5; ++i) {
    b->Arg(i);
  }
}

NaturalParams mid_params(const ModelSpec& spec) {
  Rng rng(99);
  NaturalParams eta = NaturalParams::zero(spec);
  for (int i = 0; i < eta.alpha.size(); ++i) {
    eta.alpha(i) = uniform(rng, -0.5, 0.5);
  }
  for (int i = 0; i < eta.beta.size(); ++i) {
    eta.beta(i) = uniform(rng, -0.5, 0.5);
  }
  return eta;
}

void BM_Conditional(benchmark::State& state) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  const NaturalParams eta = mid_params(spec);
  Eigen::VectorXd scratch(s), out(s);
  int x = 0;
  for (auto _ : state) {
    conditional_y_given_x_into(spec, eta, x, scratch, out);
    benchmark::DoNotOptimize(out.data());
    x = (x + 1) % m;
  }
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}
BENCHMARK(BM_Conditional)->Apply(apply_size_args);

void BM_LogPartition(benchmark::State& state) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  const NaturalParams eta = mid_params(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_partition(spec, eta));
  }
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}
BENCHMARK(BM_LogPartition)->Apply(apply_size_args);

void BM_NaturalToExpectation(benchmark::State& state) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  const NaturalParams eta = mid_params(spec);
  for (auto _ : state) {
    const ExpectationParams ep = natural_to_expectation(spec, eta);
    benchmark::DoNotOptimize(ep.alpha_star.data());
  }
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}
BENCHMARK(BM_NaturalToExpectation)->Apply(apply_size_args);

void BM_EstimatorDecode(benchmark::State& state) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  optimizers::DualEstimator est(spec, 1.0);
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    est.observe(spec, static_cast<int>(rng() % m), static_cast<int>(rng() % s));
  }
  ExpectationParams ep;
  Eigen::VectorXd probs;
  for (auto _ : state) {
    benchmark::DoNotOptimize(est.decode(spec, ep, probs));
  }
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}
BENCHMARK(BM_EstimatorDecode)->Apply(apply_size_args);

void BM_DualBlocksApply(benchmark::State& state) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  const NaturalParams eta = mid_params(spec);
  const ExpectationParams ep = natural_to_expectation(spec, eta);
  const Eigen::VectorXd class_probs =
      joint_table(spec, eta).colwise().sum().transpose();
  gradients::DualGradBlocks blocks = gradients::DualGradBlocks::sized(spec);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(s);
  q(0) = 1.0 - 1.0 / s;
  for (int y = 1; y < s; ++y) {
    q(y) = -1.0 / s;
  }
  NaturalParams out = eta;
  int x = 0;
  for (auto _ : state) {
    gradients::grad_h_dual_into(spec, ep, class_probs, x, blocks);
    gradients::apply_dsngd_direction(blocks, q, 1e-9, out);
    benchmark::DoNotOptimize(out.alpha.data());
    x = (x + 1) % m;
  }
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}
BENCHMARK(BM_DualBlocksApply)->Apply(apply_size_args);

void step_benchmark(benchmark::State& state, optimizers::Algorithm algo) {
  const auto [s, m] = size_arg(state.range(0));
  const ModelSpec spec = ModelSpec::minimal_standard(s, m);
  // Vanishing step size pins the iterate so the timed work stays at a fixed
  // parameter point instead of wandering with the optimization.
  optimizers::OptimizerState st(spec, algo,
                                optimizers::Schedule::constant(1e-10),
                                NaturalParams::zero(spec));
  Rng rng(7);
  std::vector<std::pair<int, int>> draws(4096);
  for (auto& d : draws) {
    d = {static_cast<int>(rng() % m), static_cast<int>(rng() % s)};
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto [x, y] = draws[i];
    st.step(x, y);
    i = (i + 1) & 4095;
  }
  benchmark::DoNotOptimize(st.params().alpha.data());
  state.SetLabel("dim=" + std::to_string(spec.dim()));
}

void BM_StepSgd(benchmark::State& state) {
  step_benchmark(state, optimizers::Algorithm::kSgd);
}
BENCHMARK(BM_StepSgd)->Apply(apply_size_args);

void BM_StepDsngd(benchmark::State& state) {
  step_benchmark(state, optimizers::Algorithm::kDsngd);
}
BENCHMARK(BM_StepDsngd)->Apply(apply_size_args);

// Dense Fisher assembly plus Cholesky solve: the oracle's per-step work.
// Kept to the small end of the ladder; it is O(dim^3).
void BM_StepSngdOracle(benchmark::State& state) {
  step_benchmark(state, optimizers::Algorithm::kSngdOracle);
}
BENCHMARK(BM_StepSngdOracle)->Arg(0)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
