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

#ifndef DSNGD_BENCH_HPP_
#define DSNGD_BENCH_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dsngd::bench {

/// The oracle factors and solves a dense Fisher matrix per step; above this
/// parameter count a ≥10⁴-step benchmark stops being a desk-scale affair, so
/// oracle rows are only produced up to here. The explicit methods run the
/// full ladder.
inline constexpr int kOracleMaxDim = 300;

/// Default (s, m) ladder: few classes, growing feature alphabet, twelve
/// log-spaced rungs. Parameter counts (s-1) + s(m-1) run from 11 to 2007,
/// covering the s·t range 10..2000 used by the cost criterion.
std::vector<std::pair<int, int>> default_sizes();

struct BenchRow {
  int s = 0;
  int m = 0;
  int dim = 0;  // parameter count
  std::string algo;
  std::int64_t median_step_ns = 0;
  std::int64_t steps = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double sgd_slope = 0.0;    // log median time vs log parameter count
  double dsngd_slope = 0.0;
  double sngd_slope = 0.0;
  double max_ratio_dsngd_sgd = 0.0;  // worst per-size median ratio

  std::string csv() const;      // s,m,dim,algo,median_step_ns,steps
  std::string summary() const;  // slope fits and the ratio line
};

struct BenchOptions {
  std::uint64_t seed = 2026;
  std::int64_t warmup_steps = 1000;   // discarded
  std::int64_t measure_steps = 10240; // timed, median over 64-step chunks
};

/// Times sgd, dsngd, and the sngd oracle at each size on a shared pre-drawn
/// sample stream (common random numbers), then fits log-log slopes per
/// algorithm by least squares.
BenchReport run_bench(const std::vector<std::pair<int, int>>& sizes,
                      const BenchOptions& opts = {});

}  // namespace dsngd::bench

#endif  // DSNGD_BENCH_HPP_
