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

#ifndef DSNGD_HARNESS_HPP_
#define DSNGD_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsngd/lexyf.hpp"
#include "dsngd/optimizers.hpp"

namespace dsngd::harness {

/// Everything a run needs, validated as a unit before anything executes.
struct ExperimentConfig {
  int s = 2;
  int m = 2;
  lexyf::ClassStatKind stat = lexyf::ClassStatKind::kMinimalStandard;
  std::vector<optimizers::Algorithm> algorithms;
  optimizers::Schedule schedule = optimizers::Schedule::defaults();
  std::int64_t steps = 0;
  std::int64_t eval_every = 1000;
  std::uint64_t seed = 0;
  double kappa = 1.0;
  std::string truth_path;
  std::string out_dir;
};

/// Throws ErrorCode::kConfig with a single aggregate message on any invalid
/// field combination.
void validate(const ExperimentConfig& config);

lexyf::ModelSpec spec_from_config(const ExperimentConfig& config);

/// Stable fingerprint over every config field; changes iff a field changes.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Fixed-width roundtrip-exact decimal form used in all emitted numbers.
std::string format_double(double v);

/// Ground-truth JSON: {"s": int, "m": int, "table": row-major m*s array}
/// (x-major: table[x*s + y]).
lexyf::GroundTruth load_ground_truth(const std::string& path);
void save_ground_truth(const lexyf::GroundTruth& truth,
                       const std::string& path);

enum class GenMode { kInModel, kTable };

struct GeneratedTruth {
  lexyf::GroundTruth truth;
  /// Present in in-model mode: the parameters whose joint the table is.
  std::optional<lexyf::NaturalParams> generator;
};

/// in-model: natural parameters uniform in [-2, 2] under a minimal-standard
/// spec, table = enumerated joint. table: Dirichlet(1) over all cells.
/// Deterministic given seed.
GeneratedTruth gen_ground_truth(int s, int m, GenMode mode,
                                std::uint64_t seed);

/// Trace CSV with the exact header t,expected_nll,expected_kl,step_time_ns.
void write_trace_csv(const optimizers::RunTrace& trace,
                     const std::string& path);
std::vector<optimizers::TraceRow> read_trace_csv(const std::string& path);

/// Metadata sidecar naming convention: alongside <name>.csv sits
/// <name>.meta.json.
std::string sidecar_path(const std::string& csv_path);
void write_trace_metadata(const ExperimentConfig& config,
                          const optimizers::RunTrace& trace,
                          const std::string& csv_path);

struct RunArtifacts {
  std::vector<optimizers::RunTrace> traces;
  std::vector<std::string> csv_paths;
};

/// Runs every configured algorithm against the same ground truth with the
/// same seed, so all algorithms consume the identical sample stream. Writes
/// <out_dir>/<algo>.csv plus sidecar per algorithm.
RunArtifacts run_experiment(const ExperimentConfig& config,
                            const lexyf::GroundTruth& truth);

struct TraceSummary {
  std::string file;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::uint64_t stream_hash = 0;
  std::uint64_t config_hash = 0;
  bool diverged = false;
  std::int64_t steps_completed = 0;
  std::int64_t clamp_events = 0;
  double final_nll = 0.0;
  double final_kl = 0.0;
  std::int64_t median_step_ns = 0;
};

/// Reads a trace CSV and its sidecar back into a summary.
TraceSummary summarize_trace(const std::string& csv_path);

/// Renders a comparison table; sets *streams_match to whether all summaries
/// share one stream hash (the shared-stream contract across algorithms).
std::string compare_report(const std::vector<TraceSummary>& summaries,
                           bool* streams_match);

}  // namespace dsngd::harness

#endif  // DSNGD_HARNESS_HPP_
