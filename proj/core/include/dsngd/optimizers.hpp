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

#ifndef DSNGD_OPTIMIZERS_HPP_
#define DSNGD_OPTIMIZERS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsngd/gradients.hpp"
#include "dsngd/lexyf.hpp"
#include "dsngd/random.hpp"

namespace dsngd::optimizers {

/// Iterates whose sup-norm exceeds this are treated as diverged.
inline constexpr double kDivergenceGuard = 1e6;

enum class ScheduleKind { kConstant, kInverseT, kInverseSqrtT };

/// gamma_t: c (constant), c t0 / (t0 + t) (inverse-t), or
/// c sqrt(t0 / (t0 + t)) (inverse-sqrt-t). Normalized so gamma_0 = c for
/// every kind; the decaying kinds need t0 > 0 and are nonincreasing. An
/// unnormalized c' / (t0 + t) is expressed as inverse_t(c' / t0, t0).
struct Schedule {
  ScheduleKind kind = ScheduleKind::kInverseT;
  double c = 1.0;
  double t0 = 10.0;

  static Schedule constant(double c);
  static Schedule inverse_t(double c, double t0);
  static Schedule inverse_sqrt_t(double c, double t0);
  /// The convergence-run default: inverse-t, c = 1, t0 = 10.
  static Schedule defaults() { return Schedule{}; }
};

double schedule_value(const Schedule& s, std::int64_t t);

enum class Algorithm { kSgd, kDsngd, kSngdOracle };

std::string algorithm_name(Algorithm a);
std::optional<Algorithm> algorithm_from_name(const std::string& name);

/// The independent dual sequence of DSNGD: a running sum of observed stacked
/// statistics blended with a fixed interior prior point under pseudo-count
/// kappa. decode() yields (kappa * prior + sum) / (kappa + n), which
/// converges to the data distribution's expectation parameters; kappa > 0
/// keeps every decode strictly interior for moderate n, and the clamp
/// covers the rest.
class DualEstimator {
 public:
  /// Prior defaults to the dual point of the uniform model (eta = 0).
  DualEstimator(const lexyf::ModelSpec& spec, double kappa);
  DualEstimator(const lexyf::ModelSpec& spec, double kappa,
                const lexyf::ExpectationParams& prior);

  void observe(const lexyf::ModelSpec& spec, int x, int y);

  /// Writes the blended-and-clamped decode into out and its class
  /// probabilities into class_probs (shapes must match the spec). Returns
  /// the number of clamped coordinates, usually 0.
  int decode(const lexyf::ModelSpec& spec, lexyf::ExpectationParams& out,
             Eigen::VectorXd& class_probs) const;

  std::int64_t count() const { return n_; }
  double kappa() const { return kappa_; }

 private:
  double kappa_;
  std::int64_t n_ = 0;
  Eigen::VectorXd prior_;
  Eigen::VectorXd sum_;
};

struct EstimatorConfig {
  double kappa = 1.0;
  /// When set, replaces the uniform-model prior; with a large kappa this
  /// pins the decoded dual point, which is how the oracle-equivalence tests
  /// freeze the estimator.
  std::optional<lexyf::ExpectationParams> prior;
};

/// One optimization run's mutable state. step() consumes one sample and
/// performs the algorithm's update; all scratch is preallocated so steps do
/// not allocate.
class OptimizerState {
 public:
  OptimizerState(const lexyf::ModelSpec& spec, Algorithm algo,
                 const Schedule& schedule, lexyf::NaturalParams init,
                 const EstimatorConfig& estimator = {});

  /// Applies one update on sample (x, y) and advances t. Throws
  /// ErrorCode::kDivergence when the iterate leaves the guard region.
  void step(int x, int y);

  const lexyf::ModelSpec& spec() const { return spec_; }
  Algorithm algorithm() const { return algo_; }
  const Schedule& schedule() const { return schedule_; }
  const lexyf::NaturalParams& params() const { return eta_; }
  std::int64_t t() const { return t_; }
  std::int64_t clamp_events() const { return clamps_.events; }
  const DualEstimator* estimator() const {
    return estimator_ ? &*estimator_ : nullptr;
  }

 private:
  void step_sgd(int x, int y);
  void step_dsngd(int x, int y);
  void step_sngd_oracle(int x, int y);
  void divergence_guard() const;

  lexyf::ModelSpec spec_;
  Algorithm algo_;
  Schedule schedule_;
  lexyf::NaturalParams eta_;
  std::int64_t t_ = 0;
  lexyf::ClampCounter clamps_;
  std::optional<DualEstimator> estimator_;

  // Scratch, sized once at construction.
  Eigen::VectorXd exps_;
  Eigen::VectorXd cond_;
  Eigen::VectorXd q_;
  Eigen::VectorXd class_probs_;
  lexyf::ExpectationParams dual_;
  gradients::DualGradBlocks blocks_;
  Eigen::VectorXd stacked_grad_;
  Eigen::VectorXd stacked_dir_;
  Eigen::MatrixXd fisher_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct TraceRow {
  std::int64_t t = 0;
  double expected_nll = 0.0;
  double expected_kl = 0.0;
  std::int64_t step_time_ns = 0;
};

struct RunTrace {
  Algorithm algorithm = Algorithm::kSgd;
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  bool diverged = false;
  std::int64_t steps_completed = 0;
  std::int64_t clamp_events = 0;
  /// Hash of the drawn sample sequence; equal across algorithms sharing a
  /// seed and ground truth.
  std::uint64_t stream_hash = 0;
  lexyf::NaturalParams final_params;
};

struct RunOptions {
  std::int64_t steps = 0;
  std::int64_t eval_every = 1000;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  /// Starting point; zero when absent.
  std::optional<lexyf::NaturalParams> init;
};

/// Streams samples from the ground truth, applies steps, and records exact
/// enumeration objectives at t = 0, every eval_every steps, and at the end.
/// step_time_ns is the median wall time of the steps since the previous
/// evaluation row (0 on the initial row). Divergence stops the run and
/// flags the partial trace. Deterministic given (config, seed) up to the
/// timing column.
RunTrace run(const lexyf::ModelSpec& spec, Algorithm algo,
             const Schedule& schedule, const lexyf::GroundTruth& truth,
             const RunOptions& opts);

}  // namespace dsngd::optimizers

#endif  // DSNGD_OPTIMIZERS_HPP_
