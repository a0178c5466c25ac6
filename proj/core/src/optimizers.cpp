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

#include "dsngd/optimizers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace dsngd::optimizers {

using lexyf::ExpectationParams;
using lexyf::GroundTruth;
using lexyf::ModelSpec;
using lexyf::NaturalParams;

namespace {

// Below this parameter count the per-step kernels use plain scalar loops:
// Eigen's per-expression setup would otherwise dominate sub-microsecond
// steps. Same arithmetic either way.
constexpr int kSmallKernelDim = 128;

void require_schedule(double c, double t0) {
  if (!(c > 0.0) || !(t0 >= 0.0) || !std::isfinite(c) || !std::isfinite(t0)) {
    throw Error(ErrorCode::kConfig,
                "Schedule: need c > 0 and finite t0 >= 0");
  }
}

}  // namespace

Schedule Schedule::constant(double c) {
  require_schedule(c, 0.0);
  return Schedule{ScheduleKind::kConstant, c, 0.0};
}

Schedule Schedule::inverse_t(double c, double t0) {
  require_schedule(c, t0);
  return Schedule{ScheduleKind::kInverseT, c, t0};
}

Schedule Schedule::inverse_sqrt_t(double c, double t0) {
  require_schedule(c, t0);
  return Schedule{ScheduleKind::kInverseSqrtT, c, t0};
}

double schedule_value(const Schedule& s, std::int64_t t) {
  if (t < 0) {
    throw Error(ErrorCode::kConfig, "schedule_value: negative step index");
  }
  switch (s.kind) {
    case ScheduleKind::kConstant:
      return s.c;
    case ScheduleKind::kInverseT: {
      if (s.t0 <= 0.0) {
        throw Error(ErrorCode::kConfig,
                    "schedule_value: inverse-t needs t0 > 0");
      }
      return s.c * s.t0 / (s.t0 + static_cast<double>(t));
    }
    case ScheduleKind::kInverseSqrtT: {
      if (s.t0 <= 0.0) {
        throw Error(ErrorCode::kConfig,
                    "schedule_value: inverse-sqrt needs t0 > 0");
      }
      return s.c * std::sqrt(s.t0 / (s.t0 + static_cast<double>(t)));
    }
  }
  throw Error(ErrorCode::kConfig, "schedule_value: unknown kind");
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kSgd:
      return "sgd";
    case Algorithm::kDsngd:
      return "dsngd";
    case Algorithm::kSngdOracle:
      return "sngd";
  }
  return "unknown";
}

std::optional<Algorithm> algorithm_from_name(const std::string& name) {
  if (name == "sgd") return Algorithm::kSgd;
  if (name == "dsngd") return Algorithm::kDsngd;
  if (name == "sngd") return Algorithm::kSngdOracle;
  return std::nullopt;
}

DualEstimator::DualEstimator(const ModelSpec& spec, double kappa)
    : DualEstimator(spec, kappa,
                    lexyf::natural_to_expectation(spec,
                                                  NaturalParams::zero(spec))) {}

DualEstimator::DualEstimator(const ModelSpec& spec, double kappa,
                             const ExpectationParams& prior)
    : kappa_(kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw Error(ErrorCode::kConfig,
                "DualEstimator: kappa must be positive and finite");
  }
  ExpectationParams interior = prior;
  if (lexyf::enforce_interior(spec, interior) > 0) {
    throw Error(ErrorCode::kConfig,
                "DualEstimator: prior point must be interior");
  }
  prior_ = lexyf::stack_expectation(spec, interior);
  sum_ = Eigen::VectorXd::Zero(spec.dim());
}

void DualEstimator::observe(const ModelSpec& spec, int x, int y) {
  if (x < 0 || x >= spec.m() || y < 0 || y >= spec.s()) {
    throw Error(ErrorCode::kDomainViolation,
                "DualEstimator::observe: cell out of range");
  }
  // Only the class block and the y-th feature segment of the stacked
  // statistic are nonzero; for the built-in statistics the class column is
  // a basis vector (or zero) as well.
  switch (spec.kind()) {
    case lexyf::ClassStatKind::kMinimalStandard:
      if (y < spec.s() - 1) {
        sum_(y) += 1.0;
      }
      break;
    case lexyf::ClassStatKind::kOneHot:
      sum_(y) += 1.0;
      break;
    case lexyf::ClassStatKind::kCustom:
      sum_.head(spec.alpha_dim()) += spec.class_stat().col(y);
      break;
  }
  if (x < spec.t()) {
    sum_(spec.alpha_dim() + y * spec.t() + x) += 1.0;
  }
  ++n_;
}

int DualEstimator::decode(const ModelSpec& spec, ExpectationParams& out,
                          Eigen::VectorXd& class_probs) const {
  const double denom = kappa_ + static_cast<double>(n_);

  const int s = spec.s();
  const int a = spec.alpha_dim();
  const int t = spec.t();
  if (out.alpha_star.size() != a) {
    out.alpha_star.resize(a);
  }
  if (out.beta_star.rows() != s || out.beta_star.cols() != t) {
    out.beta_star.resize(s, t);
  }
  if (class_probs.size() != s) {
    class_probs.resize(s);
  }

  // Interiority test in beta* terms (theta_ij = beta*_ij / p_i):
  // p_i >= eps, beta*_ij >= eps p_i, and row sums <= (1 - 2 eps) p_i.
  bool interior = true;
  if (spec.dim() <= kSmallKernelDim &&
      spec.kind() != lexyf::ClassStatKind::kCustom) {
    // Scalar path: at these sizes per-expression setup costs more than the
    // arithmetic. Fuses the blend, the class probabilities, and the
    // interiority scan into one sweep.
    const double* pr = prior_.data();
    const double* su = sum_.data();
    double asum = 0.0;
    for (int i = 0; i < a; ++i) {
      const double v = (kappa_ * pr[i] + su[i]) / denom;
      out.alpha_star(i) = v;
      class_probs(i) = v;
      asum += v;
    }
    if (spec.kind() == lexyf::ClassStatKind::kMinimalStandard) {
      class_probs(s - 1) = 1.0 - asum;
    }
    for (int i = 0; i < s; ++i) {
      interior = interior && class_probs(i) >= lexyf::kInteriorEps;
    }
    for (int i = 0; i < s; ++i) {
      const double pi = class_probs(i);
      const double* prow = pr + a + i * t;
      const double* srow = su + a + i * t;
      double row_sum = 0.0;
      double row_min = std::numeric_limits<double>::infinity();
      for (int j = 0; j < t; ++j) {
        const double v = (kappa_ * prow[j] + srow[j]) / denom;
        out.beta_star(i, j) = v;
        row_sum += v;
        row_min = std::min(row_min, v);
      }
      interior = interior && row_min >= lexyf::kInteriorEps * pi &&
                 row_sum <= (1.0 - 2.0 * lexyf::kInteriorEps) * pi;
    }
  } else {
    out.alpha_star = (kappa_ * prior_.head(a) + sum_.head(a)) / denom;
    for (int i = 0; i < s; ++i) {
      out.beta_star.row(i) = ((kappa_ * prior_.segment(a + i * t, t) +
                               sum_.segment(a + i * t, t)) /
                              denom)
                                 .transpose();
    }
    spec.class_probs_into(out.alpha_star, class_probs);
    interior = (class_probs.array() >= lexyf::kInteriorEps).all();
    if (interior) {
      for (int i = 0; i < s; ++i) {
        const double pi = class_probs(i);
        if ((out.beta_star.row(i).array() < lexyf::kInteriorEps * pi).any() ||
            out.beta_star.row(i).sum() >
                (1.0 - 2.0 * lexyf::kInteriorEps) * pi) {
          interior = false;
          break;
        }
      }
    }
  }
  if (interior) {
    return 0;
  }
  const int adjusted = lexyf::enforce_interior(spec, out);
  spec.class_probs_into(out.alpha_star, class_probs);
  return std::max(adjusted, 1);
}

OptimizerState::OptimizerState(const ModelSpec& spec, Algorithm algo,
                               const Schedule& schedule, NaturalParams init,
                               const EstimatorConfig& estimator)
    : spec_(spec), algo_(algo), schedule_(schedule), eta_(std::move(init)) {
  if (eta_.alpha.size() != spec_.alpha_dim() || eta_.beta.rows() != spec_.s() ||
      eta_.beta.cols() != spec_.t()) {
    throw Error(ErrorCode::kConfig,
                "OptimizerState: initial point shape does not match spec");
  }
  if (!eta_.alpha.allFinite() || !eta_.beta.allFinite()) {
    throw Error(ErrorCode::kConfig,
                "OptimizerState: initial point must be finite");
  }
  if (algo_ == Algorithm::kSngdOracle && !spec_.minimal()) {
    throw Error(ErrorCode::kConfig,
                "OptimizerState: the SNGD oracle needs an invertible Fisher "
                "matrix; one-hot specs are not supported");
  }

  exps_.setZero(spec_.s());
  cond_.setZero(spec_.s());
  q_.setZero(spec_.s());
  class_probs_.setZero(spec_.s());
  if (algo_ == Algorithm::kDsngd) {
    if (estimator.prior) {
      estimator_.emplace(spec_, estimator.kappa, *estimator.prior);
    } else {
      estimator_.emplace(spec_, estimator.kappa);
    }
    dual_.alpha_star.setZero(spec_.alpha_dim());
    dual_.beta_star.setZero(spec_.s(), spec_.t());
    blocks_ = gradients::DualGradBlocks::sized(spec_);
  }
  if (algo_ == Algorithm::kSngdOracle) {
    stacked_grad_.setZero(spec_.dim());
    stacked_dir_.setZero(spec_.dim());
    fisher_.setZero(spec_.dim(), spec_.dim());
  }
}

void OptimizerState::step(int x, int y) {
  switch (algo_) {
    case Algorithm::kSgd:
      step_sgd(x, y);
      break;
    case Algorithm::kDsngd:
      step_dsngd(x, y);
      break;
    case Algorithm::kSngdOracle:
      step_sngd_oracle(x, y);
      break;
  }
  divergence_guard();
  ++t_;
}

void OptimizerState::step_sgd(int x, int y) {
  lexyf::conditional_y_given_x_into(spec_, eta_, x, exps_, cond_);
  gradients::q_vector_into(cond_, y, q_);
  gradients::apply_sgd_direction(spec_, q_, x, schedule_value(schedule_, t_),
                                 eta_);
}

void OptimizerState::step_dsngd(int x, int y) {
  estimator_->observe(spec_, x, y);
  clamps_.events += estimator_->decode(spec_, dual_, class_probs_);
  gradients::grad_h_dual_into(spec_, dual_, class_probs_, x, blocks_);
  lexyf::conditional_y_given_x_into(spec_, eta_, x, exps_, cond_);
  gradients::q_vector_into(cond_, y, q_);
  const double gamma = schedule_value(schedule_, t_);
  if (x < spec_.m() - 1) {
    // Interior feature: d == 0, so the alpha part of the direction vanishes
    // and every beta diagonal is supported on feature x alone.
    for (int k = 0; k < spec_.s(); ++k) {
      eta_.beta(k, x) += (gamma * q_(k)) * blocks_.beta_diag(x, k);
    }
  } else {
    gradients::apply_dsngd_direction(blocks_, q_, gamma, eta_);
  }
}

void OptimizerState::step_sngd_oracle(int x, int y) {
  lexyf::conditional_y_given_x_into(spec_, eta_, x, exps_, cond_);
  gradients::q_vector_into(cond_, y, q_);
  const int a = spec_.alpha_dim();
  const int t = spec_.t();
  stacked_grad_.head(a).noalias() = spec_.class_stat() * q_;
  for (int k = 0; k < spec_.s(); ++k) {
    stacked_grad_.segment(a + k * t, t) =
        q_(k) * spec_.feature_stat().col(x);
  }

  fisher_ = lexyf::stacked_covariance(spec_, eta_);
  llt_.compute(fisher_);
  if (llt_.info() != Eigen::Success) {
    // The iterate left the region where the Fisher matrix is numerically
    // positive-definite (probabilities collapsed toward the boundary). For
    // the run loop this is a divergence of the oracle, not an internal bug.
    throw Error(ErrorCode::kDivergence,
                "sngd_oracle_step: Fisher matrix lost positive-definiteness "
                "at t=" + std::to_string(t_));
  }
  stacked_dir_ = llt_.solve(stacked_grad_);

  const double gamma = schedule_value(schedule_, t_);
  eta_.alpha += gamma * stacked_dir_.head(a);
  for (int k = 0; k < spec_.s(); ++k) {
    eta_.beta.row(k) += gamma * stacked_dir_.segment(a + k * t, t).transpose();
  }
}

void OptimizerState::divergence_guard() const {
  // |v| <= bound is false for NaN, so one pass covers both the finiteness
  // and the sup-norm condition.
  bool ok = true;
  if (spec_.dim() <= kSmallKernelDim) {
    const double* pa = eta_.alpha.data();
    const int na = static_cast<int>(eta_.alpha.size());
    for (int i = 0; i < na; ++i) {
      ok = ok && std::fabs(pa[i]) <= kDivergenceGuard;
    }
    const double* pb = eta_.beta.data();
    const int nb = static_cast<int>(eta_.beta.size());
    for (int i = 0; i < nb; ++i) {
      ok = ok && std::fabs(pb[i]) <= kDivergenceGuard;
    }
  } else {
    ok = (eta_.alpha.array().abs() <= kDivergenceGuard).all() &&
         (eta_.beta.array().abs() <= kDivergenceGuard).all();
  }
  if (!ok) {
    throw Error(ErrorCode::kDivergence,
                "optimizer step left the guard region at t=" +
                    std::to_string(t_));
  }
}

namespace {

std::int64_t median_ns(std::vector<std::int64_t>& window) {
  if (window.empty()) {
    return 0;
  }
  const auto mid = window.begin() + (window.size() - 1) / 2;
  std::nth_element(window.begin(), mid, window.end());
  return *mid;
}

TraceRow eval_row(const ModelSpec& spec, const NaturalParams& eta,
                  const GroundTruth& truth, std::int64_t t,
                  std::int64_t step_ns) {
  return TraceRow{t, lexyf::expected_nll(spec, eta, truth),
                  lexyf::expected_kl(spec, eta, truth), step_ns};
}

}  // namespace

RunTrace run(const ModelSpec& spec, Algorithm algo, const Schedule& schedule,
             const GroundTruth& truth, const RunOptions& opts) {
  if (opts.steps < 0) {
    throw Error(ErrorCode::kConfig, "run: steps must be nonnegative");
  }
  if (opts.eval_every < 1) {
    throw Error(ErrorCode::kConfig, "run: eval_every must be at least 1");
  }
  if (truth.m() != spec.m() || truth.s() != spec.s()) {
    throw Error(ErrorCode::kConfig,
                "run: ground-truth table shape does not match spec");
  }

  NaturalParams init =
      opts.init ? *opts.init : NaturalParams::zero(spec);
  OptimizerState state(spec, algo, schedule, std::move(init), opts.estimator);
  lexyf::CellSampler sampler(truth);
  Rng rng(opts.seed);

  RunTrace trace;
  trace.algorithm = algo;
  trace.seed = opts.seed;
  trace.rows.push_back(eval_row(spec, state.params(), truth, 0, 0));

  std::uint64_t stream_hash = kFnvOffset;
  std::vector<std::int64_t> window;
  window.reserve(static_cast<std::size_t>(
      std::min<std::int64_t>(opts.eval_every, 1 << 20)));

  using Clock = std::chrono::steady_clock;
  for (std::int64_t step = 0; step < opts.steps; ++step) {
    const auto [x, y] = sampler.draw(rng);
    const std::uint32_t cell[2] = {static_cast<std::uint32_t>(x),
                                   static_cast<std::uint32_t>(y)};
    stream_hash = fnv1a(stream_hash, cell, sizeof(cell));

    const auto begin = Clock::now();
    try {
      state.step(x, y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDivergence) {
        throw;
      }
      trace.diverged = true;
      break;
    }
    window.push_back(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                             begin)
            .count());

    const std::int64_t done = step + 1;
    if (done % opts.eval_every == 0 && done < opts.steps) {
      trace.rows.push_back(
          eval_row(spec, state.params(), truth, done, median_ns(window)));
      window.clear();
    }
  }

  trace.steps_completed = state.t();
  trace.clamp_events = state.clamp_events();
  trace.stream_hash = stream_hash;
  trace.final_params = state.params();
  if (!trace.diverged && opts.steps > 0) {
    trace.rows.push_back(eval_row(spec, state.params(), truth, opts.steps,
                                  median_ns(window)));
  }
  return trace;
}

}  // namespace dsngd::optimizers
