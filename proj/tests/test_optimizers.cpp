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

#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "dsngd/lexyf.hpp"
#include "dsngd/optimizers.hpp"
#include "dsngd/random.hpp"
#include "oracles.hpp"

namespace {

using dsngd::ErrorCode;
using dsngd::Rng;
using namespace dsngd::lexyf;
using namespace dsngd::optimizers;
using dsngd::testing::naive_stacked_stat;
using dsngd::testing::random_eta;
using dsngd::testing::sup;
using dsngd::testing::throws_code;

TEST_CASE("schedules are normalized to gamma_0 = c and decay monotonically") {
  const Schedule konst = Schedule::constant(0.3);
  const Schedule invt = Schedule::inverse_t(0.5, 20.0);
  const Schedule invs = Schedule::inverse_sqrt_t(0.5, 20.0);

  CHECK(schedule_value(konst, 0) == 0.3);
  CHECK(schedule_value(konst, 1000000) == 0.3);
  CHECK(schedule_value(invt, 0) == 0.5);
  CHECK(schedule_value(invt, 20) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(schedule_value(invs, 0) == 0.5);
  CHECK(schedule_value(invs, 60) ==
        doctest::Approx(0.25).epsilon(1e-15));  // sqrt(20/80) = 1/2

  double prev = schedule_value(invt, 0);
  for (std::int64_t t = 1; t <= 100; ++t) {
    const double g = schedule_value(invt, t);
    CHECK(g <= prev);
    prev = g;
  }

  CHECK(throws_code([] { Schedule::constant(0.0); }, ErrorCode::kConfig));
  CHECK(throws_code([] { Schedule::inverse_t(1.0, -1.0); },
                    ErrorCode::kConfig));
  // t0 = 0 passes construction (constant ignores it) but a decaying kind
  // cannot be evaluated with it.
  const Schedule degenerate{ScheduleKind::kInverseT, 1.0, 0.0};
  CHECK(throws_code([&] { schedule_value(degenerate, 0); },
                    ErrorCode::kConfig));
  CHECK(throws_code([&] { schedule_value(konst, -1); }, ErrorCode::kConfig));
}

TEST_CASE("algorithm names round-trip") {
  for (Algorithm a : {Algorithm::kSgd, Algorithm::kDsngd,
                      Algorithm::kSngdOracle}) {
    CHECK(algorithm_from_name(algorithm_name(a)) == a);
  }
  CHECK(!algorithm_from_name("adam").has_value());
}

TEST_CASE("dual estimator decodes the blended running mean") {
  Rng rng(41);
  Eigen::MatrixXd cs(2, 3);
  cs << 1.0, -0.5, 0.25, 0.0, 1.25, -0.75;
  // The large minimal spec pushes the decode over the scalar-kernel size
  // threshold, so both code paths get covered.
  const ModelSpec specs[] = {
      ModelSpec::minimal_standard(3, 4), ModelSpec::one_hot(3, 3),
      ModelSpec::custom(3, 4, cs), ModelSpec::minimal_standard(2, 70)};
  for (const ModelSpec& spec : specs) {
    const double kappa = 2.5;
    DualEstimator est(spec, kappa);
    const Eigen::VectorXd prior = stack_expectation(
        spec, natural_to_expectation(spec, NaturalParams::zero(spec)));

    // Fresh output parameters: decode must size them itself.
    ExpectationParams ep;
    Eigen::VectorXd probs;
    CHECK(est.decode(spec, ep, probs) == 0);
    CHECK(sup(stack_expectation(spec, ep) - prior) <= 1e-15);
    CHECK(sup(probs.array() - 1.0 / spec.s()) <= 1e-12);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(spec.dim());
    std::int64_t n = 0;
    for (int rep = 0; rep < 50; ++rep) {
      const int x = static_cast<int>(rng() % spec.m());
      const int y = static_cast<int>(rng() % spec.s());
      est.observe(spec, x, y);
      acc += naive_stacked_stat(spec, x, y);
      ++n;
    }
    CHECK(est.count() == n);
    CHECK(est.decode(spec, ep, probs) == 0);
    const Eigen::VectorXd want = (kappa * prior + acc) / (kappa + n);
    CHECK(sup(stack_expectation(spec, ep) - want) <= 1e-15);
  }

  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  CHECK(throws_code([&] { DualEstimator(spec, 0.0); }, ErrorCode::kConfig));
  DualEstimator est(spec, 1.0);
  CHECK(throws_code([&] { est.observe(spec, 2, 0); },
                    ErrorCode::kDomainViolation));
}

TEST_CASE("dual estimator clamps decodes that reach the boundary") {
  // A vanishing prior weight leaves the single observed cell carrying
  // essentially all mass, pushing the other class probability below the
  // interior margin.
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  DualEstimator est(spec, 1e-12);
  est.observe(spec, 0, 0);
  ExpectationParams ep;
  Eigen::VectorXd probs;
  CHECK(est.decode(spec, ep, probs) >= 1);
  CHECK(probs.minCoeff() >= kInteriorEps);
  CHECK(ep.beta_star.allFinite());
}

TEST_CASE("optimizer state validates its inputs") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 3);
  NaturalParams wrong = NaturalParams::zero(ModelSpec::minimal_standard(3, 4));
  CHECK(throws_code(
      [&] {
        OptimizerState(spec, Algorithm::kSgd, Schedule::defaults(),
                       std::move(wrong));
      },
      ErrorCode::kConfig));

  NaturalParams inf = NaturalParams::zero(spec);
  inf.alpha(0) = std::nan("");
  CHECK(throws_code(
      [&] {
        OptimizerState(spec, Algorithm::kSgd, Schedule::defaults(),
                       std::move(inf));
      },
      ErrorCode::kConfig));

  const ModelSpec hot = ModelSpec::one_hot(3, 3);
  CHECK(throws_code(
      [&] {
        OptimizerState(hot, Algorithm::kSngdOracle, Schedule::defaults(),
                       NaturalParams::zero(hot));
      },
      ErrorCode::kConfig));
}

TEST_CASE("single steps from the uniform model hit the hand values") {
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);

  // SGD, gamma = 1, observe (0, 0): eta moves to the raw gradient.
  OptimizerState sgd(spec, Algorithm::kSgd, Schedule::constant(1.0),
                     NaturalParams::zero(spec));
  sgd.step(0, 0);
  CHECK(sgd.t() == 1);
  Eigen::VectorXd want(3);
  want << 0.5, 0.5, -0.5;
  CHECK(sup(stack_natural(spec, sgd.params()) - want) <= 1e-15);

  // The oracle moves along the exact natural gradient (0, 2, -2).
  OptimizerState sngd(spec, Algorithm::kSngdOracle, Schedule::constant(1.0),
                      NaturalParams::zero(spec));
  sngd.step(0, 0);
  Eigen::VectorXd nat(3);
  nat << 0.0, 2.0, -2.0;
  CHECK(sup(stack_natural(spec, sngd.params()) - nat) <= 1e-12);

  // DSNGD with the estimator pinned at the uniform dual point reproduces
  // the oracle step: the estimator prior dominates any single observation.
  EstimatorConfig pinned;
  pinned.kappa = 1e12;
  pinned.prior = natural_to_expectation(spec, NaturalParams::zero(spec));
  OptimizerState dsngd(spec, Algorithm::kDsngd, Schedule::constant(1.0),
                       NaturalParams::zero(spec), pinned);
  dsngd.step(0, 0);
  CHECK(sup(stack_natural(spec, dsngd.params()) - nat) <= 1e-6);
}

TEST_CASE("steps are deterministic") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  // Tiny constant step: exact natural-gradient steps of ordinary size can
  // overshoot to a near-singular Fisher and trip the divergence guard,
  // which is its own test below. Determinism only needs motion, not
  // convergence.
  const Schedule gentle = Schedule::constant(1e-3);
  for (Algorithm algo :
       {Algorithm::kSgd, Algorithm::kDsngd, Algorithm::kSngdOracle}) {
    OptimizerState a(spec, algo, gentle, NaturalParams::zero(spec));
    OptimizerState b(spec, algo, gentle, NaturalParams::zero(spec));
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
      const int x = static_cast<int>(rng() % spec.m());
      const int y = static_cast<int>(rng() % spec.s());
      a.step(x, y);
      b.step(x, y);
    }
    CHECK(sup(a.params().alpha - b.params().alpha) == 0.0);
    CHECK(sup(a.params().beta - b.params().beta) == 0.0);
  }
}

TEST_CASE("the divergence guard stops exploding iterates") {
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  OptimizerState state(spec, Algorithm::kSgd, Schedule::constant(1e9),
                       NaturalParams::zero(spec));
  bool threw = false;
  for (int i = 0; i < 100 && !threw; ++i) {
    try {
      state.step(i % 2, (i / 2) % 2);
    } catch (const dsngd::Error& e) {
      CHECK(e.code() == ErrorCode::kDivergence);
      threw = true;
    }
  }
  CHECK(threw);
}

TEST_CASE("run produces a well-formed evaluation trace") {
  const ModelSpec spec = ModelSpec::minimal_standard(2, 3);
  Rng seed_rng(55);
  const GroundTruth truth = GroundTruth::from_table(
      joint_table(spec, random_eta(spec, seed_rng, 1.0)));

  RunOptions opts;
  opts.steps = 250;
  opts.eval_every = 100;
  opts.seed = 9;
  const RunTrace trace =
      run(spec, Algorithm::kDsngd, Schedule::defaults(), truth, opts);

  REQUIRE(trace.rows.size() == 4);  // t = 0, 100, 200, 250
  CHECK(trace.rows[0].t == 0);
  CHECK(trace.rows[0].step_time_ns == 0);
  CHECK(trace.rows[1].t == 100);
  CHECK(trace.rows[2].t == 200);
  CHECK(trace.rows[3].t == 250);
  CHECK(trace.steps_completed == 250);
  CHECK(!trace.diverged);
  for (const TraceRow& row : trace.rows) {
    CHECK(std::isfinite(row.expected_nll));
    CHECK(row.expected_kl >= 0.0);
  }
  // The final row is the exact objective of the final parameters.
  CHECK(trace.rows.back().expected_nll ==
        doctest::Approx(expected_nll(spec, trace.final_params, truth))
            .epsilon(1e-14));

  // Zero steps: just the initial evaluation.
  RunOptions zero;
  zero.steps = 0;
  const RunTrace empty =
      run(spec, Algorithm::kSgd, Schedule::defaults(), truth, zero);
  CHECK(empty.rows.size() == 1);
  CHECK(empty.rows[0].t == 0);

  // A custom starting point is honored.
  RunOptions from;
  from.steps = 0;
  from.init = random_eta(spec, seed_rng, 1.0);
  const RunTrace started =
      run(spec, Algorithm::kSgd, Schedule::defaults(), truth, from);
  CHECK(sup(started.final_params.alpha - from.init->alpha) == 0.0);
}

TEST_CASE("runs with one seed share the sample stream") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const GroundTruth truth = GroundTruth::from_table(
      Eigen::MatrixXd::Constant(4, 3, 1.0 / 12.0));

  RunOptions opts;
  opts.steps = 500;
  opts.eval_every = 500;
  opts.seed = 123;
  // A diverged run stops drawing, so its stream hash legitimately differs;
  // keep all three stable to compare the full streams.
  const Schedule gentle = Schedule::constant(1e-3);
  const RunTrace a = run(spec, Algorithm::kSgd, gentle, truth, opts);
  const RunTrace b = run(spec, Algorithm::kDsngd, gentle, truth, opts);
  const RunTrace c = run(spec, Algorithm::kSngdOracle, gentle, truth, opts);
  REQUIRE(!a.diverged);
  REQUIRE(!b.diverged);
  REQUIRE(!c.diverged);
  CHECK(a.stream_hash == b.stream_hash);
  CHECK(a.stream_hash == c.stream_hash);

  opts.seed = 124;
  const RunTrace d = run(spec, Algorithm::kSgd, gentle, truth, opts);
  CHECK(a.stream_hash != d.stream_hash);
}

TEST_CASE("a diverging run is flagged and truncated") {
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  const GroundTruth truth =
      GroundTruth::from_table(Eigen::MatrixXd::Constant(2, 2, 0.25));
  RunOptions opts;
  opts.steps = 1000;
  opts.eval_every = 10;
  opts.seed = 3;
  const RunTrace trace =
      run(spec, Algorithm::kSgd, Schedule::constant(1e9), truth, opts);
  CHECK(trace.diverged);
  CHECK(trace.steps_completed < opts.steps);
}

}  // namespace
