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
#include "dsngd/random.hpp"
#include "oracles.hpp"

namespace {

using dsngd::ErrorCode;
using dsngd::Rng;
using namespace dsngd::lexyf;
using dsngd::testing::naive_conditional_entropy;
using dsngd::testing::naive_covariance;
using dsngd::testing::naive_expected_kl;
using dsngd::testing::naive_expected_nll;
using dsngd::testing::naive_joint;
using dsngd::testing::naive_mean_stat;
using dsngd::testing::naive_stacked_stat;
using dsngd::testing::random_eta;
using dsngd::testing::sup;
using dsngd::testing::throws_code;

std::vector<ModelSpec> sample_specs() {
  Eigen::MatrixXd cs(2, 3);
  cs << 1.0, -0.5, 0.25, 0.0, 1.25, -0.75;
  return {ModelSpec::minimal_standard(3, 4), ModelSpec::minimal_standard(2, 2),
          ModelSpec::one_hot(3, 3), ModelSpec::custom(3, 4, cs)};
}

TEST_CASE("spec dimensions and statistic shapes") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  CHECK(spec.s() == 3);
  CHECK(spec.m() == 4);
  CHECK(spec.t() == 3);
  CHECK(spec.alpha_dim() == 2);
  CHECK(spec.beta_dim() == 9);
  CHECK(spec.dim() == 11);
  CHECK(spec.minimal());
  // S(y) = e_y for y < s-1, S(s-1) = 0.
  CHECK(sup(spec.class_stat().leftCols(2) - Eigen::MatrixXd::Identity(2, 2)) ==
        0.0);
  CHECK(sup(spec.class_stat().col(2)) == 0.0);
  // T(x) = e_x for x < m-1, T(m-1) = 0.
  CHECK(sup(spec.feature_stat().leftCols(3) -
            Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  CHECK(sup(spec.feature_stat().col(3)) == 0.0);

  const ModelSpec hot = ModelSpec::one_hot(3, 4);
  CHECK(hot.alpha_dim() == 3);
  CHECK(hot.dim() == 12);
  CHECK(!hot.minimal());
}

TEST_CASE("custom class statistics are validated") {
  CHECK(throws_code([] { ModelSpec::minimal_standard(1, 3); },
                    ErrorCode::kConfig));
  // Wrong shape.
  CHECK(throws_code(
      [] { ModelSpec::custom(3, 3, Eigen::MatrixXd::Identity(3, 3)); },
      ErrorCode::kConfig));
  // Singular S_M: first two columns equal.
  Eigen::MatrixXd singular(2, 3);
  singular << 1.0, 1.0, 0.0, 0.5, 0.5, 1.0;
  CHECK(throws_code([&] { ModelSpec::custom(3, 3, singular); },
                    ErrorCode::kSpecInvariant));
  // S_M invertible but the centered matrix S_M - S(s-1) 1' is not.
  Eigen::MatrixXd unident(2, 3);
  unident << 1.0, 0.0, 1.0, 0.0, 1.0, 0.0;
  CHECK(throws_code([&] { ModelSpec::custom(3, 3, unident); },
                    ErrorCode::kSpecInvariant));
}

TEST_CASE("hand-computed partition and conditional") {
  // s = m = 2, alpha = log 3, beta = 0: all four cells weigh exp(S(y) alpha),
  // so the total mass is 2*3 + 2*1 = 8 and P(y | x) = (3/4, 1/4) at either x.
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  NaturalParams eta = NaturalParams::zero(spec);
  eta.alpha(0) = std::log(3.0);
  CHECK(log_partition(spec, eta) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-14));
  for (int x = 0; x < 2; ++x) {
    const Eigen::VectorXd c = conditional_y_given_x(spec, eta, x);
    CHECK(c(0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(c(1) == doctest::Approx(0.25).epsilon(1e-14));
  }

  // Uniform model: alpha* = E[S] = 0.5, beta* rows = P(y) P(x=0 | y) = 0.25.
  const ExpectationParams ep =
      natural_to_expectation(spec, NaturalParams::zero(spec));
  CHECK(ep.alpha_star(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ep.beta_star(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(ep.beta_star(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(sup(theta_star(spec, ep).array() - 0.5) <= 1e-14);
}

TEST_CASE("joint table and conditionals against raw enumeration") {
  Rng rng(21);
  for (const ModelSpec& spec : sample_specs()) {
    for (int rep = 0; rep < 5; ++rep) {
      const NaturalParams eta = random_eta(spec, rng);
      const Eigen::MatrixXd want = naive_joint(spec, eta);
      CHECK(sup(joint_table(spec, eta) - want) <= 1e-14);

      for (int x = 0; x < spec.m(); ++x) {
        const Eigen::VectorXd h = h_vector(spec, eta, x);
        const Eigen::VectorXd c = conditional_y_given_x(spec, eta, x);
        CHECK(c.sum() == doctest::Approx(1.0).epsilon(1e-12));
        for (int y = 0; y < spec.s(); ++y) {
          CHECK(h(y) == doctest::Approx(std::log(want(x, y))).epsilon(1e-12));
          CHECK(c(y) ==
                doctest::Approx(want(x, y) / want.row(x).sum()).epsilon(1e-12));
          CHECK(joint_log_prob(spec, eta, x, y) ==
                doctest::Approx(std::log(want(x, y))).epsilon(1e-12));
        }
        Eigen::VectorXd scratch(spec.s()), out(spec.s());
        conditional_y_given_x_into(spec, eta, x, scratch, out);
        CHECK(sup(out - c) == 0.0);
      }
    }
  }
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  const NaturalParams eta = NaturalParams::zero(spec);
  CHECK(throws_code([&] { conditional_y_given_x(spec, eta, 2); },
                    ErrorCode::kDomainViolation));
  CHECK(throws_code([&] { joint_log_prob(spec, eta, 0, -1); },
                    ErrorCode::kDomainViolation));
}

TEST_CASE("partition survives extreme parameters via max subtraction") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 3);
  NaturalParams eta = NaturalParams::zero(spec);
  eta.alpha << 500.0, -500.0;
  eta.beta.setConstant(300.0);
  CHECK(std::isfinite(log_partition(spec, eta)));
  CHECK(std::isfinite(conditional_y_given_x(spec, eta, 0).sum()));
}

TEST_CASE("expectation map equals the enumerated statistic mean") {
  Rng rng(22);
  for (const ModelSpec& spec : sample_specs()) {
    const NaturalParams eta = random_eta(spec, rng);
    const ExpectationParams ep = natural_to_expectation(spec, eta);
    const Eigen::VectorXd want =
        naive_mean_stat(spec, naive_joint(spec, eta));
    CHECK(sup(stack_expectation(spec, ep) - want) <= 1e-13);
  }
}

TEST_CASE("stacked statistic, stacking, and covariance") {
  Rng rng(23);
  for (const ModelSpec& spec : sample_specs()) {
    for (int x = 0; x < spec.m(); ++x) {
      for (int y = 0; y < spec.s(); ++y) {
        CHECK(sup(stacked_statistic(spec, x, y) -
                  naive_stacked_stat(spec, x, y)) == 0.0);
      }
    }
    const NaturalParams eta = random_eta(spec, rng);
    CHECK(sup(unstack_natural(spec, stack_natural(spec, eta)).alpha -
              eta.alpha) == 0.0);
    CHECK(sup(unstack_natural(spec, stack_natural(spec, eta)).beta -
              eta.beta) == 0.0);
    const ExpectationParams ep = natural_to_expectation(spec, eta);
    const Eigen::VectorXd st = stack_expectation(spec, ep);
    CHECK(sup(unstack_expectation(spec, st).beta_star - ep.beta_star) == 0.0);

    CHECK(sup(stacked_covariance(spec, eta) - naive_covariance(spec, eta)) <=
          1e-13);
  }
}

TEST_CASE("expectation-to-natural inverts the dual map") {
  Rng rng(24);
  for (const ModelSpec& spec : sample_specs()) {
    for (int rep = 0; rep < 5; ++rep) {
      const NaturalParams eta = random_eta(spec, rng, 1.5);
      const ExpectationParams ep = natural_to_expectation(spec, eta);
      const NaturalParams back = expectation_to_natural(spec, ep);
      if (spec.minimal()) {
        CHECK(sup(back.alpha - eta.alpha) <= 1e-9);
        CHECK(sup(back.beta - eta.beta) <= 1e-9);
      } else {
        // One-hot coordinates carry a gauge freedom; the distribution is
        // the invariant object.
        CHECK(sup(joint_table(spec, back) - joint_table(spec, eta)) <= 1e-11);
      }
    }
  }
}

TEST_CASE("boundary expectation parameters clamp or reject") {
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  ExpectationParams ep;
  ep.alpha_star = Eigen::VectorXd::Zero(1);  // class 0 carries no mass
  ep.beta_star = Eigen::MatrixXd::Constant(2, 1, 0.25);

  CHECK(throws_code(
      [&] { expectation_to_natural(spec, ep, ClampMode::kStrict); },
      ErrorCode::kInteriority));

  ClampCounter clamps;
  const NaturalParams eta =
      expectation_to_natural(spec, ep, ClampMode::kClamp, &clamps);
  CHECK(clamps.events > 0);
  CHECK(eta.alpha.allFinite());
  CHECK(eta.beta.allFinite());

  // enforce_interior leaves interior points untouched.
  ExpectationParams good = natural_to_expectation(spec, NaturalParams::zero(spec));
  const ExpectationParams before = good;
  CHECK(enforce_interior(spec, good) == 0);
  CHECK(sup(good.alpha_star - before.alpha_star) == 0.0);
  CHECK(sup(good.beta_star - before.beta_star) == 0.0);

  ExpectationParams bad = before;
  bad.alpha_star(0) = 1.0 - 1e-12;  // class 1 squeezed onto the boundary
  CHECK(enforce_interior(spec, bad) > 0);
  const Eigen::VectorXd p = spec.class_probs_from_alpha_star(bad.alpha_star);
  CHECK(p.minCoeff() >= kInteriorEps);
}

TEST_CASE("classical chart round-trips a hand-built table") {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 3);
  Eigen::MatrixXd table(3, 3);
  table << 0.10, 0.05, 0.15, 0.20, 0.05, 0.05, 0.10, 0.25, 0.05;
  // Classical parameters straight off the table: log-odds of the class
  // marginal and per-class conditional log-odds against the last feature.
  const Eigen::VectorXd py = table.colwise().sum();
  ClassicalParams c;
  c.alpha_bar.resize(2);
  for (int i = 0; i < 2; ++i) {
    c.alpha_bar(i) = std::log(py(i) / py(2));
  }
  c.theta_bar.resize(3, 2);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      c.theta_bar(i, j) = std::log(table(j, i) / table(2, i));
    }
  }
  const NaturalParams eta = classical_to_natural(spec, c);
  CHECK(sup(joint_table(spec, eta) - table) <= 1e-12);
}

TEST_CASE("class probability charts invert each other") {
  Rng rng(25);
  for (const ModelSpec& spec : sample_specs()) {
    Eigen::VectorXd p(spec.s());
    double total = 0.0;
    for (int i = 0; i < spec.s(); ++i) {
      p(i) = dsngd::uniform(rng, 0.1, 1.0);
      total += p(i);
    }
    p /= total;
    const Eigen::VectorXd a = spec.alpha_star_from_class_probs(p);
    CHECK(sup(spec.class_probs_from_alpha_star(a) - p) <= 1e-12);
  }
}

TEST_CASE("ground truth tables are validated") {
  CHECK(throws_code(
      [] { GroundTruth::from_table(Eigen::MatrixXd::Constant(1, 2, 0.5)); },
      ErrorCode::kConfig));
  Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(2, 2, 0.5);
  neg(0, 0) = -0.5;
  CHECK(throws_code([&] { GroundTruth::from_table(neg); },
                    ErrorCode::kDomainViolation));
  CHECK(throws_code(
      [] { GroundTruth::from_table(Eigen::MatrixXd::Constant(2, 2, 0.3)); },
      ErrorCode::kDomainViolation));

  const GroundTruth t =
      GroundTruth::from_table(Eigen::MatrixXd::Constant(2, 2, 0.25));
  CHECK(t.feature_marginal().sum() == doctest::Approx(1.0));
  CHECK(t.class_marginal().sum() == doctest::Approx(1.0));
}

TEST_CASE("objectives match enumeration and differ by the entropy offset") {
  Rng rng(26);
  Eigen::MatrixXd raw(3, 3);
  for (int i = 0; i < raw.size(); ++i) {
    raw(i) = dsngd::uniform(rng, 0.05, 1.0);
  }
  const GroundTruth truth = GroundTruth::from_table(raw / raw.sum());
  const double entropy = naive_conditional_entropy(truth.table());

  const ModelSpec spec = ModelSpec::minimal_standard(3, 3);
  for (int rep = 0; rep < 10; ++rep) {
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::MatrixXd model = naive_joint(spec, eta);
    const double nll = expected_nll(spec, eta, truth);
    const double kl = expected_kl(spec, eta, truth);
    CHECK(nll == doctest::Approx(naive_expected_nll(truth.table(), model))
                     .epsilon(1e-12));
    CHECK(kl == doctest::Approx(naive_expected_kl(truth.table(), model))
                    .epsilon(1e-12));
    CHECK(kl >= 0.0);
    CHECK(std::abs(nll - kl - entropy) <= 1e-12);
  }

  // In-model truth: the generating parameters have zero divergence.
  const NaturalParams gen = random_eta(spec, rng);
  const GroundTruth self = GroundTruth::from_table(joint_table(spec, gen));
  CHECK(expected_kl(spec, gen, self) <= 1e-13);
}

TEST_CASE("cell sampler is faithful and deterministic") {
  Eigen::MatrixXd table(2, 2);
  table << 0.4, 0.1, 0.2, 0.3;
  const GroundTruth truth = GroundTruth::from_table(table);
  const CellSampler sampler(truth);

  Rng rng(27);
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(2, 2);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto [x, y] = sampler.draw(rng);
    freq(x, y) += 1.0;
  }
  CHECK(sup(freq / n - table) <= 5e-3);

  // Same seed, same stream.
  Rng r1(5), r2(5);
  for (int i = 0; i < 100; ++i) {
    CHECK(sampler.draw(r1) == sampler.draw(r2));
  }

  // A model-point sampler is the table sampler of its joint.
  const ModelSpec spec = ModelSpec::minimal_standard(2, 2);
  NaturalParams eta = NaturalParams::zero(spec);
  eta.alpha(0) = 0.7;
  eta.beta(0, 0) = -0.4;
  const CellSampler a(spec, eta);
  const CellSampler b(GroundTruth::from_table(joint_table(spec, eta)));
  Rng r3(9), r4(9);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.draw(r3) == b.draw(r4));
  }
}

TEST_CASE("dual h-vector agrees with the natural one on minimal specs") {
  Rng rng(28);
  for (const ModelSpec& spec : sample_specs()) {
    const NaturalParams eta = random_eta(spec, rng, 1.5);
    const ExpectationParams ep = natural_to_expectation(spec, eta);
    for (int x = 0; x < spec.m(); ++x) {
      const Eigen::VectorXd dual = dual_h_vector(spec, ep, x);
      if (spec.minimal()) {
        CHECK(sup(dual - h_vector(spec, eta, x)) <= 1e-10);
      } else {
        // One-hot: same softmax, i.e. the same conditional distribution.
        const Eigen::VectorXd shifted =
            (dual.array() - dual.maxCoeff()).exp();
        CHECK(sup((shifted / shifted.sum()).matrix() -
                  conditional_y_given_x(spec, eta, x)) <= 1e-10);
      }
    }
  }
}

}  // namespace
