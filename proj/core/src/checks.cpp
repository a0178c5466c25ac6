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

#include "dsngd/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <utility>

#include "dsngd/gradients.hpp"
#include "dsngd/harness.hpp"
#include "dsngd/lexyf.hpp"
#include "dsngd/optimizers.hpp"
#include "dsngd/random.hpp"

namespace dsngd::checks {
namespace {

using lexyf::ExpectationParams;
using lexyf::GroundTruth;
using lexyf::ModelSpec;
using lexyf::NaturalParams;

struct Budget {
  int models = 0;       // randomized model instances per check
  int points = 0;       // parameter points per model
  bool full = false;    // include the long-running checks
};

int pick_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

ModelSpec random_minimal(Rng& rng, int max_sm = 4) {
  return ModelSpec::minimal_standard(pick_int(rng, 2, max_sm),
                                     pick_int(rng, 2, max_sm));
}

ModelSpec random_custom(Rng& rng, int max_sm = 4) {
  const int s = pick_int(rng, 2, max_sm);
  const int m = pick_int(rng, 2, max_sm);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Eigen::MatrixXd cs(s - 1, s);
    for (Eigen::Index i = 0; i < cs.size(); ++i) {
      cs(i) = uniform(rng, -1.0, 1.0);
    }
    try {
      return ModelSpec::custom(s, m, cs);
    } catch (const Error&) {
      // singular or unidentifiable draw; try again
    }
  }
  throw Error(ErrorCode::kSpecInvariant,
              "random_custom: no valid class statistic in 64 draws");
}

NaturalParams random_eta(const ModelSpec& spec, Rng& rng, double range = 1.5) {
  NaturalParams eta = NaturalParams::zero(spec);
  for (Eigen::Index i = 0; i < eta.alpha.size(); ++i) {
    eta.alpha(i) = uniform(rng, -range, range);
  }
  for (Eigen::Index i = 0; i < eta.beta.size(); ++i) {
    eta.beta(i) = uniform(rng, -range, range);
  }
  return eta;
}

double sup(const Eigen::MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// ‖a - b‖_inf / max(1, ‖b‖_inf); b is the reference.
double rel_sup(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return sup(a - b) / std::max(1.0, sup(b));
}

template <typename F>
Eigen::VectorXd fd_gradient(const F& f, const Eigen::VectorXd& x, double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd v = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x(j)));
    v(j) = x(j) + h;
    const double up = f(v);
    v(j) = x(j) - h;
    const double dn = f(v);
    v(j) = x(j);
    g(j) = (up - dn) / (2.0 * h);
  }
  return g;
}

template <typename F>
Eigen::MatrixXd fd_jacobian(const F& f, const Eigen::VectorXd& x, double step) {
  Eigen::MatrixXd jac;
  Eigen::VectorXd v = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * std::max(1.0, std::abs(x(j)));
    v(j) = x(j) + h;
    const Eigen::VectorXd up = f(v);
    v(j) = x(j) - h;
    const Eigen::VectorXd dn = f(v);
    v(j) = x(j);
    if (jac.size() == 0) {
      jac.resize(up.size(), x.size());
    }
    jac.col(j) = (up - dn) / (2.0 * h);
  }
  return jac;
}

/// Dense s x dim Jacobian implied by the structured blocks: row i is the
/// gradient of h_i, with the beta part living only in class i's segment.
Eigen::MatrixXd densify_blocks(const ModelSpec& spec,
                               const gradients::DualGradBlocks& blocks) {
  const int a = spec.alpha_dim();
  const int t = spec.t();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(spec.s(), spec.dim());
  for (int i = 0; i < spec.s(); ++i) {
    jac.row(i).head(a) = blocks.alpha_block.col(i).transpose();
    jac.row(i).segment(a + i * t, t) = blocks.beta_diag.col(i).transpose();
  }
  return jac;
}

using CheckFn = std::function<double(std::string& note)>;

/// pass iff measured <= tol. Exceptions fail the row with the message.
CheckResult positive_check(const std::string& name, double tol,
                           const CheckFn& fn) {
  CheckResult r{name, 0.0, tol, false, ""};
  try {
    r.max_err = fn(r.note);
    r.pass = r.max_err <= tol && std::isfinite(r.max_err);
  } catch (const std::exception& e) {
    r.max_err = std::numeric_limits<double>::infinity();
    r.note = e.what();
  }
  return r;
}

/// Deliberate-mutation control: pass iff the measured error EXCEEDS the
/// detection threshold.
CheckResult negative_check(const std::string& name, double threshold,
                           const CheckFn& fn) {
  CheckResult r{name, 0.0, threshold, false, "mutation control"};
  try {
    r.max_err = fn(r.note);
    r.pass = r.max_err > threshold;
    r.note = "mutation control: error must exceed tol";
  } catch (const std::exception& e) {
    r.max_err = 0.0;
    r.note = std::string("mutation control: ") + e.what();
  }
  return r;
}

// ---------------------------------------------------------------------------
// geometry

double check_dual_roundtrip(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const lexyf::LexyfPotential pot(i % 3 == 2 ? random_custom(rng)
                                               : random_minimal(rng));
    for (int j = 0; j < b.points; ++j) {
      const NaturalParams eta = random_eta(pot.spec(), rng);
      const Eigen::VectorXd v = lexyf::stack_natural(pot.spec(), eta);
      const geometry::DualPoint d = geometry::to_dual(pot, v);
      worst = std::max(worst, sup(geometry::from_dual(pot, d) - v));
    }
  }
  return worst;
}

double check_crouzeix(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const lexyf::LexyfPotential pot(i % 3 == 2 ? random_custom(rng)
                                               : random_minimal(rng));
    for (int j = 0; j < std::max(1, b.points / 2); ++j) {
      const Eigen::VectorXd v =
          lexyf::stack_natural(pot.spec(), random_eta(pot.spec(), rng));
      worst = std::max(worst, geometry::crouzeix_residual(pot, v));
    }
  }
  return worst;
}

double check_bregman_vs_canonical(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const lexyf::LexyfPotential pot(random_minimal(rng));
    for (int j = 0; j < std::max(1, b.points / 2); ++j) {
      const Eigen::VectorXd u =
          lexyf::stack_natural(pot.spec(), random_eta(pot.spec(), rng));
      const Eigen::VectorXd w =
          lexyf::stack_natural(pot.spec(), random_eta(pot.spec(), rng));
      const double breg = geometry::bregman_divergence(pot, u, w);
      const double canon = geometry::canonical_divergence(pot, u, w);
      worst = std::max(worst, std::abs(breg - canon));
    }
  }
  return worst;
}

double check_bregman_vs_joint_kl(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = random_minimal(rng);
    const lexyf::LexyfPotential pot(spec);
    for (int j = 0; j < std::max(1, b.points / 2); ++j) {
      const NaturalParams eta = random_eta(spec, rng);
      const NaturalParams ref = random_eta(spec, rng);
      const double breg =
          geometry::bregman_divergence(pot, lexyf::stack_natural(spec, eta),
                                       lexyf::stack_natural(spec, ref));
      // Bregman(eta, ref) is the joint KL of P_ref from P_eta.
      const Eigen::MatrixXd pe = lexyf::joint_table(spec, eta);
      const Eigen::MatrixXd pr = lexyf::joint_table(spec, ref);
      const double kl =
          (pr.array() * (pr.array().log() - pe.array().log())).sum();
      worst = std::max(worst, std::abs(breg - kl));
    }
  }
  return worst;
}

/// Same potential with the closed-form inverse hidden, forcing from_dual
/// through the damped-Newton path.
class HiddenInversePotential final : public geometry::ConvexPotential {
 public:
  explicit HiddenInversePotential(ModelSpec spec) : inner_(std::move(spec)) {}
  int dim() const override { return inner_.dim(); }
  double value(const Eigen::VectorXd& eta) const override {
    return inner_.value(eta);
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& eta) const override {
    return inner_.gradient(eta);
  }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& eta) const override {
    return inner_.hessian(eta);
  }

 private:
  lexyf::LexyfPotential inner_;
};

double check_newton_inversion(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < std::max(2, b.models / 2); ++i) {
    const ModelSpec spec = random_minimal(rng);
    const lexyf::LexyfPotential pot(spec);
    const HiddenInversePotential hidden(spec);
    for (int j = 0; j < 3; ++j) {
      const Eigen::VectorXd v =
          lexyf::stack_natural(spec, random_eta(spec, rng));
      const geometry::DualPoint d = geometry::to_dual(pot, v);
      const Eigen::VectorXd newton = geometry::from_dual(hidden, d);
      worst = std::max(worst, sup(newton - v));
    }
  }
  return worst;
}

double check_natgrad_dual_coords(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < std::max(2, b.models / 2); ++i) {
    const lexyf::LexyfPotential pot(random_minimal(rng));
    const Eigen::VectorXd v =
        lexyf::stack_natural(pot.spec(), random_eta(pot.spec(), rng));
    // The natural gradient of the k-th dual coordinate is the k-th basis
    // vector: dual coordinates flatten the primal metric.
    const Eigen::MatrixXd metric = geometry::metric_primal(pot, v);
    for (int k = 0; k < pot.dim(); ++k) {
      const Eigen::VectorXd ng = geometry::natural_gradient(metric,
                                                            metric.col(k));
      Eigen::VectorXd ek = Eigen::VectorXd::Zero(pot.dim());
      ek(k) = 1.0;
      worst = std::max(worst, sup(ng - ek));
    }
  }
  return worst;
}

double control_crouzeix_perturbed(Rng& rng, std::string&) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const lexyf::LexyfPotential pot(spec);
  NaturalParams eta = random_eta(spec, rng);
  eta.alpha.array() += 1.0;  // keep the point clearly non-uniform
  const Eigen::VectorXd v = lexyf::stack_natural(spec, eta);
  const Eigen::VectorXd v0 = lexyf::stack_natural(spec, NaturalParams::zero(spec));
  // Blend the dual point halfway toward the uniform model's dual: stays in
  // the dual domain (the expectation set is convex) but no longer matches v.
  const Eigen::VectorXd mixed =
      0.5 * (geometry::to_dual(pot, v).coords + geometry::to_dual(pot, v0).coords);
  const Eigen::MatrixXd g = geometry::metric_primal(pot, v);
  const Eigen::MatrixXd gd = geometry::metric_dual(pot, {mixed});
  return sup(g * gd - Eigen::MatrixXd::Identity(pot.dim(), pot.dim()));
}

// ---------------------------------------------------------------------------
// lexyf

double check_joint_normalization(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = i % 3 == 1 ? ModelSpec::one_hot(pick_int(rng, 2, 4),
                                                           pick_int(rng, 2, 4))
                                      : random_minimal(rng);
    const NaturalParams eta = random_eta(spec, rng);
    double total = 0.0;
    for (int x = 0; x < spec.m(); ++x) {
      for (int y = 0; y < spec.s(); ++y) {
        total += std::exp(lexyf::joint_log_prob(spec, eta, x, y));
      }
    }
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return worst;
}

double check_conditional_chain_rule(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = random_minimal(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::MatrixXd table = lexyf::joint_table(spec, eta);
    const Eigen::VectorXd px = table.rowwise().sum();
    for (int x = 0; x < spec.m(); ++x) {
      const Eigen::VectorXd cond = lexyf::conditional_y_given_x(spec, eta, x);
      for (int y = 0; y < spec.s(); ++y) {
        worst = std::max(worst, std::abs(table(x, y) - cond(y) * px(x)));
      }
    }
  }
  return worst;
}

double check_stacked_embedding(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = i % 2 == 0 ? random_minimal(rng)
                                      : random_custom(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::VectorXd v = lexyf::stack_natural(spec, eta);
    const double logz = lexyf::log_partition(spec, eta);
    for (int x = 0; x < spec.m(); ++x) {
      for (int y = 0; y < spec.s(); ++y) {
        const double lhs = lexyf::joint_log_prob(spec, eta, x, y);
        const double rhs =
            lexyf::stacked_statistic(spec, x, y).dot(v) - logz;
        worst = std::max(worst, std::abs(lhs - rhs));
      }
    }
  }
  return worst;
}

double check_roundtrip_minimal(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = i % 3 == 2 ? random_custom(rng)
                                      : random_minimal(rng);
    for (int j = 0; j < std::max(1, b.points / 4); ++j) {
      const NaturalParams eta = random_eta(spec, rng);
      const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
      const NaturalParams back =
          lexyf::expectation_to_natural(spec, ep, lexyf::ClampMode::kStrict);
      worst = std::max(worst, sup(back.alpha - eta.alpha));
      worst = std::max(worst, sup(back.beta - eta.beta));
    }
  }
  return worst;
}

double check_roundtrip_onehot_dual(Rng& rng, const Budget& b, std::string&) {
  // One-hot natural parameters carry a gauge freedom, so the natural-side
  // roundtrip cannot be the identity; the dual side must be.
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec =
        ModelSpec::one_hot(pick_int(rng, 2, 4), pick_int(rng, 2, 4));
    for (int j = 0; j < std::max(1, b.points / 4); ++j) {
      const NaturalParams eta = random_eta(spec, rng);
      const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
      const NaturalParams gauged =
          lexyf::expectation_to_natural(spec, ep, lexyf::ClampMode::kStrict);
      const ExpectationParams ep2 = lexyf::natural_to_expectation(spec, gauged);
      worst = std::max(worst, sup(ep2.alpha_star - ep.alpha_star));
      worst = std::max(worst, sup(ep2.beta_star - ep.beta_star));
    }
  }
  return worst;
}

double check_class_prob_inversion(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = i % 2 == 0 ? random_minimal(rng)
                                      : random_custom(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
    const Eigen::VectorXd probs =
        spec.class_probs_from_alpha_star(ep.alpha_star);
    const Eigen::VectorXd enumerated =
        GroundTruth::from_table(lexyf::joint_table(spec, eta)).class_marginal();
    worst = std::max(worst, sup(probs - enumerated));
    worst = std::max(
        worst, sup(spec.alpha_star_from_class_probs(probs) - ep.alpha_star));
  }
  return worst;
}

double check_in_model_argmin(Rng& rng, const Budget&, std::string&) {
  const harness::GeneratedTruth gen =
      harness::gen_ground_truth(3, 4, harness::GenMode::kInModel, 11);
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const NaturalParams& star = *gen.generator;
  double worst = lexyf::expected_kl(spec, star, gen.truth);
  const double nll_star = lexyf::expected_nll(spec, star, gen.truth);
  for (int i = 0; i < 30; ++i) {
    NaturalParams pert = star;
    for (Eigen::Index k = 0; k < pert.alpha.size(); ++k) {
      pert.alpha(k) += uniform(rng, -0.5, 0.5);
    }
    for (Eigen::Index k = 0; k < pert.beta.size(); ++k) {
      pert.beta(k) += uniform(rng, -0.5, 0.5);
    }
    const double gap = nll_star - lexyf::expected_nll(spec, pert, gen.truth);
    worst = std::max(worst, gap);  // must not be meaningfully positive
  }
  return worst;
}

double check_nll_kl_offset(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < std::max(2, b.models / 3); ++i) {
    const ModelSpec spec = random_minimal(rng);
    const GroundTruth truth =
        harness::gen_ground_truth(spec.s(), spec.m(), harness::GenMode::kTable,
                                  rng())
            .truth;
    Eigen::VectorXd offsets(10);
    for (int j = 0; j < offsets.size(); ++j) {
      const NaturalParams eta = random_eta(spec, rng, 2.0);
      offsets(j) = lexyf::expected_nll(spec, eta, truth) -
                   lexyf::expected_kl(spec, eta, truth);
    }
    const double mean = offsets.mean();
    worst = std::max(worst, (offsets.array() - mean).square().mean());
  }
  return worst;
}

double check_interior_clamp(Rng&, const Budget&, std::string&) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const double eps = lexyf::kInteriorEps;

  Eigen::VectorXd p_raw(3);
  p_raw << -0.05, 0.55, 0.5;  // sums to 1, one entry negative
  Eigen::MatrixXd theta_raw(3, 3);
  theta_raw << 0.0, 0.2, 0.2,     // zero entry
               0.5, 0.5, 0.2,     // oversubscribed row (sum 1.2)
               0.2, -0.1, 0.3;    // negative entry
  ExpectationParams ep;
  ep.alpha_star = spec.alpha_star_from_class_probs(p_raw);
  ep.beta_star = theta_raw.array().colwise() * p_raw.array();

  const int adjusted = lexyf::enforce_interior(spec, ep);
  if (adjusted == 0) {
    return 1.0;  // the input was decidedly not interior
  }
  const Eigen::VectorXd p = spec.class_probs_from_alpha_star(ep.alpha_star);
  double worst = std::abs(p.sum() - 1.0);
  worst = std::max(worst, eps - p.minCoeff());
  for (int i = 0; i < spec.s(); ++i) {
    const Eigen::VectorXd row = ep.beta_star.row(i).transpose() / p(i);
    worst = std::max(worst, eps - row.minCoeff());
    worst = std::max(worst, row.sum() - (1.0 - 2.0 * eps));
  }
  // Idempotence: a second pass has nothing left to adjust.
  ExpectationParams again = ep;
  if (lexyf::enforce_interior(spec, again) != 0) {
    worst = std::max(worst, 1.0);
  }
  return std::max(worst, 0.0);
}

// ---------------------------------------------------------------------------
// gradients

double check_central_identity(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  const int max_sm = b.full ? 4 : 3;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = i % 4 == 3 ? random_custom(rng, max_sm)
                                      : random_minimal(rng, max_sm);
    const NaturalParams eta = random_eta(spec, rng);
    const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
    for (int x = 0; x < spec.m(); ++x) {
      const gradients::DualGradBlocks blocks =
          gradients::grad_h_dual(spec, ep, x, lexyf::ClampMode::kStrict);
      const Eigen::VectorXd cond = lexyf::conditional_y_given_x(spec, eta, x);
      for (int y = 0; y < spec.s(); ++y) {
        const Eigen::VectorXd oracle =
            gradients::natural_gradient_oracle(spec, eta, x, y);
        const Eigen::VectorXd mine = gradients::dsngd_direction(
            spec, blocks, gradients::q_vector(cond, y));
        worst = std::max(worst, rel_sup(mine, oracle));
      }
    }
  }
  return worst;
}

double check_score_mean_zero(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < b.models; ++i) {
    const ModelSpec spec = random_minimal(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::MatrixXd table = lexyf::joint_table(spec, eta);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(spec.dim());
    for (int x = 0; x < spec.m(); ++x) {
      for (int y = 0; y < spec.s(); ++y) {
        mean += table(x, y) * gradients::sgd_gradient(spec, eta, x, y);
      }
    }
    worst = std::max(worst, sup(mean));
  }
  return worst;
}

double check_conditional_grad_vs_fd(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  const int models = std::max(3, b.models / 3);
  for (int i = 0; i < models; ++i) {
    const ModelSpec spec = i % 2 == 0 ? random_minimal(rng)
                                      : random_custom(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::VectorXd v = lexyf::stack_natural(spec, eta);
    for (int rep = 0; rep < 3; ++rep) {
      const int x = pick_int(rng, 0, spec.m() - 1);
      const int y = pick_int(rng, 0, spec.s() - 1);
      const Eigen::VectorXd fd = fd_gradient(
          [&](const Eigen::VectorXd& w) {
            const NaturalParams cand = lexyf::unstack_natural(spec, w);
            return std::log(lexyf::conditional_y_given_x(spec, cand, x)(y));
          },
          v, 1e-5);
      worst =
          std::max(worst, rel_sup(gradients::sgd_gradient(spec, eta, x, y), fd));
    }
  }
  return worst;
}

double check_dual_jacobian_minimal(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  const int models = std::max(3, b.models / 2);
  for (int i = 0; i < models; ++i) {
    const ModelSpec spec = i % 2 == 0 ? random_minimal(rng)
                                      : random_custom(rng);
    const NaturalParams eta = random_eta(spec, rng);
    const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
    const Eigen::VectorXd v = lexyf::stack_expectation(spec, ep);
    for (int x = 0; x < spec.m(); ++x) {
      const Eigen::MatrixXd fd = fd_jacobian(
          [&](const Eigen::VectorXd& w) {
            const NaturalParams cand = lexyf::expectation_to_natural(
                spec, lexyf::unstack_expectation(spec, w),
                lexyf::ClampMode::kStrict);
            return lexyf::h_vector(spec, cand, x);
          },
          v, 1e-6);
      const Eigen::MatrixXd mine = densify_blocks(
          spec,
          gradients::grad_h_dual(spec, ep, x, lexyf::ClampMode::kStrict));
      worst = std::max(worst, rel_sup(mine, fd));
    }
  }
  return worst;
}

double check_dual_jacobian_onehot(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  const int models = std::max(3, b.models / 2);
  for (int i = 0; i < models; ++i) {
    const ModelSpec spec =
        ModelSpec::one_hot(pick_int(rng, 2, 4), pick_int(rng, 2, 4));
    const NaturalParams eta = random_eta(spec, rng);
    const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
    const Eigen::VectorXd v = lexyf::stack_expectation(spec, ep);
    for (int x = 0; x < spec.m(); ++x) {
      // The one-hot dual map is not invertible, so the oracle differentiates
      // the canonical dual-side extension of h directly.
      const Eigen::MatrixXd fd = fd_jacobian(
          [&](const Eigen::VectorXd& w) {
            return lexyf::dual_h_vector(
                spec, lexyf::unstack_expectation(spec, w), x);
          },
          v, 1e-6);
      const Eigen::MatrixXd mine = densify_blocks(
          spec, gradients::grad_h_dual_onehot(spec, ep, x,
                                              lexyf::ClampMode::kStrict));
      worst = std::max(worst, rel_sup(mine, fd));
    }
  }
  return worst;
}

double check_fisher_vs_fd_hessian(Rng& rng, const Budget& b, std::string&) {
  double worst = 0.0;
  for (int i = 0; i < std::max(3, b.models / 3); ++i) {
    const ModelSpec spec = i % 2 == 0 ? random_minimal(rng)
                                      : random_custom(rng);
    const lexyf::LexyfPotential pot(spec);
    const NaturalParams eta = random_eta(spec, rng);
    const Eigen::VectorXd v = lexyf::stack_natural(spec, eta);
    const Eigen::MatrixXd fd = fd_jacobian(
        [&](const Eigen::VectorXd& w) { return pot.gradient(w); }, v, 1e-5);
    const Eigen::MatrixXd sym = 0.5 * (fd + fd.transpose());
    worst = std::max(worst, rel_sup(lexyf::stacked_covariance(spec, eta), sym));
  }
  return worst;
}

double control_central_identity_sign_flip(Rng& rng, std::string&) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const NaturalParams eta = random_eta(spec, rng);
  const ExpectationParams ep = lexyf::natural_to_expectation(spec, eta);
  const int x = spec.m() - 1;  // the alpha scalars vanish at interior cells
  gradients::DualGradBlocks blocks =
      gradients::grad_h_dual(spec, ep, x, lexyf::ClampMode::kStrict);
  blocks.alpha_block = -blocks.alpha_block;
  const Eigen::VectorXd cond = lexyf::conditional_y_given_x(spec, eta, x);
  double detect = 0.0;
  for (int y = 0; y < spec.s(); ++y) {
    const Eigen::VectorXd oracle =
        gradients::natural_gradient_oracle(spec, eta, x, y);
    const Eigen::VectorXd mutated = gradients::dsngd_direction(
        spec, blocks, gradients::q_vector(cond, y));
    detect = std::max(detect, rel_sup(mutated, oracle));
  }
  return detect;
}

// ---------------------------------------------------------------------------
// optimizers

double check_determinism(Rng&, const Budget&, std::string&) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const GroundTruth truth =
      harness::gen_ground_truth(3, 4, harness::GenMode::kTable, 5).truth;
  optimizers::RunOptions opts;
  opts.steps = 1500;
  opts.eval_every = 300;
  opts.seed = 42;
  double worst = 0.0;
  for (const optimizers::Algorithm algo :
       {optimizers::Algorithm::kSgd, optimizers::Algorithm::kDsngd,
        optimizers::Algorithm::kSngdOracle}) {
    const optimizers::RunTrace a = optimizers::run(
        spec, algo, optimizers::Schedule::defaults(), truth, opts);
    const optimizers::RunTrace c = optimizers::run(
        spec, algo, optimizers::Schedule::defaults(), truth, opts);
    if (a.rows.size() != c.rows.size() || a.stream_hash != c.stream_hash ||
        a.diverged != c.diverged) {
      return 1.0;
    }
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
      if (a.rows[r].t != c.rows[r].t) {
        return 1.0;
      }
      worst = std::max(worst,
                       std::abs(a.rows[r].expected_nll - c.rows[r].expected_nll));
      worst = std::max(worst,
                       std::abs(a.rows[r].expected_kl - c.rows[r].expected_kl));
    }
    worst = std::max(worst, sup(a.final_params.alpha - c.final_params.alpha));
    worst = std::max(worst, sup(a.final_params.beta - c.final_params.beta));
  }
  return worst;
}

double check_dsngd_matches_oracle(Rng& rng, const Budget&, std::string&) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const optimizers::Schedule sched = optimizers::Schedule::constant(0.1);
  double worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const NaturalParams eta0 = random_eta(spec, rng);
    // Estimator pinned at the exact dual point of eta0: the decoded
    // expectation parameters match the model, so the explicit blocks must
    // reproduce the exact Fisher solve.
    optimizers::EstimatorConfig pinned;
    pinned.kappa = 1e12;
    pinned.prior = lexyf::natural_to_expectation(spec, eta0);
    optimizers::OptimizerState dsngd(spec, optimizers::Algorithm::kDsngd, sched,
                                     eta0, pinned);
    optimizers::OptimizerState sngd(spec, optimizers::Algorithm::kSngdOracle,
                                    sched, eta0);
    const int x = pick_int(rng, 0, spec.m() - 1);
    const int y = pick_int(rng, 0, spec.s() - 1);
    dsngd.step(x, y);
    sngd.step(x, y);
    const Eigen::VectorXd a = lexyf::stack_natural(spec, dsngd.params());
    const Eigen::VectorXd c = lexyf::stack_natural(spec, sngd.params());
    worst = std::max(worst, rel_sup(a, c));
  }
  return worst;
}

double check_short_run_improves(Rng&, const Budget&, std::string& note) {
  const harness::GeneratedTruth gen =
      harness::gen_ground_truth(3, 4, harness::GenMode::kInModel, 17);
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  optimizers::RunOptions opts;
  opts.steps = 4000;
  opts.eval_every = 4000;
  opts.seed = 3;
  double worst = 0.0;
  for (const optimizers::Algorithm algo :
       {optimizers::Algorithm::kSgd, optimizers::Algorithm::kDsngd}) {
    const optimizers::RunTrace tr = optimizers::run(
        spec, algo, optimizers::Schedule::defaults(), gen.truth, opts);
    const double before = tr.rows.front().expected_kl;
    const double after = tr.rows.back().expected_kl;
    worst = std::max(worst, after / before);
    note = "final/initial divergence ratio";
  }
  return worst;
}

double check_divergence_guard(Rng&, const Budget&, std::string& note) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 4);
  const GroundTruth truth =
      harness::gen_ground_truth(3, 4, harness::GenMode::kTable, 9).truth;
  optimizers::RunOptions opts;
  opts.steps = 50;
  opts.eval_every = 10;
  opts.seed = 1;
  const optimizers::RunTrace tr =
      optimizers::run(spec, optimizers::Algorithm::kSgd,
                      optimizers::Schedule::constant(1e9), truth, opts);
  note = "guard must flag the run and stop early";
  return tr.diverged && tr.steps_completed < opts.steps ? 0.0 : 1.0;
}

double check_estimator_consistency(Rng& rng, const Budget&, std::string& note) {
  const ModelSpec spec = ModelSpec::minimal_standard(3, 5);
  const GroundTruth truth =
      harness::gen_ground_truth(3, 5, harness::GenMode::kTable, 21).truth;
  Eigen::VectorXd target = Eigen::VectorXd::Zero(spec.dim());
  for (int x = 0; x < spec.m(); ++x) {
    for (int y = 0; y < spec.s(); ++y) {
      target += truth.table()(x, y) * lexyf::stacked_statistic(spec, x, y);
    }
  }
  optimizers::DualEstimator est(spec, 1.0);
  const lexyf::CellSampler sampler(truth);
  ExpectationParams ep;
  Eigen::VectorXd probs;
  std::vector<double> errs;
  for (std::int64_t n = 1; n <= 100000; ++n) {
    const auto [x, y] = sampler.draw(rng);
    est.observe(spec, x, y);
    if (n == 1000 || n == 10000 || n == 100000) {
      est.decode(spec, ep, probs);
      errs.push_back(sup(lexyf::stack_expectation(spec, ep) - target));
    }
  }
  note = "decade error ratios (must shrink)";
  return std::max(errs[1] / errs[0], errs[2] / errs[1]);
}

// ---------------------------------------------------------------------------
// harness

std::string read_bytes(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) {
    throw Error(ErrorCode::kIo, "cannot open " + path);
  }
  std::string out;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) {
    out.append(buf, got);
  }
  std::fclose(f);
  return out;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(std::uint64_t tag) {
    path = std::filesystem::temp_directory_path() /
           ("dsngd-checks-" + std::to_string(tag));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

double check_trace_roundtrip(Rng& rng, const Budget&, std::string&) {
  const TempDir tmp(rng());
  optimizers::RunTrace tr;
  tr.algorithm = optimizers::Algorithm::kDsngd;
  tr.seed = 77;
  tr.rows = {{0, 1.8061112346512312, 0.4061112346512312, 0},
             {1000, 1.5181112346599999, 0.1181112346599999, 2371},
             {2000, 1.4141112346500001, 0.0141112346500001, 2369}};
  tr.steps_completed = 2000;
  const std::string p1 = tmp.file("a.csv");
  const std::string p2 = tmp.file("b.csv");
  harness::write_trace_csv(tr, p1);
  harness::write_trace_csv(tr, p2);
  if (read_bytes(p1) != read_bytes(p2)) {
    return 1.0;
  }
  const std::vector<optimizers::TraceRow> rows = harness::read_trace_csv(p1);
  if (rows.size() != tr.rows.size()) {
    return 1.0;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].t != tr.rows[i].t ||
        rows[i].step_time_ns != tr.rows[i].step_time_ns) {
      return 1.0;
    }
    worst = std::max(worst,
                     std::abs(rows[i].expected_nll - tr.rows[i].expected_nll));
    worst = std::max(worst,
                     std::abs(rows[i].expected_kl - tr.rows[i].expected_kl));
  }
  return worst;
}

double check_truth_roundtrip(Rng& rng, const Budget&, std::string&) {
  const TempDir tmp(rng());
  const GroundTruth truth =
      harness::gen_ground_truth(4, 5, harness::GenMode::kTable, 13).truth;
  const std::string p1 = tmp.file("t1.json");
  const std::string p2 = tmp.file("t2.json");
  harness::save_ground_truth(truth, p1);
  harness::save_ground_truth(truth, p2);
  if (read_bytes(p1) != read_bytes(p2)) {
    return 1.0;
  }
  const GroundTruth back = harness::load_ground_truth(p1);
  if (back.s() != truth.s() || back.m() != truth.m()) {
    return 1.0;
  }
  return sup(back.table() - truth.table());
}

double check_config_hash_sensitivity(Rng&, const Budget&, std::string& note) {
  harness::ExperimentConfig base;
  base.s = 3;
  base.m = 4;
  base.algorithms = {optimizers::Algorithm::kDsngd, optimizers::Algorithm::kSgd};
  base.schedule = optimizers::Schedule::inverse_t(1.0, 10.0);
  base.steps = 1000;
  base.eval_every = 100;
  base.seed = 7;
  base.kappa = 1.0;
  const std::uint64_t h0 = harness::config_hash(base);
  int collisions = h0 == harness::config_hash(base) ? 0 : 1;

  std::vector<harness::ExperimentConfig> variants(11, base);
  variants[0].s = 4;
  variants[1].m = 5;
  variants[2].stat = lexyf::ClassStatKind::kOneHot;
  variants[3].algorithms = {optimizers::Algorithm::kSgd};
  variants[4].schedule = optimizers::Schedule::constant(1.0);
  variants[5].schedule = optimizers::Schedule::inverse_t(2.0, 10.0);
  variants[6].schedule = optimizers::Schedule::inverse_t(1.0, 20.0);
  variants[7].steps = 2000;
  variants[8].eval_every = 200;
  variants[9].seed = 8;
  variants[10].kappa = 2.0;
  for (const harness::ExperimentConfig& v : variants) {
    if (harness::config_hash(v) == h0) {
      ++collisions;
    }
  }
  // Paths are storage details and must not move the hash.
  harness::ExperimentConfig moved = base;
  moved.truth_path = "elsewhere/truth.json";
  moved.out_dir = "elsewhere/out";
  if (harness::config_hash(moved) != h0) {
    ++collisions;
  }
  note = "hash collisions across mutated configs";
  return static_cast<double>(collisions);
}

}  // namespace

std::vector<CheckResult> run_checks(Scale scale, std::uint64_t seed) {
  const Budget b = scale == Scale::kFull ? Budget{20, 10, true}
                                         : Budget{6, 4, false};
  Rng rng(seed);
  std::vector<CheckResult> out;

  const auto add = [&](const char* name, double tol,
                       double (*fn)(Rng&, const Budget&, std::string&)) {
    out.push_back(positive_check(
        name, tol, [&](std::string& note) { return fn(rng, b, note); }));
  };
  const auto add_control = [&](const char* name, double threshold,
                               double (*fn)(Rng&, std::string&)) {
    out.push_back(negative_check(
        name, threshold, [&](std::string& note) { return fn(rng, note); }));
  };

  add("geometry/dual-roundtrip", 1e-8, check_dual_roundtrip);
  add("geometry/crouzeix-identity", 1e-6, check_crouzeix);
  add("geometry/bregman-vs-canonical", 1e-10, check_bregman_vs_canonical);
  add("geometry/bregman-vs-joint-kl", 1e-10, check_bregman_vs_joint_kl);
  if (b.full) {
    add("geometry/newton-inversion", 1e-8, check_newton_inversion);
    add("geometry/natural-gradient-dual-coords", 1e-8,
        check_natgrad_dual_coords);
  }
  add_control("geometry/crouzeix-detects-perturbation", 1e-3,
              control_crouzeix_perturbed);

  add("lexyf/joint-normalization", 1e-12, check_joint_normalization);
  add("lexyf/conditional-chain-rule", 1e-12, check_conditional_chain_rule);
  add("lexyf/stacked-embedding", 1e-12, check_stacked_embedding);
  add("lexyf/roundtrip-minimal", 1e-8, check_roundtrip_minimal);
  add("lexyf/roundtrip-onehot-dual", 1e-8, check_roundtrip_onehot_dual);
  add("lexyf/class-prob-inversion", 1e-10, check_class_prob_inversion);
  if (b.full) {
    add("lexyf/in-model-argmin", 1e-10, check_in_model_argmin);
  }
  add("lexyf/nll-kl-offset", 1e-10, check_nll_kl_offset);
  add("lexyf/interior-clamp", 1e-12, check_interior_clamp);

  add("gradients/central-identity", 1e-6, check_central_identity);
  add("gradients/score-mean-zero", 1e-12, check_score_mean_zero);
  add("gradients/conditional-grad-vs-fd", 1e-5, check_conditional_grad_vs_fd);
  add("gradients/dual-jacobian-minimal", 1e-5, check_dual_jacobian_minimal);
  add("gradients/dual-jacobian-onehot", 1e-5, check_dual_jacobian_onehot);
  if (b.full) {
    add("gradients/fisher-vs-fd-hessian", 1e-6, check_fisher_vs_fd_hessian);
  }
  add_control("gradients/central-identity-detects-sign-flip", 1e-3,
              control_central_identity_sign_flip);

  add("optimizers/determinism", 0.0, check_determinism);
  add("optimizers/dsngd-matches-oracle-at-exact-dual", 1e-6,
      check_dsngd_matches_oracle);
  add("optimizers/short-run-improves", 1.0, check_short_run_improves);
  add("optimizers/divergence-guard", 0.0, check_divergence_guard);
  if (b.full) {
    add("optimizers/estimator-consistency", 1.0, check_estimator_consistency);
  }

  add("harness/trace-roundtrip", 0.0, check_trace_roundtrip);
  add("harness/truth-roundtrip", 0.0, check_truth_roundtrip);
  add("harness/config-hash-sensitivity", 0.0, check_config_hash_sensitivity);

  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.pass; });
}

std::string render_report(const std::vector<CheckResult>& results) {
  std::string out;
  char line[256];
  int passed = 0;
  for (const CheckResult& r : results) {
    std::snprintf(line, sizeof(line), "%-46s %s  max_err=%.3e  tol=%.1e%s%s\n",
                  r.name.c_str(), r.pass ? "pass" : "FAIL", r.max_err, r.tol,
                  r.note.empty() ? "" : "  ", r.note.c_str());
    out += line;
    passed += r.pass ? 1 : 0;
  }
  std::snprintf(line, sizeof(line), "%d/%d checks passed\n", passed,
                static_cast<int>(results.size()));
  out += line;
  return out;
}

}  // namespace dsngd::checks
