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

#include "dsngd/gradients.hpp"

#include <string>

#include "dsngd/geometry.hpp"

namespace dsngd::gradients {

using lexyf::ClampCounter;
using lexyf::ClampMode;
using lexyf::ExpectationParams;
using lexyf::ModelSpec;
using lexyf::NaturalParams;

Eigen::VectorXd q_vector(const Eigen::VectorXd& conditional, int y) {
  Eigen::VectorXd out(conditional.size());
  q_vector_into(conditional, y, out);
  return out;
}

void q_vector_into(const Eigen::VectorXd& conditional, int y,
                   Eigen::VectorXd& out) {
  const int s = static_cast<int>(conditional.size());
  if (y < 0 || y >= s) {
    throw Error(ErrorCode::kDomainViolation, "q_vector: class index " +
                                                 std::to_string(y) +
                                                 " out of range");
  }
  if (s <= 16) {
    for (int k = 0; k < s; ++k) {
      out(k) = -conditional(k);
    }
  } else {
    out = -conditional;
  }
  out(y) += 1.0;
}

void apply_sgd_direction(const ModelSpec& spec, const Eigen::VectorXd& q,
                         int x, double scale, NaturalParams& eta) {
  if (x < 0 || x >= spec.m()) {
    throw Error(ErrorCode::kDomainViolation,
                "apply_sgd_direction: feature index out of range");
  }
  switch (spec.kind()) {
    case lexyf::ClassStatKind::kMinimalStandard:
      eta.alpha += scale * q.head(spec.s() - 1);
      break;
    case lexyf::ClassStatKind::kOneHot:
      eta.alpha += scale * q;
      break;
    case lexyf::ClassStatKind::kCustom:
      eta.alpha.noalias() += scale * spec.class_stat().lazyProduct(q);
      break;
  }
  // The gradient's beta part is the outer product of q with the standard
  // feature statistic of x: column x alone, nothing at the reference
  // feature.
  if (x < spec.m() - 1) {
    eta.beta.col(x) += scale * q;
  }
}

Eigen::VectorXd sgd_gradient(const ModelSpec& spec, const NaturalParams& eta,
                             int x, int y) {
  const Eigen::VectorXd cond = lexyf::conditional_y_given_x(spec, eta, x);
  const Eigen::VectorXd q = q_vector(cond, y);
  NaturalParams grad = NaturalParams::zero(spec);
  apply_sgd_direction(spec, q, x, 1.0, grad);
  return lexyf::stack_natural(spec, grad);
}

DualGradBlocks DualGradBlocks::sized(const ModelSpec& spec) {
  DualGradBlocks b;
  b.alpha_block.setZero(spec.alpha_dim(), spec.s());
  b.beta_diag.setZero(spec.t(), spec.s());
  b.d.setZero(spec.s());
  return b;
}

void grad_h_dual_into(const ModelSpec& spec, const ExpectationParams& ep,
                      const Eigen::VectorXd& class_probs, int x,
                      DualGradBlocks& out) {
  const int s = spec.s();
  const int m = spec.m();
  const Eigen::VectorXd& p = class_probs;

  // Per-class categorical score in expectation parameters, standard feature
  // statistic: entry j of the class-k score is delta_{x=j} / theta_kj for
  // x < m-1; every entry is -1 / (1 - sum theta_k) when x is the reference
  // feature. d_i(x) = (1 - theta_i' score_i) / P(Y=i) collapses to 0 in the
  // first case and to 1 / ((1 - sum theta_i) P(Y=i)) in the second.
  if (x < m - 1) {
    out.d.setZero();
    out.beta_diag.setZero();
    for (int k = 0; k < s; ++k) {
      out.beta_diag(x, k) = 1.0 / ep.beta_star(k, x);
    }
    // d == 0 makes the alpha block vanish for either statistic kind.
    out.alpha_block.setZero();
    return;
  }

  for (int k = 0; k < s; ++k) {
    const double rest = p(k) - ep.beta_star.row(k).sum();
    out.d(k) = 1.0 / rest;  // = 1 / ((1 - sum theta_k) p_k)
  }
  for (int k = 0; k < s; ++k) {
    out.beta_diag.col(k).setConstant(-out.d(k));
  }

  if (spec.minimal()) {
    out.alpha_block = spec.alpha_block_mixer();
    out.alpha_block.array().rowwise() *= out.d.transpose().array();
  } else {
    out.alpha_block.setZero();
    out.alpha_block.diagonal() = out.d;
  }
}

namespace {

DualGradBlocks grad_h_dual_checked(const ModelSpec& spec,
                                   const ExpectationParams& ep, int x,
                                   ClampMode mode, ClampCounter* clamps,
                                   const char* what) {
  if (x < 0 || x >= spec.m()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": feature index out of range");
  }
  ExpectationParams interior = ep;
  const int adjusted = lexyf::enforce_interior(spec, interior);
  if (adjusted > 0) {
    if (mode == ClampMode::kStrict) {
      throw Error(ErrorCode::kInteriority,
                  std::string(what) + ": " + std::to_string(adjusted) +
                      " coordinates outside the interior (strict mode)");
    }
    if (clamps != nullptr) {
      clamps->events += adjusted;
    }
  }
  DualGradBlocks out = DualGradBlocks::sized(spec);
  grad_h_dual_into(spec, interior,
                   spec.class_probs_from_alpha_star(interior.alpha_star), x,
                   out);
  return out;
}

}  // namespace

DualGradBlocks grad_h_dual(const ModelSpec& spec, const ExpectationParams& ep,
                           int x, ClampMode mode, ClampCounter* clamps) {
  if (!spec.minimal()) {
    throw Error(ErrorCode::kSpecInvariant,
                "grad_h_dual: spec is not minimal; use grad_h_dual_onehot");
  }
  return grad_h_dual_checked(spec, ep, x, mode, clamps, "grad_h_dual");
}

DualGradBlocks grad_h_dual_onehot(const ModelSpec& spec,
                                  const ExpectationParams& ep, int x,
                                  ClampMode mode, ClampCounter* clamps) {
  if (spec.kind() != lexyf::ClassStatKind::kOneHot) {
    throw Error(ErrorCode::kSpecInvariant,
                "grad_h_dual_onehot: spec does not use the one-hot statistic");
  }
  return grad_h_dual_checked(spec, ep, x, mode, clamps, "grad_h_dual_onehot");
}

void apply_dsngd_direction(const DualGradBlocks& blocks,
                           const Eigen::VectorXd& q, double scale,
                           NaturalParams& eta) {
  eta.alpha.noalias() += scale * blocks.alpha_block.lazyProduct(q);
  for (int k = 0; k < static_cast<int>(q.size()); ++k) {
    eta.beta.row(k) += (scale * q(k)) * blocks.beta_diag.col(k).transpose();
  }
}

Eigen::VectorXd dsngd_direction(const ModelSpec& spec,
                                const DualGradBlocks& blocks,
                                const Eigen::VectorXd& q) {
  if (q.size() != spec.s() || blocks.alpha_block.cols() != spec.s() ||
      blocks.beta_diag.rows() != spec.t()) {
    throw Error(ErrorCode::kDomainViolation,
                "dsngd_direction: shape mismatch");
  }
  NaturalParams dir = NaturalParams::zero(spec);
  apply_dsngd_direction(blocks, q, 1.0, dir);
  return lexyf::stack_natural(spec, dir);
}

Eigen::MatrixXd fisher_exact(const ModelSpec& spec, const NaturalParams& eta) {
  if (!spec.minimal()) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "fisher_exact: the one-hot statistic has affinely dependent "
                "components, so its covariance is singular by construction; "
                "minimal specs only");
  }
  return lexyf::stacked_covariance(spec, eta);
}

Eigen::VectorXd natural_gradient_oracle(const ModelSpec& spec,
                                        const NaturalParams& eta, int x,
                                        int y) {
  return geometry::natural_gradient(fisher_exact(spec, eta),
                                    sgd_gradient(spec, eta, x, y));
}

}  // namespace dsngd::gradients
