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

#ifndef DSNGD_GRADIENTS_HPP_
#define DSNGD_GRADIENTS_HPP_

#include <Eigen/Dense>

#include "dsngd/lexyf.hpp"

namespace dsngd::gradients {

/// All gradients here are ascent directions of log P(y | x); optimizers add
/// them scaled by the step size.

/// q(y, x, P): one-hot of the observed class minus the model conditional.
/// Entries sum to zero.
Eigen::VectorXd q_vector(const Eigen::VectorXd& conditional, int y);
void q_vector_into(const Eigen::VectorXd& conditional, int y,
                   Eigen::VectorXd& out);

/// eta += scale * (S q, T(x) (x) q): the natural-parameter gradient applied
/// in place, no allocation. The beta part is the rank-one outer product of
/// q with T(x), written row-wise into beta.
void apply_sgd_direction(const lexyf::ModelSpec& spec,
                         const Eigen::VectorXd& q, int x, double scale,
                         lexyf::NaturalParams& eta);

/// Stacked gradient of log P_eta(y | x) with respect to eta.
Eigen::VectorXd sgd_gradient(const lexyf::ModelSpec& spec,
                             const lexyf::NaturalParams& eta, int x, int y);

/// The explicit gradient of h(x, .) in expectation coordinates, kept in its
/// structured form. beta_diag column k is the diagonal of the k-th
/// beta-block; it is never densified. d holds the per-class scalars of the
/// alpha-block.
struct DualGradBlocks {
  Eigen::MatrixXd alpha_block;  // alpha_dim x s
  Eigen::MatrixXd beta_diag;    // t x s
  Eigen::VectorXd d;            // s

  static DualGradBlocks sized(const lexyf::ModelSpec& spec);
};

/// Blocks for a minimal spec: alpha-block is the constant mixer
/// (S_M - S(s-1) 1')^{-T} [Id | -1] with columns scaled by d_i(x); the
/// beta-block diagonals are the per-class categorical scores over the class
/// probability. Inputs outside the interior are clamped (counted) or
/// rejected in strict mode.
DualGradBlocks grad_h_dual(const lexyf::ModelSpec& spec,
                           const lexyf::ExpectationParams& ep, int x,
                           lexyf::ClampMode mode = lexyf::ClampMode::kClamp,
                           lexyf::ClampCounter* clamps = nullptr);

/// One-hot specialization: the alpha-block is diag(d_i(x)); beta-blocks are
/// identical in form to the minimal case.
DualGradBlocks grad_h_dual_onehot(
    const lexyf::ModelSpec& spec, const lexyf::ExpectationParams& ep, int x,
    lexyf::ClampMode mode = lexyf::ClampMode::kClamp,
    lexyf::ClampCounter* clamps = nullptr);

/// Allocation-free kernel behind both variants; dispatches on the spec's
/// statistic kind. ep must already be interior and class_probs must be its
/// decoded class probabilities.
void grad_h_dual_into(const lexyf::ModelSpec& spec,
                      const lexyf::ExpectationParams& ep,
                      const Eigen::VectorXd& class_probs, int x,
                      DualGradBlocks& out);

/// eta += scale * (blocks . q): alpha part alpha_block * q, beta row k gets
/// q_k times the k-th diagonal. Cost O(s t + s * dim alpha), nothing dense
/// is formed.
void apply_dsngd_direction(const DualGradBlocks& blocks,
                           const Eigen::VectorXd& q, double scale,
                           lexyf::NaturalParams& eta);

/// Stacked form of blocks . q.
Eigen::VectorXd dsngd_direction(const lexyf::ModelSpec& spec,
                                const DualGradBlocks& blocks,
                                const Eigen::VectorXd& q);

/// Exact Fisher information in stacked natural coordinates: the covariance
/// of the stacked statistic by enumeration. Minimal specs only; the one-hot
/// statistic makes it singular by construction and the call is refused.
Eigen::MatrixXd fisher_exact(const lexyf::ModelSpec& spec,
                             const lexyf::NaturalParams& eta);

/// Fisher solve against the SGD gradient: the reference natural gradient,
/// exact and deliberately expensive.
Eigen::VectorXd natural_gradient_oracle(const lexyf::ModelSpec& spec,
                                        const lexyf::NaturalParams& eta, int x,
                                        int y);

}  // namespace dsngd::gradients

#endif  // DSNGD_GRADIENTS_HPP_
