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

#ifndef DSNGD_GEOMETRY_HPP_
#define DSNGD_GEOMETRY_HPP_

#include <Eigen/Dense>
#include <optional>

#include "dsngd/errors.hpp"

namespace dsngd::geometry {

/// A smooth strictly convex potential F on an open convex domain E of
/// real n-space. The pair (F, F*) induces a dually flat structure: the
/// primal metric is the Hessian of F, the dual coordinates are the image
/// of the gradient map, and the dual metric is its inverse.
///
/// value() and gradient() must be exact. hessian() defaults to central
/// finite differences of the gradient; override it when an exact form
/// exists. gradient_inverse() may supply a closed-form solve of
/// ∇F(eta) = target; when absent, from_dual() falls back to damped Newton.
class ConvexPotential {
 public:
  virtual ~ConvexPotential() = default;

  virtual int dim() const = 0;
  virtual double value(const Eigen::VectorXd& eta) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& eta) const = 0;
  virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& eta) const;

  virtual std::optional<Eigen::VectorXd> gradient_inverse(
      const Eigen::VectorXd& target) const;

  /// Membership test for E. Default: every finite vector of length dim().
  virtual bool in_domain(const Eigen::VectorXd& eta) const;
};

/// Dual coordinates eta* = ∇F(eta) of a point of E. Lies in the image of
/// the gradient map by construction: instances come out of to_dual() or
/// out of an estimator that clamps to the interior, never from raw data.
struct DualPoint {
  Eigen::VectorXd coords;
};

/// F(eta), checked finite.
double potential_value(const ConvexPotential& f, const Eigen::VectorXd& eta);

/// F(eta) - F(eta_ref) - (eta - eta_ref)' ∇F(eta_ref). Nonnegative for a
/// convex potential; a value below -1e-12 raises kConvexityViolation.
double bregman_divergence(const ConvexPotential& f, const Eigen::VectorXd& eta,
                          const Eigen::VectorXd& eta_ref);

/// eta* = ∇F(eta).
DualPoint to_dual(const ConvexPotential& f, const Eigen::VectorXd& eta);

/// Solves ∇F(eta) = eta*. Uses the potential's closed form when provided,
/// otherwise damped Newton (tolerance 1e-10 on the sup-norm residual,
/// at most 100 iterations, step halving on overshoot).
Eigen::VectorXd from_dual(const ConvexPotential& f, const DualPoint& eta_star);

/// Primal metric ∇²F(eta); must be symmetric positive-definite.
Eigen::MatrixXd metric_primal(const ConvexPotential& f,
                              const Eigen::VectorXd& eta);

/// Dual metric ∇²F*(eta*), computed as the inverse of the primal metric
/// at eta = from_dual(eta*).
Eigen::MatrixXd metric_dual(const ConvexPotential& f, const DualPoint& eta_star);

/// Sup-norm of G_eta · G_eta* - Id; the two metrics are mutual inverses,
/// so this measures the numerical quality of the dual roundtrip.
double crouzeix_residual(const ConvexPotential& f, const Eigen::VectorXd& eta);

/// Legendre conjugate F*(eta*) = eta*' eta - F(eta) at eta = from_dual(eta*).
/// The supremum defining F* is attained there for a differentiable strictly
/// convex F.
double convex_conjugate(const ConvexPotential& f, const DualPoint& eta_star);

/// F(eta) + F*((eta_ref)*) - eta · (eta_ref)*. Agrees with the Bregman
/// divergence of the Legendre pair.
double canonical_divergence(const ConvexPotential& f, const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& eta_ref);

/// Steepest-ascent direction under the metric: solves metric · v = grad by
/// Cholesky. The metric must be symmetric positive-definite.
Eigen::VectorXd natural_gradient(const Eigen::MatrixXd& metric,
                                 const Eigen::VectorXd& grad);

/// F(eta) = ½‖eta‖². Gradient map is the identity, both metrics are the
/// identity; handy as a reference instance.
class QuadraticPotential final : public ConvexPotential {
 public:
  explicit QuadraticPotential(int n) : n_(n) {}
  int dim() const override { return n_; }
  double value(const Eigen::VectorXd& eta) const override {
    return 0.5 * eta.squaredNorm();
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& eta) const override {
    return eta;
  }
  Eigen::MatrixXd hessian(const Eigen::VectorXd& eta) const override {
    return Eigen::MatrixXd::Identity(eta.size(), eta.size());
  }
  std::optional<Eigen::VectorXd> gradient_inverse(
      const Eigen::VectorXd& target) const override {
    return target;
  }

 private:
  int n_;
};

}  // namespace dsngd::geometry

#endif  // DSNGD_GEOMETRY_HPP_
