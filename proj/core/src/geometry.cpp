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

#include "dsngd/geometry.hpp"

#include <cmath>

namespace dsngd::geometry {

namespace {

void require_dim(const ConvexPotential& f, const Eigen::VectorXd& v,
                 const char* what) {
  if (v.size() != f.dim()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": expected dimension " +
                    std::to_string(f.dim()) + ", got " +
                    std::to_string(v.size()));
  }
}

void require_domain(const ConvexPotential& f, const Eigen::VectorXd& eta,
                    const char* what) {
  require_dim(f, eta, what);
  if (!f.in_domain(eta)) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": point outside the potential's domain");
  }
}

}  // namespace

Eigen::MatrixXd ConvexPotential::hessian(const Eigen::VectorXd& eta) const {
  // Central differences of the gradient; step scaled per coordinate.
  const int n = dim();
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd p = eta;
  for (int j = 0; j < n; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(eta[j]));
    const double old = p[j];
    p[j] = old + step;
    const Eigen::VectorXd g_plus = gradient(p);
    p[j] = old - step;
    const Eigen::VectorXd g_minus = gradient(p);
    p[j] = old;
    h.col(j) = (g_plus - g_minus) / (2.0 * step);
  }
  // Symmetrize; the FD columns are not exactly symmetric.
  return 0.5 * (h + h.transpose());
}

std::optional<Eigen::VectorXd> ConvexPotential::gradient_inverse(
    const Eigen::VectorXd&) const {
  return std::nullopt;
}

bool ConvexPotential::in_domain(const Eigen::VectorXd& eta) const {
  return eta.size() == dim() && eta.allFinite();
}

double potential_value(const ConvexPotential& f, const Eigen::VectorXd& eta) {
  require_domain(f, eta, "potential_value");
  const double v = f.value(eta);
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kDomainViolation,
                "potential_value: non-finite potential");
  }
  return v;
}

double bregman_divergence(const ConvexPotential& f, const Eigen::VectorXd& eta,
                          const Eigen::VectorXd& eta_ref) {
  require_domain(f, eta, "bregman_divergence");
  require_domain(f, eta_ref, "bregman_divergence");
  const double d = f.value(eta) - f.value(eta_ref) -
                   (eta - eta_ref).dot(f.gradient(eta_ref));
  if (d < -1e-12) {
    throw Error(ErrorCode::kConvexityViolation,
                "bregman_divergence: negative divergence " + std::to_string(d));
  }
  return d;
}

DualPoint to_dual(const ConvexPotential& f, const Eigen::VectorXd& eta) {
  require_domain(f, eta, "to_dual");
  return DualPoint{f.gradient(eta)};
}

Eigen::VectorXd from_dual(const ConvexPotential& f, const DualPoint& eta_star) {
  require_dim(f, eta_star.coords, "from_dual");
  if (auto closed = f.gradient_inverse(eta_star.coords)) {
    return *closed;
  }

  // Damped Newton on ∇F(eta) = target. The objective F(eta) - target·eta is
  // convex with gradient equal to the residual, so halving the step until
  // the residual norm drops is a valid line search.
  const Eigen::VectorXd& target = eta_star.coords;
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(f.dim());
  Eigen::VectorXd residual = f.gradient(eta) - target;
  constexpr double kTol = 1e-10;
  constexpr int kMaxIters = 100;
  for (int it = 0; it < kMaxIters; ++it) {
    if (residual.lpNorm<Eigen::Infinity>() <= kTol) {
      return eta;
    }
    const Eigen::MatrixXd h = f.hessian(eta);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::kNotPositiveDefinite,
                  "from_dual: Hessian not positive-definite during Newton");
    }
    const Eigen::VectorXd step = llt.solve(residual);
    double scale = 1.0;
    const double base_norm = residual.norm();
    for (int half = 0; half < 60; ++half) {
      const Eigen::VectorXd candidate = eta - scale * step;
      if (f.in_domain(candidate)) {
        const Eigen::VectorXd r = f.gradient(candidate) - target;
        if (r.norm() < base_norm) {
          eta = candidate;
          residual = r;
          break;
        }
      }
      scale *= 0.5;
      if (half == 59) {
        throw Error(ErrorCode::kInversionFailure,
                    "from_dual: line search stalled");
      }
    }
  }
  if (residual.lpNorm<Eigen::Infinity>() <= kTol) {
    return eta;
  }
  throw Error(ErrorCode::kInversionFailure,
              "from_dual: Newton did not reach tolerance in 100 iterations");
}

Eigen::MatrixXd metric_primal(const ConvexPotential& f,
                              const Eigen::VectorXd& eta) {
  require_domain(f, eta, "metric_primal");
  return f.hessian(eta);
}

Eigen::MatrixXd metric_dual(const ConvexPotential& f,
                            const DualPoint& eta_star) {
  const Eigen::VectorXd eta = from_dual(f, eta_star);
  const Eigen::MatrixXd g = f.hessian(eta);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "metric_dual: primal metric not positive-definite");
  }
  return llt.solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
}

double crouzeix_residual(const ConvexPotential& f, const Eigen::VectorXd& eta) {
  const Eigen::MatrixXd g = metric_primal(f, eta);
  const Eigen::MatrixXd g_dual = metric_dual(f, to_dual(f, eta));
  const Eigen::MatrixXd prod = g * g_dual;
  return (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols()))
      .lpNorm<Eigen::Infinity>();
}

double convex_conjugate(const ConvexPotential& f, const DualPoint& eta_star) {
  const Eigen::VectorXd eta = from_dual(f, eta_star);
  return eta_star.coords.dot(eta) - f.value(eta);
}

double canonical_divergence(const ConvexPotential& f,
                            const Eigen::VectorXd& eta,
                            const Eigen::VectorXd& eta_ref) {
  require_domain(f, eta, "canonical_divergence");
  require_domain(f, eta_ref, "canonical_divergence");
  const DualPoint ref_star = to_dual(f, eta_ref);
  return f.value(eta) + convex_conjugate(f, ref_star) -
         eta.dot(ref_star.coords);
}

Eigen::VectorXd natural_gradient(const Eigen::MatrixXd& metric,
                                 const Eigen::VectorXd& grad) {
  if (metric.rows() != metric.cols() || metric.rows() != grad.size()) {
    throw Error(ErrorCode::kDomainViolation,
                "natural_gradient: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "natural_gradient: metric not positive-definite");
  }
  return llt.solve(grad);
}

}  // namespace dsngd::geometry
