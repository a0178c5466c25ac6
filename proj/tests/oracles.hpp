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

// Test-side oracles. Everything here is written naively and on purpose
// shares no code with the library: finite differences for derivatives,
// plain cell loops for enumeration. Slow is fine; independent is the point.

#ifndef DSNGD_TESTS_ORACLES_HPP_
#define DSNGD_TESTS_ORACLES_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "dsngd/errors.hpp"
#include "dsngd/lexyf.hpp"
#include "dsngd/random.hpp"

namespace dsngd::testing {

inline double sup(const Eigen::MatrixXd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double rel_sup(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return sup(got - want) / std::max(1.0, sup(want));
}

/// Runs fn and reports whether it threw a dsngd::Error with the wanted code.
template <typename Fn>
bool throws_code(Fn&& fn, ErrorCode want) {
  try {
    std::forward<Fn>(fn)();
  } catch (const Error& e) {
    return e.code() == want;
  } catch (...) {
    return false;
  }
  return false;
}

inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (int i = 0; i < x.size(); ++i) {
    p(i) = x(i) + h;
    const double up = f(p);
    p(i) = x(i) - h;
    const double dn = f(p);
    p(i) = x(i);
    g(i) = (up - dn) / (2.0 * h);
  }
  return g;
}

/// J(i, j) = d f_i / d x_j, central differences.
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  Eigen::MatrixXd j;
  Eigen::VectorXd p = x;
  for (int c = 0; c < x.size(); ++c) {
    p(c) = x(c) + h;
    const Eigen::VectorXd up = f(p);
    p(c) = x(c) - h;
    const Eigen::VectorXd dn = f(p);
    p(c) = x(c);
    if (j.size() == 0) {
      j.resize(up.size(), x.size());
    }
    j.col(c) = (up - dn) / (2.0 * h);
  }
  return j;
}

/// Four-corner second differences; O(n^2) function evaluations.
inline Eigen::MatrixXd fd_hessian(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd p;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      p = x;
      p(i) += h;
      p(j) += h;
      const double pp = f(p);
      p = x;
      p(i) += h;
      p(j) -= h;
      const double pm = f(p);
      p = x;
      p(i) -= h;
      p(j) += h;
      const double mp = f(p);
      p = x;
      p(i) -= h;
      p(j) -= h;
      const double mm = f(p);
      hess(i, j) = (pp - pm - mp + mm) / (4.0 * h * h);
    }
  }
  return hess;
}

/// The joint table by raw loops over the statistic matrices. No max
/// subtraction; callers keep the parameters bounded.
inline Eigen::MatrixXd naive_joint(const lexyf::ModelSpec& spec,
                                   const lexyf::NaturalParams& eta) {
  Eigen::MatrixXd w(spec.m(), spec.s());
  for (int x = 0; x < spec.m(); ++x) {
    for (int y = 0; y < spec.s(); ++y) {
      double e = 0.0;
      for (int r = 0; r < spec.alpha_dim(); ++r) {
        e += spec.class_stat()(r, y) * eta.alpha(r);
      }
      for (int j = 0; j < spec.t(); ++j) {
        e += eta.beta(y, j) * spec.feature_stat()(j, x);
      }
      w(x, y) = std::exp(e);
    }
  }
  return w / w.sum();
}

/// Stacked statistic assembled by hand: class statistic column, then a
/// single unit in the y-th beta row at feature x (nothing for x = m-1).
inline Eigen::VectorXd naive_stacked_stat(const lexyf::ModelSpec& spec, int x,
                                          int y) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(spec.dim());
  r.head(spec.alpha_dim()) = spec.class_stat().col(y);
  if (x < spec.t()) {
    r(spec.alpha_dim() + y * spec.t() + x) = 1.0;
  }
  return r;
}

inline Eigen::VectorXd naive_mean_stat(const lexyf::ModelSpec& spec,
                                       const Eigen::MatrixXd& table) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(spec.dim());
  for (int x = 0; x < spec.m(); ++x) {
    for (int y = 0; y < spec.s(); ++y) {
      mu += table(x, y) * naive_stacked_stat(spec, x, y);
    }
  }
  return mu;
}

inline Eigen::MatrixXd naive_covariance(const lexyf::ModelSpec& spec,
                                        const lexyf::NaturalParams& eta) {
  const Eigen::MatrixXd table = naive_joint(spec, eta);
  const Eigen::VectorXd mu = naive_mean_stat(spec, table);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(spec.dim(), spec.dim());
  for (int x = 0; x < spec.m(); ++x) {
    for (int y = 0; y < spec.s(); ++y) {
      const Eigen::VectorXd r = naive_stacked_stat(spec, x, y);
      second += table(x, y) * (r * r.transpose());
    }
  }
  return second - mu * mu.transpose();
}

/// KL between two full joint tables of the same shape.
inline double naive_joint_kl(const Eigen::MatrixXd& p,
                             const Eigen::MatrixXd& q) {
  double acc = 0.0;
  for (int x = 0; x < p.rows(); ++x) {
    for (int y = 0; y < p.cols(); ++y) {
      acc += p(x, y) * std::log(p(x, y) / q(x, y));
    }
  }
  return acc;
}

/// E_P[-log Q(y | x)] with both conditionals recomputed from raw tables.
inline double naive_expected_nll(const Eigen::MatrixXd& truth,
                                 const Eigen::MatrixXd& model) {
  double acc = 0.0;
  for (int x = 0; x < truth.rows(); ++x) {
    const double qx = model.row(x).sum();
    for (int y = 0; y < truth.cols(); ++y) {
      acc -= truth(x, y) * std::log(model(x, y) / qx);
    }
  }
  return acc;
}

inline double naive_expected_kl(const Eigen::MatrixXd& truth,
                                const Eigen::MatrixXd& model) {
  double acc = 0.0;
  for (int x = 0; x < truth.rows(); ++x) {
    const double px = truth.row(x).sum();
    const double qx = model.row(x).sum();
    for (int y = 0; y < truth.cols(); ++y) {
      acc += truth(x, y) *
             std::log((truth(x, y) / px) / (model(x, y) / qx));
    }
  }
  return acc;
}

/// H(Y | X) of a joint table; the constant gap between expected NLL and
/// expected KL.
inline double naive_conditional_entropy(const Eigen::MatrixXd& truth) {
  double acc = 0.0;
  for (int x = 0; x < truth.rows(); ++x) {
    const double px = truth.row(x).sum();
    for (int y = 0; y < truth.cols(); ++y) {
      acc -= truth(x, y) * std::log(truth(x, y) / px);
    }
  }
  return acc;
}

inline lexyf::NaturalParams random_eta(const lexyf::ModelSpec& spec, Rng& rng,
                                       double scale = 2.0) {
  lexyf::NaturalParams eta = lexyf::NaturalParams::zero(spec);
  for (int i = 0; i < eta.alpha.size(); ++i) {
    eta.alpha(i) = uniform(rng, -scale, scale);
  }
  for (int i = 0; i < eta.beta.rows(); ++i) {
    for (int j = 0; j < eta.beta.cols(); ++j) {
      eta.beta(i, j) = uniform(rng, -scale, scale);
    }
  }
  return eta;
}

}  // namespace dsngd::testing

#endif  // DSNGD_TESTS_ORACLES_HPP_
