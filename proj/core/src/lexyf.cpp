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

#include "dsngd/lexyf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dsngd::lexyf {

namespace {

// Scalar softmax below this class count; Eigen expression setup costs more
// than the arithmetic there.
constexpr int kSmallSoftmaxClasses = 16;

void require_counts(int s, int m) {
  if (s < 2 || m < 2) {
    throw Error(ErrorCode::kConfig,
                "ModelSpec: s and m must both be at least 2, got s=" +
                    std::to_string(s) + " m=" + std::to_string(m));
  }
}

void require_cell(const ModelSpec& spec, int x, int y, const char* what) {
  if (x < 0 || x >= spec.m() || y < 0 || y >= spec.s()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": cell (" + std::to_string(x) + "," +
                    std::to_string(y) + ") outside " + std::to_string(spec.m()) +
                    "x" + std::to_string(spec.s()) + " grid");
  }
}

void require_shape(const ModelSpec& spec, const NaturalParams& eta,
                   const char* what) {
  if (eta.alpha.size() != spec.alpha_dim() || eta.beta.rows() != spec.s() ||
      eta.beta.cols() != spec.t()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": parameter shape does not match spec");
  }
  if (!eta.alpha.allFinite() || !eta.beta.allFinite()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": non-finite natural parameters");
  }
}

void require_shape(const ModelSpec& spec, const ExpectationParams& ep,
                   const char* what) {
  if (ep.alpha_star.size() != spec.alpha_dim() ||
      ep.beta_star.rows() != spec.s() || ep.beta_star.cols() != spec.t()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": parameter shape does not match spec");
  }
}

Eigen::MatrixXd standard_feature_stat(int m) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m - 1, m);
  t.leftCols(m - 1).setIdentity();
  return t;
}

// Exponent of cell (x, y) before normalization, for all cells: m x s.
Eigen::MatrixXd exponent_table(const ModelSpec& spec,
                               const NaturalParams& eta) {
  const Eigen::VectorXd ay = spec.class_stat().transpose() * eta.alpha;
  Eigen::MatrixXd ex = (eta.beta * spec.feature_stat()).transpose();
  ex.rowwise() += ay.transpose();
  return ex;
}

double log_sum_exp(const Eigen::Ref<const Eigen::ArrayXXd>& a) {
  const double mx = a.maxCoeff();
  return mx + std::log((a - mx).exp().sum());
}

// log of sum(exp(v)) and, via out, the log-softmax of v.
void log_softmax(const Eigen::VectorXd& v, Eigen::VectorXd& out) {
  const double mx = v.maxCoeff();
  const double lse = mx + std::log((v.array() - mx).exp().sum());
  out = v.array() - lse;
}

// Conditional probability of feature x under per-class means theta_row
// (standard feature statistic): entry x for x < m-1, remainder otherwise.
double conditional_from_theta(const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                              int x, int m) {
  if (x < m - 1) {
    return theta(x);
  }
  return 1.0 - theta.sum();
}

}  // namespace

ModelSpec::ModelSpec(int s, int m, ClassStatKind kind,
                     Eigen::MatrixXd class_stat)
    : s_(s),
      m_(m),
      kind_(kind),
      class_stat_(std::move(class_stat)),
      feature_stat_(standard_feature_stat(m)) {
  if (kind_ == ClassStatKind::kOneHot) {
    return;
  }
  // Minimal kinds: validate identifiability and cache the constant solves.
  const Eigen::MatrixXd s_m = class_stat_.leftCols(s_ - 1);
  Eigen::FullPivLU<Eigen::MatrixXd> check(s_m);
  if (!check.isInvertible()) {
    throw Error(ErrorCode::kSpecInvariant,
                "ModelSpec: class-statistic columns S(0..s-2) are singular");
  }
  const Eigen::MatrixXd centered =
      s_m - class_stat_.col(s_ - 1) * Eigen::RowVectorXd::Ones(s_ - 1);
  Eigen::FullPivLU<Eigen::MatrixXd> check_centered(centered);
  if (!check_centered.isInvertible()) {
    throw Error(ErrorCode::kSpecInvariant,
                "ModelSpec: class statistic is not identifiable (columns lie "
                "on a common affine hyperplane)");
  }
  centered_lu_.compute(centered);
  centered_t_lu_.compute(centered.transpose());
  class_stat_t_lu_.compute(s_m.transpose());
  Eigen::MatrixXd ext(s_ - 1, s_);
  ext.leftCols(s_ - 1).setIdentity();
  ext.col(s_ - 1).setConstant(-1.0);
  alpha_block_mixer_ = centered_t_lu_.solve(ext);
}

ModelSpec ModelSpec::minimal_standard(int s, int m) {
  require_counts(s, m);
  Eigen::MatrixXd stat = Eigen::MatrixXd::Zero(s - 1, s);
  stat.leftCols(s - 1).setIdentity();
  return ModelSpec(s, m, ClassStatKind::kMinimalStandard, std::move(stat));
}

ModelSpec ModelSpec::one_hot(int s, int m) {
  require_counts(s, m);
  return ModelSpec(s, m, ClassStatKind::kOneHot,
                   Eigen::MatrixXd::Identity(s, s));
}

ModelSpec ModelSpec::custom(int s, int m, const Eigen::MatrixXd& class_stat) {
  require_counts(s, m);
  if (class_stat.rows() != s - 1 || class_stat.cols() != s) {
    throw Error(ErrorCode::kConfig,
                "ModelSpec::custom: class statistic must be (s-1) x s");
  }
  if (!class_stat.allFinite()) {
    throw Error(ErrorCode::kConfig,
                "ModelSpec::custom: non-finite class statistic");
  }
  return ModelSpec(s, m, ClassStatKind::kCustom, class_stat);
}

void ModelSpec::require_minimal(const char* what) const {
  if (!minimal()) {
    throw Error(ErrorCode::kSpecInvariant,
                std::string(what) + ": requires a minimal class statistic");
  }
}

Eigen::VectorXd ModelSpec::class_probs_from_alpha_star(
    const Eigen::VectorXd& alpha_star) const {
  Eigen::VectorXd p(s_);
  class_probs_into(alpha_star, p);
  return p;
}

void ModelSpec::class_probs_into(const Eigen::VectorXd& alpha_star,
                                 Eigen::VectorXd& out) const {
  if (alpha_star.size() != alpha_dim() || out.size() != s_) {
    throw Error(ErrorCode::kDomainViolation,
                "class_probs_into: wrong vector length");
  }
  if (kind_ == ClassStatKind::kOneHot) {
    out = alpha_star;
    return;
  }
  if (kind_ == ClassStatKind::kMinimalStandard) {
    // The standard statistic's expectations are the leading s-1 class
    // probabilities themselves; the centered solve below would be an
    // identity solve.
    out.head(s_ - 1) = alpha_star;
    out(s_ - 1) = 1.0 - alpha_star.sum();
    return;
  }
  out.head(s_ - 1) = centered_lu_.solve(alpha_star - class_stat_.col(s_ - 1));
  out(s_ - 1) = 1.0 - out.head(s_ - 1).sum();
}

Eigen::VectorXd ModelSpec::alpha_star_from_class_probs(
    const Eigen::VectorXd& p) const {
  if (p.size() != s_) {
    throw Error(ErrorCode::kDomainViolation,
                "alpha_star_from_class_probs: wrong probability length");
  }
  return class_stat_ * p;
}

Eigen::VectorXd ModelSpec::alpha_bar_from_class_probs(
    const Eigen::VectorXd& p) const {
  require_minimal("alpha_bar_from_class_probs");
  const double log_ref = std::log(p(s_ - 1));
  Eigen::VectorXd rhs(s_ - 1);
  for (int i = 0; i < s_ - 1; ++i) {
    rhs(i) = std::log(p(i)) - log_ref;
  }
  return centered_t_lu_.solve(rhs);
}

const Eigen::MatrixXd& ModelSpec::alpha_block_mixer() const {
  require_minimal("alpha_block_mixer");
  return alpha_block_mixer_;
}

Eigen::VectorXd ModelSpec::solve_centered_transposed(
    const Eigen::VectorXd& rhs) const {
  require_minimal("solve_centered_transposed");
  return centered_t_lu_.solve(rhs);
}

Eigen::VectorXd ModelSpec::solve_class_stat_transposed(
    const Eigen::VectorXd& rhs) const {
  require_minimal("solve_class_stat_transposed");
  return class_stat_t_lu_.solve(rhs);
}

NaturalParams NaturalParams::zero(const ModelSpec& spec) {
  return NaturalParams{Eigen::VectorXd::Zero(spec.alpha_dim()),
                       Eigen::MatrixXd::Zero(spec.s(), spec.t())};
}

Eigen::MatrixXd theta_star(const ModelSpec& spec, const ExpectationParams& ep) {
  require_shape(spec, ep, "theta_star");
  const Eigen::VectorXd p = spec.class_probs_from_alpha_star(ep.alpha_star);
  return ep.beta_star.array().colwise() / p.array();
}

GroundTruth GroundTruth::from_table(Eigen::MatrixXd table) {
  if (table.rows() < 2 || table.cols() < 2) {
    throw Error(ErrorCode::kConfig,
                "GroundTruth: table must be at least 2x2");
  }
  if (!table.allFinite() || (table.array() <= 0.0).any()) {
    throw Error(ErrorCode::kDomainViolation,
                "GroundTruth: entries must be strictly positive and finite");
  }
  const double total = table.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::kDomainViolation,
                "GroundTruth: table sums to " + std::to_string(total) +
                    ", not 1 within 1e-12");
  }
  return GroundTruth(std::move(table));
}

double log_partition(const ModelSpec& spec, const NaturalParams& eta) {
  require_shape(spec, eta, "log_partition");
  return log_sum_exp(exponent_table(spec, eta).array());
}

double joint_log_prob(const ModelSpec& spec, const NaturalParams& eta, int x,
                      int y) {
  require_cell(spec, x, y, "joint_log_prob");
  require_shape(spec, eta, "joint_log_prob");
  const Eigen::MatrixXd ex = exponent_table(spec, eta);
  return ex(x, y) - log_sum_exp(ex.array());
}

Eigen::VectorXd h_vector(const ModelSpec& spec, const NaturalParams& eta,
                         int x) {
  require_cell(spec, x, 0, "h_vector");
  require_shape(spec, eta, "h_vector");
  const Eigen::MatrixXd ex = exponent_table(spec, eta);
  return ex.row(x).transpose().array() - log_sum_exp(ex.array());
}

Eigen::VectorXd conditional_y_given_x(const ModelSpec& spec,
                                      const NaturalParams& eta, int x) {
  Eigen::VectorXd scratch(spec.s());
  Eigen::VectorXd out(spec.s());
  conditional_y_given_x_into(spec, eta, x, scratch, out);
  return out;
}

void conditional_y_given_x_into(const ModelSpec& spec,
                                const NaturalParams& eta, int x,
                                Eigen::VectorXd& scratch,
                                Eigen::VectorXd& out) {
  require_cell(spec, x, 0, "conditional_y_given_x");
  // The partition function cancels: softmax over the per-class exponents.
  // The feature statistic is standard by construction, so its x-th column is
  // a basis vector (zero at the reference feature) and the beta term is a
  // column gather rather than a matvec.
  const int s = spec.s();
  const bool interior_x = x < spec.m() - 1;
  if (s <= kSmallSoftmaxClasses && spec.kind() != ClassStatKind::kCustom) {
    // Scalar path for the optimizer loops; expression setup dominates here.
    const int head = spec.kind() == ClassStatKind::kMinimalStandard ? s - 1 : s;
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < s; ++k) {
      double e = interior_x ? eta.beta(k, x) : 0.0;
      if (k < head) {
        e += eta.alpha(k);
      }
      scratch(k) = e;
      mx = std::max(mx, e);
    }
    double sum = 0.0;
    for (int k = 0; k < s; ++k) {
      const double e = std::exp(scratch(k) - mx);
      out(k) = e;
      sum += e;
    }
    for (int k = 0; k < s; ++k) {
      out(k) /= sum;
    }
    return;
  }
  if (interior_x) {
    scratch = eta.beta.col(x);
  } else {
    scratch.setZero();
  }
  switch (spec.kind()) {
    case ClassStatKind::kMinimalStandard:
      scratch.head(s - 1) += eta.alpha;
      break;
    case ClassStatKind::kOneHot:
      scratch += eta.alpha;
      break;
    case ClassStatKind::kCustom:
      scratch.noalias() +=
          spec.class_stat().transpose().lazyProduct(eta.alpha);
      break;
  }
  const double mx = scratch.maxCoeff();
  out = (scratch.array() - mx).exp();
  out /= out.sum();
}

Eigen::MatrixXd joint_table(const ModelSpec& spec, const NaturalParams& eta) {
  require_shape(spec, eta, "joint_table");
  const Eigen::MatrixXd ex = exponent_table(spec, eta);
  const double mx = ex.maxCoeff();
  Eigen::MatrixXd table = (ex.array() - mx).exp();
  table /= table.sum();
  return table;
}

ExpectationParams natural_to_expectation(const ModelSpec& spec,
                                         const NaturalParams& eta) {
  const Eigen::MatrixXd table = joint_table(spec, eta);
  const Eigen::VectorXd p = table.colwise().sum().transpose();
  ExpectationParams ep;
  ep.alpha_star = spec.class_stat() * p;
  ep.beta_star = (spec.feature_stat() * table).transpose();
  return ep;
}

namespace {

// Raises every entry of v below eps to eps and rescales the rest so the
// total becomes budget. Entries pushed under eps by the rescale are lifted
// back, with the surplus taken from the largest entry. Returns the number
// of entries that violated the floor initially; v is exact on return:
// all entries >= eps, sum == budget (up to roundoff).
int clamp_to_budget(Eigen::Ref<Eigen::VectorXd> v, double eps, double budget) {
  const int n = static_cast<int>(v.size());
  int low = 0;
  double low_mass = 0.0;
  for (int i = 0; i < n; ++i) {
    if (v(i) < eps) {
      ++low;
      low_mass += v(i);
    }
  }
  const double others = v.sum() - low_mass;
  if (low == 0 && others + low_mass <= budget) {
    return 0;
  }
  if (low == n) {
    v.setConstant(eps);
    return n;
  }
  const double scale = (budget - low * eps) / others;
  for (int i = 0; i < n; ++i) {
    v(i) = v(i) < eps ? eps : v(i) * scale;
  }
  // The rescale can undercut the floor when the input had negative mass.
  double surplus = 0.0;
  int arg_max = 0;
  for (int i = 0; i < n; ++i) {
    if (v(i) > v(arg_max)) arg_max = i;
    if (v(i) < eps) {
      surplus += eps - v(i);
      v(i) = eps;
    }
  }
  v(arg_max) -= surplus;
  return std::max(low, 1);
}

}  // namespace

int enforce_interior(const ModelSpec& spec, ExpectationParams& ep) {
  require_shape(spec, ep, "enforce_interior");
  if (!ep.alpha_star.allFinite() || !ep.beta_star.allFinite()) {
    throw Error(ErrorCode::kInteriority,
                "enforce_interior: non-finite expectation parameters");
  }
  int adjusted = 0;

  Eigen::VectorXd p = spec.class_probs_from_alpha_star(ep.alpha_star);
  if ((p.array() < kInteriorEps).any()) {
    adjusted += clamp_to_budget(p, kInteriorEps, 1.0);
  }

  Eigen::MatrixXd theta = ep.beta_star.array().colwise() / p.array();
  int theta_adjusted = 0;
  for (int i = 0; i < spec.s(); ++i) {
    Eigen::VectorXd row = theta.row(i).transpose();
    if ((row.array() < kInteriorEps).any() ||
        row.sum() > 1.0 - 2.0 * kInteriorEps) {
      // The conditional mean must stay in the open simplex interior with the
      // reference cell keeping mass too: entries >= eps, sum <= 1 - 2 eps.
      if (row.sum() <= 1.0 - 2.0 * kInteriorEps) {
        // Floor violations only; no rescale of the rest is needed.
        for (int j = 0; j < spec.t(); ++j) {
          if (row(j) < kInteriorEps) {
            ++theta_adjusted;
            row(j) = kInteriorEps;
          }
        }
        if (row.sum() > 1.0 - 2.0 * kInteriorEps) {
          theta_adjusted += clamp_to_budget(row, kInteriorEps,
                                            1.0 - 2.0 * kInteriorEps);
        }
      } else {
        theta_adjusted +=
            clamp_to_budget(row, kInteriorEps, 1.0 - 2.0 * kInteriorEps);
      }
      theta.row(i) = row.transpose();
    }
  }
  adjusted += theta_adjusted;

  if (adjusted > 0) {
    ep.alpha_star = spec.alpha_star_from_class_probs(p);
    ep.beta_star = theta.array().colwise() * p.array();
  }
  return adjusted;
}

NaturalParams expectation_to_natural(const ModelSpec& spec,
                                     const ExpectationParams& ep,
                                     ClampMode mode, ClampCounter* clamps) {
  require_shape(spec, ep, "expectation_to_natural");
  ExpectationParams interior = ep;
  const int adjusted = enforce_interior(spec, interior);
  if (adjusted > 0) {
    if (mode == ClampMode::kStrict) {
      throw Error(ErrorCode::kInteriority,
                  "expectation_to_natural: " + std::to_string(adjusted) +
                      " coordinates outside the interior (strict mode)");
    }
    if (clamps != nullptr) {
      clamps->events += adjusted;
    }
  }

  const Eigen::VectorXd p =
      spec.class_probs_from_alpha_star(interior.alpha_star);
  const Eigen::MatrixXd theta =
      interior.beta_star.array().colwise() / p.array();

  // Per-class categorical inversion, standard feature statistic:
  // theta_bar_ij = log theta_ij - log(1 - sum_j theta_ij).
  Eigen::MatrixXd theta_bar(spec.s(), spec.t());
  for (int i = 0; i < spec.s(); ++i) {
    const double log_rest = std::log(1.0 - theta.row(i).sum());
    theta_bar.row(i) = theta.row(i).array().log() - log_rest;
  }

  if (spec.minimal()) {
    ClassicalParams c{spec.alpha_bar_from_class_probs(p), std::move(theta_bar)};
    return classical_to_natural(spec, c);
  }

  // One-hot: no reference class. Fix the gauge so the partition function is
  // exactly 1: alpha_i = log P(Y=i) - log A_i.
  NaturalParams eta;
  eta.beta = std::move(theta_bar);
  eta.alpha.resize(spec.s());
  for (int i = 0; i < spec.s(); ++i) {
    Eigen::VectorXd ex = eta.beta.row(i) * spec.feature_stat();
    const double log_a = log_sum_exp(ex.array());
    eta.alpha(i) = std::log(p(i)) - log_a;
  }
  return eta;
}

NaturalParams classical_to_natural(const ModelSpec& spec,
                                   const ClassicalParams& c) {
  if (c.alpha_bar.size() != spec.s() - 1 || c.theta_bar.rows() != spec.s() ||
      c.theta_bar.cols() != spec.t()) {
    throw Error(ErrorCode::kDomainViolation,
                "classical_to_natural: parameter shape does not match spec");
  }
  if (!c.alpha_bar.allFinite() || !c.theta_bar.allFinite()) {
    throw Error(ErrorCode::kDomainViolation,
                "classical_to_natural: non-finite classical parameters");
  }
  if (!spec.minimal()) {
    throw Error(ErrorCode::kSpecInvariant,
                "classical_to_natural: one-hot class statistic has no "
                "classical chart here");
  }

  const int s = spec.s();
  Eigen::VectorXd log_a(s);
  for (int i = 0; i < s; ++i) {
    Eigen::VectorXd ex = c.theta_bar.row(i) * spec.feature_stat();
    log_a(i) = log_sum_exp(ex.array());
  }

  NaturalParams eta;
  eta.beta = c.theta_bar;
  if (spec.standard_class_stat()) {
    eta.alpha =
        c.alpha_bar - (log_a.head(s - 1).array() - log_a(s - 1)).matrix();
    return eta;
  }

  // General full-rank class statistic: the shared offset mu solves the
  // reference-class equation after eliminating alpha.
  const Eigen::VectorXd s_last = spec.class_stat().col(s - 1);
  const Eigen::VectorXd w_log =
      spec.solve_class_stat_transposed(log_a.head(s - 1));
  const Eigen::VectorXd w_one =
      spec.solve_class_stat_transposed(Eigen::VectorXd::Ones(s - 1));
  const double denom = s_last.dot(w_one) - 1.0;
  if (std::abs(denom) < 1e-12) {
    throw Error(ErrorCode::kSpecInvariant,
                "classical_to_natural: degenerate class statistic (offset "
                "equation has no solution)");
  }
  const double mu = (s_last.dot(w_log) - log_a(s - 1)) / denom;
  eta.alpha = c.alpha_bar - spec.solve_class_stat_transposed(
                                (log_a.head(s - 1).array() - mu).matrix());
  return eta;
}

Eigen::VectorXd stacked_statistic(const ModelSpec& spec, int x, int y) {
  Eigen::VectorXd out(spec.dim());
  stacked_statistic_into(spec, x, y, out);
  return out;
}

void stacked_statistic_into(const ModelSpec& spec, int x, int y,
                            Eigen::VectorXd& out) {
  require_cell(spec, x, y, "stacked_statistic");
  out.setZero();
  out.head(spec.alpha_dim()) = spec.class_stat().col(y);
  out.segment(spec.alpha_dim() + y * spec.t(), spec.t()) =
      spec.feature_stat().col(x);
}

Eigen::VectorXd stack_natural(const ModelSpec& spec, const NaturalParams& eta) {
  require_shape(spec, eta, "stack_natural");
  Eigen::VectorXd v(spec.dim());
  v.head(spec.alpha_dim()) = eta.alpha;
  for (int i = 0; i < spec.s(); ++i) {
    v.segment(spec.alpha_dim() + i * spec.t(), spec.t()) =
        eta.beta.row(i).transpose();
  }
  return v;
}

NaturalParams unstack_natural(const ModelSpec& spec, const Eigen::VectorXd& v) {
  if (v.size() != spec.dim()) {
    throw Error(ErrorCode::kDomainViolation,
                "unstack_natural: wrong stacked length");
  }
  NaturalParams eta;
  eta.alpha = v.head(spec.alpha_dim());
  eta.beta.resize(spec.s(), spec.t());
  for (int i = 0; i < spec.s(); ++i) {
    eta.beta.row(i) =
        v.segment(spec.alpha_dim() + i * spec.t(), spec.t()).transpose();
  }
  return eta;
}

Eigen::VectorXd stack_expectation(const ModelSpec& spec,
                                  const ExpectationParams& ep) {
  require_shape(spec, ep, "stack_expectation");
  NaturalParams view{ep.alpha_star, ep.beta_star};
  return stack_natural(spec, view);
}

ExpectationParams unstack_expectation(const ModelSpec& spec,
                                      const Eigen::VectorXd& v) {
  NaturalParams view = unstack_natural(spec, v);
  return ExpectationParams{std::move(view.alpha), std::move(view.beta)};
}

Eigen::VectorXd dual_h_vector(const ModelSpec& spec,
                              const ExpectationParams& ep, int x) {
  require_cell(spec, x, 0, "dual_h_vector");
  require_shape(spec, ep, "dual_h_vector");
  const Eigen::VectorXd p = spec.class_probs_from_alpha_star(ep.alpha_star);
  Eigen::VectorXd h(spec.s());
  for (int i = 0; i < spec.s(); ++i) {
    if (p(i) <= 0.0) {
      throw Error(ErrorCode::kInteriority,
                  "dual_h_vector: nonpositive class probability");
    }
    const Eigen::RowVectorXd theta = ep.beta_star.row(i) / p(i);
    const double cond = conditional_from_theta(theta, x, spec.m());
    if (cond <= 0.0) {
      throw Error(ErrorCode::kInteriority,
                  "dual_h_vector: nonpositive conditional probability");
    }
    h(i) = std::log(p(i)) + std::log(cond);
  }
  return h;
}

CellSampler::CellSampler(const Eigen::MatrixXd& table)
    : m_(static_cast<int>(table.rows())), s_(static_cast<int>(table.cols())) {
  cdf_.resize(m_ * s_);
  double acc = 0.0;
  for (int x = 0; x < m_; ++x) {
    for (int y = 0; y < s_; ++y) {
      acc += table(x, y);
      cdf_(x * s_ + y) = acc;
    }
  }
  cdf_(m_ * s_ - 1) = 1.0;
}

CellSampler::CellSampler(const GroundTruth& truth)
    : CellSampler(truth.table()) {}

CellSampler::CellSampler(const ModelSpec& spec, const NaturalParams& eta)
    : CellSampler(joint_table(spec, eta)) {}

std::pair<int, int> CellSampler::draw(Rng& rng) const {
  const double u = uniform01(rng);
  const double* begin = cdf_.data();
  const double* end = begin + cdf_.size();
  const double* it = std::upper_bound(begin, end, u);
  int idx = static_cast<int>(it - begin);
  if (idx >= static_cast<int>(cdf_.size())) {
    idx = static_cast<int>(cdf_.size()) - 1;
  }
  return {idx / s_, idx % s_};
}

namespace {

void require_truth_match(const ModelSpec& spec, const GroundTruth& truth,
                         const char* what) {
  if (truth.m() != spec.m() || truth.s() != spec.s()) {
    throw Error(ErrorCode::kDomainViolation,
                std::string(what) + ": ground-truth table shape does not "
                                    "match spec");
  }
}

}  // namespace

double expected_nll(const ModelSpec& spec, const NaturalParams& eta,
                    const GroundTruth& truth) {
  require_truth_match(spec, truth, "expected_nll");
  require_shape(spec, eta, "expected_nll");
  const Eigen::MatrixXd ex = exponent_table(spec, eta);
  double nll = 0.0;
  Eigen::VectorXd log_cond(spec.s());
  for (int x = 0; x < spec.m(); ++x) {
    log_softmax(ex.row(x).transpose(), log_cond);
    nll -= truth.table().row(x).dot(log_cond.transpose());
  }
  return nll;
}

double expected_kl(const ModelSpec& spec, const NaturalParams& eta,
                   const GroundTruth& truth) {
  require_truth_match(spec, truth, "expected_kl");
  require_shape(spec, eta, "expected_kl");
  const Eigen::MatrixXd ex = exponent_table(spec, eta);
  double kl = 0.0;
  Eigen::VectorXd log_cond(spec.s());
  for (int x = 0; x < spec.m(); ++x) {
    log_softmax(ex.row(x).transpose(), log_cond);
    const double px = truth.table().row(x).sum();
    for (int y = 0; y < spec.s(); ++y) {
      const double pyx = truth.table()(x, y) / px;
      kl += truth.table()(x, y) * (std::log(pyx) - log_cond(y));
    }
  }
  return kl;
}

Eigen::MatrixXd stacked_covariance(const ModelSpec& spec,
                                   const NaturalParams& eta) {
  const Eigen::MatrixXd table = joint_table(spec, eta);
  const Eigen::VectorXd p = table.colwise().sum().transpose();
  const int a = spec.alpha_dim();
  const int t = spec.t();
  const int n = spec.dim();

  // Second moments of the stacked statistic, block by block.
  Eigen::MatrixXd mom = Eigen::MatrixXd::Zero(n, n);
  mom.topLeftCorner(a, a) =
      spec.class_stat() * p.asDiagonal() * spec.class_stat().transpose();
  const Eigen::MatrixXd beta_star_t = spec.feature_stat() * table;  // t x s
  for (int k = 0; k < spec.s(); ++k) {
    const int off = a + k * t;
    mom.block(0, off, a, t) =
        spec.class_stat().col(k) * beta_star_t.col(k).transpose();
    mom.block(off, 0, t, a) = mom.block(0, off, a, t).transpose();
    mom.block(off, off, t, t) = spec.feature_stat() *
                                table.col(k).asDiagonal() *
                                spec.feature_stat().transpose();
  }

  Eigen::VectorXd mean(n);
  mean.head(a) = spec.class_stat() * p;
  for (int k = 0; k < spec.s(); ++k) {
    mean.segment(a + k * t, t) = beta_star_t.col(k);
  }
  return mom - mean * mean.transpose();
}

LexyfPotential::LexyfPotential(ModelSpec spec) : spec_(std::move(spec)) {
  if (!spec_.minimal()) {
    throw Error(ErrorCode::kSpecInvariant,
                "LexyfPotential: one-hot statistic gives a non-strictly-convex "
                "potential; minimal kinds only");
  }
}

double LexyfPotential::value(const Eigen::VectorXd& eta) const {
  return log_partition(spec_, unstack_natural(spec_, eta));
}

Eigen::VectorXd LexyfPotential::gradient(const Eigen::VectorXd& eta) const {
  return stack_expectation(
      spec_, natural_to_expectation(spec_, unstack_natural(spec_, eta)));
}

Eigen::MatrixXd LexyfPotential::hessian(const Eigen::VectorXd& eta) const {
  return stacked_covariance(spec_, unstack_natural(spec_, eta));
}

std::optional<Eigen::VectorXd> LexyfPotential::gradient_inverse(
    const Eigen::VectorXd& target) const {
  const ExpectationParams ep = unstack_expectation(spec_, target);
  return stack_natural(spec_,
                       expectation_to_natural(spec_, ep, ClampMode::kStrict));
}

}  // namespace dsngd::lexyf
