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

#ifndef DSNGD_LEXYF_HPP_
#define DSNGD_LEXYF_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "dsngd/errors.hpp"
#include "dsngd/geometry.hpp"
#include "dsngd/random.hpp"

namespace dsngd::lexyf {

/// Probabilities are clamped at least this far from the boundary before any
/// log or division. Several quantities divide by class probabilities, so the
/// interior margin is a hard requirement, not a nicety.
inline constexpr double kInteriorEps = 1e-8;

enum class ClassStatKind { kMinimalStandard, kOneHot, kCustom };

enum class ClampMode { kClamp, kStrict };

/// Tally of boundary clamps. Threaded through long runs so stress tests can
/// assert that boundary handling engaged rather than silently papering over.
struct ClampCounter {
  std::int64_t events = 0;
};

/// A discrete joint family over features x in {0..m-1} and classes
/// y in {0..s-1}:
///
///   P(x, y) proportional to exp(S(y)' alpha + beta_y' T(x))
///
/// S is the class statistic (columns S(y)), T the feature statistic
/// (columns T(x)). T is always the standard categorical statistic
/// T(x) = e_x for x < m-1, T(m-1) = 0, so t = m-1. The class statistic is
/// one of: standard minimal (S(y) = e_y, S(s-1) = 0, dimension s-1), one-hot
/// (S(y) = e_y in s-space, overparameterized), or a caller-supplied minimal
/// matrix with s-1 rows.
class ModelSpec {
 public:
  static ModelSpec minimal_standard(int s, int m);
  static ModelSpec one_hot(int s, int m);
  /// class_stat has s-1 rows and s columns. Requires invertible S_M
  /// (first s-1 columns) and an identifiable full column set, i.e.
  /// S_M - S(s-1) 1' invertible.
  static ModelSpec custom(int s, int m, const Eigen::MatrixXd& class_stat);

  int s() const { return s_; }
  int m() const { return m_; }
  int t() const { return m_ - 1; }
  ClassStatKind kind() const { return kind_; }
  bool minimal() const { return kind_ != ClassStatKind::kOneHot; }
  bool standard_class_stat() const {
    return kind_ == ClassStatKind::kMinimalStandard;
  }

  int alpha_dim() const { return static_cast<int>(class_stat_.rows()); }
  int beta_dim() const { return s_ * t(); }
  /// Length of the stacked parameter vector: alpha followed by the s rows
  /// of beta.
  int dim() const { return alpha_dim() + beta_dim(); }

  /// alpha_dim x s, column y = S(y).
  const Eigen::MatrixXd& class_stat() const { return class_stat_; }
  /// t x m, column x = T(x).
  const Eigen::MatrixXd& feature_stat() const { return feature_stat_; }

  /// Class probabilities implied by alpha*. Minimal kinds invert the linear
  /// map alpha* = sum_y S(y) P(y); one-hot reads them off directly. The
  /// result always sums to 1 but may stick out of the simplex for an
  /// alpha* that is not a valid dual point; callers clamp.
  Eigen::VectorXd class_probs_from_alpha_star(
      const Eigen::VectorXd& alpha_star) const;

  /// Allocation-free variant; out must already have length s.
  void class_probs_into(const Eigen::VectorXd& alpha_star,
                        Eigen::VectorXd& out) const;

  /// Inverse of the above restricted to the simplex: the alpha* of a given
  /// class-probability vector.
  Eigen::VectorXd alpha_star_from_class_probs(const Eigen::VectorXd& p) const;

  /// Classical class weights: solves S(i)'a - S(s-1)'a = log(p_i / p_{s-1}).
  /// Minimal kinds only.
  Eigen::VectorXd alpha_bar_from_class_probs(const Eigen::VectorXd& p) const;

  /// (S_M - S(s-1) 1')^{-T} [Id | -1], precomputed; the constant factor of
  /// the dual alpha-gradient block. Minimal kinds only.
  const Eigen::MatrixXd& alpha_block_mixer() const;

  /// Solve (S_M - S(s-1) 1')' z = rhs. Minimal kinds only.
  Eigen::VectorXd solve_centered_transposed(const Eigen::VectorXd& rhs) const;

  /// Solve S_M' z = rhs (uncentered). Minimal kinds only.
  Eigen::VectorXd solve_class_stat_transposed(const Eigen::VectorXd& rhs) const;

 private:
  ModelSpec(int s, int m, ClassStatKind kind, Eigen::MatrixXd class_stat);
  void require_minimal(const char* what) const;

  int s_;
  int m_;
  ClassStatKind kind_;
  Eigen::MatrixXd class_stat_;
  Eigen::MatrixXd feature_stat_;
  // Minimal kinds: centered class-stat matrix S_M - S(s-1) 1', its LU, and
  // the mixer above. Empty for one-hot.
  Eigen::PartialPivLU<Eigen::MatrixXd> centered_lu_;
  Eigen::PartialPivLU<Eigen::MatrixXd> centered_t_lu_;
  Eigen::PartialPivLU<Eigen::MatrixXd> class_stat_t_lu_;
  Eigen::MatrixXd alpha_block_mixer_;
};

/// Natural parameters: alpha (length alpha_dim) and beta (s rows of
/// length t, row i the conditional exponent of class i).
struct NaturalParams {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd beta;

  static NaturalParams zero(const ModelSpec& spec);
};

/// Expectation parameters: alpha* = E[S(y)], beta* rows
/// beta*_i = P(Y=i) E[T(x) | Y=i].
struct ExpectationParams {
  Eigen::VectorXd alpha_star;
  Eigen::MatrixXd beta_star;
};

/// Per-class conditional means theta*_i = beta*_i / P(Y=i), one row per
/// class. The division is the reason interiority matters.
Eigen::MatrixXd theta_star(const ModelSpec& spec, const ExpectationParams& ep);

/// Classical parameters: softmax class weights alpha_bar and per-class
/// conditional natural parameters theta_bar (s rows of length t).
struct ClassicalParams {
  Eigen::VectorXd alpha_bar;
  Eigen::MatrixXd theta_bar;
};

/// A full joint table over the m x s grid. Strictly positive entries,
/// normalized within 1e-12. The data distribution of an experiment; it need
/// not be realizable by any model parameters.
class GroundTruth {
 public:
  /// table(x, y) = P(x, y); m rows, s columns.
  static GroundTruth from_table(Eigen::MatrixXd table);

  const Eigen::MatrixXd& table() const { return table_; }
  int m() const { return static_cast<int>(table_.rows()); }
  int s() const { return static_cast<int>(table_.cols()); }

  Eigen::VectorXd feature_marginal() const { return table_.rowwise().sum(); }
  Eigen::VectorXd class_marginal() const {
    return table_.colwise().sum().transpose();
  }

 private:
  explicit GroundTruth(Eigen::MatrixXd table) : table_(std::move(table)) {}
  Eigen::MatrixXd table_;
};

/// log lambda(eta) = log sum_{x,y} exp(S(y)' alpha + beta_y' T(x)),
/// max-subtracted.
double log_partition(const ModelSpec& spec, const NaturalParams& eta);

/// log P_eta(x, y).
double joint_log_prob(const ModelSpec& spec, const NaturalParams& eta, int x,
                      int y);

/// h(x, eta): the vector (log P_eta(x, Y=0), ..., log P_eta(x, Y=s-1)).
Eigen::VectorXd h_vector(const ModelSpec& spec, const NaturalParams& eta,
                         int x);

/// P_eta(y | x) for all y: softmax of h(x, eta). Does not need the
/// partition function.
Eigen::VectorXd conditional_y_given_x(const ModelSpec& spec,
                                      const NaturalParams& eta, int x);

/// Allocation-free variant for step loops. scratch receives the exponents.
void conditional_y_given_x_into(const ModelSpec& spec,
                                const NaturalParams& eta, int x,
                                Eigen::VectorXd& scratch,
                                Eigen::VectorXd& out);

/// Full m x s table of P_eta.
Eigen::MatrixXd joint_table(const ModelSpec& spec, const NaturalParams& eta);

/// eta* = (E[S], P(Y=i) E[T | Y=i] rows) by enumeration; the gradient of
/// log lambda.
ExpectationParams natural_to_expectation(const ModelSpec& spec,
                                         const NaturalParams& eta);

/// Inverse map: class probabilities from alpha*, conditional means
/// theta*_i = beta*_i / P(Y=i), then the closed-form categorical inversions
/// and the classical-to-natural change of variables. Out-of-interior inputs
/// are clamped (counted in *clamps when given) or rejected in strict mode.
NaturalParams expectation_to_natural(const ModelSpec& spec,
                                     const ExpectationParams& ep,
                                     ClampMode mode = ClampMode::kClamp,
                                     ClampCounter* clamps = nullptr);

/// Change of variables from the classical parametrization: beta = theta_bar;
/// alpha = alpha_bar - (S_M - S(s-1) 1')^{-T} (log A - mu 1) with
/// A_i = sum_x exp(theta_bar_i' T(x)) and mu chosen so the remaining class
/// equation holds. Minimal kinds only.
NaturalParams classical_to_natural(const ModelSpec& spec,
                                   const ClassicalParams& c);

/// Clamp class probabilities and conditional means of ep into the interior.
/// Returns the number of adjusted coordinates (0 when ep was already
/// interior; ep is then untouched).
int enforce_interior(const ModelSpec& spec, ExpectationParams& ep);

/// The stacked sufficient statistic R(x, y) = (S(y), T(x) 1{y=0}, ...,
/// T(x) 1{y=s-1}), length spec.dim().
Eigen::VectorXd stacked_statistic(const ModelSpec& spec, int x, int y);
void stacked_statistic_into(const ModelSpec& spec, int x, int y,
                            Eigen::VectorXd& out);

/// Stacking order: alpha first, then beta rows. Natural and expectation
/// parameters share the layout; the stacked expectation vector is E[R].
Eigen::VectorXd stack_natural(const ModelSpec& spec, const NaturalParams& eta);
NaturalParams unstack_natural(const ModelSpec& spec, const Eigen::VectorXd& v);
Eigen::VectorXd stack_expectation(const ModelSpec& spec,
                                  const ExpectationParams& ep);
ExpectationParams unstack_expectation(const ModelSpec& spec,
                                      const Eigen::VectorXd& v);

/// h(x, .) as a function of the expectation parameters:
/// log P(Y=i) + log P_{theta*_i}(x | Y=i). For minimal kinds this equals
/// h(x, expectation_to_natural(ep)); for one-hot it is the canonical
/// extension used by the dual gradient blocks.
Eigen::VectorXd dual_h_vector(const ModelSpec& spec,
                              const ExpectationParams& ep, int x);

/// Inverse-CDF sampler over the enumerated joint of either a ground-truth
/// table or a model point. Deterministic given the RNG stream.
class CellSampler {
 public:
  explicit CellSampler(const GroundTruth& truth);
  CellSampler(const ModelSpec& spec, const NaturalParams& eta);

  /// Draws (x, y).
  std::pair<int, int> draw(Rng& rng) const;

 private:
  CellSampler(const Eigen::MatrixXd& table);
  int m_;
  int s_;
  Eigen::VectorXd cdf_;  // length m*s, cell (x, y) at index x*s + y
};

/// E_P[-log P_eta(y | x)] by enumeration.
double expected_nll(const ModelSpec& spec, const NaturalParams& eta,
                    const GroundTruth& truth);

/// E_{P(X)}[KL(P(Y | x) || P_eta(Y | x))] by enumeration; nonnegative.
double expected_kl(const ModelSpec& spec, const NaturalParams& eta,
                   const GroundTruth& truth);

/// Covariance of the stacked statistic under P_eta, assembled block-exactly
/// from the enumerated joint. Equals the Hessian of log lambda in the
/// stacked coordinates.
Eigen::MatrixXd stacked_covariance(const ModelSpec& spec,
                                   const NaturalParams& eta);

/// The log-partition potential on stacked natural parameters. Minimal kinds
/// only: the one-hot potential is convex but not strictly, so the dual map
/// is not invertible and the geometry contract breaks.
class LexyfPotential final : public geometry::ConvexPotential {
 public:
  explicit LexyfPotential(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  int dim() const override { return spec_.dim(); }
  double value(const Eigen::VectorXd& eta) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& eta) const override;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& eta) const override;
  std::optional<Eigen::VectorXd> gradient_inverse(
      const Eigen::VectorXd& target) const override;

 private:
  ModelSpec spec_;
};

}  // namespace dsngd::lexyf

#endif  // DSNGD_LEXYF_HPP_
