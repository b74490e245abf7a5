#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat {

/// Sentinel for penalties that are infinite off their feasible set.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Default bracket tolerance for the scalar searches below.
inline constexpr double kDefaultTol = 1e-10;

/// A scalar penalty ω acting on singular values. Conforming penalties are
/// strictly quasi-convex with ω(1) = 0. PureQuadratic (ω(v) = v²) exists only
/// for the diagonal-transform demonstration and is rejected by the joint and
/// effective penalty routines.
///
/// Immutable value type; copies share the children of a Joint penalty.
class ScalarPenalty {
 public:
  enum class Kind { kPowerDeviation, kCharacteristicAtOne, kPureQuadratic, kJoint };

  /// ω(v) = |v - 1|^p, p > 0.
  static ScalarPenalty power_deviation(double p);
  /// ω(1) = 0, +∞ elsewhere.
  static ScalarPenalty characteristic_at_one();
  static ScalarPenalty pure_quadratic();
  /// The joint penalty ω1 ⊕ ω2 as a penalty in its own right.
  static ScalarPenalty joint(ScalarPenalty left, ScalarPenalty right);

  /// Grammar: `power:<p>` | `char1` | `quad` | `joint(<spec>,<spec>)`.
  static ScalarPenalty parse(std::string_view spec);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  const ScalarPenalty& left() const;
  const ScalarPenalty& right() const;

  bool conforming() const;
  /// True when the penalty is +∞ everywhere except at 1.
  bool is_characteristic() const;

  /// ω(v) for v >= 0; throws DomainError for negative v.
  double operator()(double v) const;

  /// A (sub)gradient of ω at v; at kinks the zero element is selected.
  double derivative(double v) const;

  friend bool operator==(const ScalarPenalty& a, const ScalarPenalty& b);

 private:
  struct Children;
  ScalarPenalty(Kind kind, double exponent, std::shared_ptr<const Children> children);

  Kind kind_;
  double exponent_ = 0.0;
  std::shared_ptr<const Children> children_;
};

double eval_penalty(const ScalarPenalty& penalty, double v);

struct MinimizerResult {
  double argmin = 0.0;
  double value = 0.0;
  int iterations = 0;
};

using ScalarFunction = std::function<double(double)>;

/// Golden-section search on [lo, hi] for a strictly quasi-convex objective.
/// The returned argmin is within `tol` of the true minimizer; among equal
/// values the smallest abscissa wins. NaN is treated as +∞.
MinimizerResult minimize_quasiconvex_1d(const ScalarFunction& objective, double lo,
                                        double hi, double tol = kDefaultTol);

/// Coarse uniform scan (`samples` points) followed by golden-section search
/// in the neighbourhood of the best sample. Protects the search against
/// objectives that are only approximately unimodal.
MinimizerResult minimize_scanned_1d(const ScalarFunction& objective, double lo,
                                    double hi, double tol = kDefaultTol,
                                    int samples = 33);

/// Doubles `hi` (starting from `initial_hi`) until the objective stops
/// decreasing, so that a quasi-convex minimizer on [lo, ∞) lies in [lo, hi].
double expand_upper_bracket(const ScalarFunction& objective, double lo,
                            double initial_hi);

/// Value of (ω1 ⊕ ω2)(v) together with the factor z assigned to ω1
/// (ω2 receives v / z).
struct JointSplit {
  double value = 0.0;
  double z = 1.0;
};

/// (ω1 ⊕ ω2)(v) = min_{1 <= z <= v} ω1(z) + ω2(v / z), for v >= 1.
JointSplit joint_penalty_split(const ScalarPenalty& left, const ScalarPenalty& right,
                               double v, double tol = kDefaultTol);
double joint_penalty(const ScalarPenalty& left, const ScalarPenalty& right, double v,
                     double tol = kDefaultTol);

struct EffectiveValue {
  double value = 0.0;
  double z_star = 1.0;
};

/// ω̃(v) = min_{z >= 1} ω(z) + v² / z² for v >= 0.
EffectiveValue effective_scalar_penalty(const ScalarPenalty& penalty, double v,
                                        double tol = kDefaultTol);

/// Σ_j ω(σ_j).
double spectral_penalty(const ScalarPenalty& penalty,
                        std::span<const double> singular_values);
double spectral_penalty(const ScalarPenalty& penalty, const Vector& singular_values);

/// Σ_j min_{m > 0} m² + β_j² / m², computed numerically (equals 2‖β‖₁).
double diagonal_effective_penalty_demo(std::span<const double> beta);
double diagonal_effective_penalty_demo(const Vector& beta);

}  // namespace adaptfeat
