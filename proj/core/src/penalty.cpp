#include "adaptfeat/penalty.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace adaptfeat {

struct ScalarPenalty::Children {
  ScalarPenalty left;
  ScalarPenalty right;
};

namespace {

constexpr double kGoldenRatio = 0.6180339887498948482;
constexpr int kMaxGoldenIterations = 400;

double sanitize(double v) { return std::isnan(v) ? kInfinity : v; }

struct Candidate {
  double x;
  double fx;
};

// Smaller value wins; equal values prefer the smaller abscissa.
bool better(const Candidate& a, const Candidate& b) {
  if (a.fx < b.fx) return true;
  if (b.fx < a.fx) return false;
  return a.x < b.x;
}

void require_conforming(const ScalarPenalty& p, const char* where) {
  if (!p.conforming()) {
    throw DomainError(std::string(where) + ": penalty '" + p.to_string() +
                      "' is not minimized at 1 (non-conforming)");
  }
}

// Inf-convolution of two conforming penalties at any v >= 0. For v >= 1 the
// minimizing split lies in [1, v]; for v < 1 it lies in [v, 1].
JointSplit joint_any(const ScalarPenalty& left, const ScalarPenalty& right, double v,
                     double tol) {
  if (v == 1.0) return {left(1.0) + right(1.0), 1.0};
  if (left.is_characteristic() && right.is_characteristic()) return {kInfinity, 1.0};
  if (right.is_characteristic()) return {left(v), v};
  if (left.is_characteristic()) return {right(v), 1.0};
  if (v == 0.0) {
    const double l0 = left(0.0);
    const double r0 = right(0.0);
    return l0 <= r0 ? JointSplit{l0, 0.0} : JointSplit{r0, 1.0};
  }
  const double lo = std::min(1.0, v);
  const double hi = std::max(1.0, v);
  const auto objective = [&](double z) { return left(z) + right(v / z); };
  const MinimizerResult r = minimize_scanned_1d(objective, lo, hi, tol, 17);
  return {r.value, r.argmin};
}

std::string format_exponent(double p) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), p);
  return std::string(buffer, result.ptr);
}

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  ScalarPenalty parse_all() {
    ScalarPenalty p = parse_one();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return p;
  }

 private:
  ScalarPenalty parse_one() {
    skip_space();
    if (consume("power:")) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
              text_[pos_] == 'e' || text_[pos_] == 'E' || text_[pos_] == '-' ||
              text_[pos_] == '+')) {
        ++pos_;
      }
      double p = 0.0;
      const auto r = std::from_chars(text_.data() + start, text_.data() + pos_, p);
      if (r.ec != std::errc{} || r.ptr != text_.data() + pos_) fail("bad exponent");
      return ScalarPenalty::power_deviation(p);
    }
    if (consume("char1")) return ScalarPenalty::characteristic_at_one();
    if (consume("quad")) return ScalarPenalty::pure_quadratic();
    if (consume("joint(")) {
      ScalarPenalty a = parse_one();
      skip_space();
      if (!consume(",")) fail("expected ','");
      ScalarPenalty b = parse_one();
      skip_space();
      if (!consume(")")) fail("expected ')'");
      return ScalarPenalty::joint(std::move(a), std::move(b));
    }
    fail("unknown penalty");
  }

  bool consume(std::string_view token) {
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const char* what) const {
    std::ostringstream msg;
    msg << "penalty spec '" << text_ << "': " << what << " at offset " << pos_;
    throw DomainError(msg.str());
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ScalarPenalty::ScalarPenalty(Kind kind, double exponent,
                             std::shared_ptr<const Children> children)
    : kind_(kind), exponent_(exponent), children_(std::move(children)) {}

ScalarPenalty ScalarPenalty::power_deviation(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError("power_deviation: exponent must be positive and finite");
  }
  return ScalarPenalty(Kind::kPowerDeviation, p, nullptr);
}

ScalarPenalty ScalarPenalty::characteristic_at_one() {
  return ScalarPenalty(Kind::kCharacteristicAtOne, 0.0, nullptr);
}

ScalarPenalty ScalarPenalty::pure_quadratic() {
  return ScalarPenalty(Kind::kPureQuadratic, 0.0, nullptr);
}

ScalarPenalty ScalarPenalty::joint(ScalarPenalty left, ScalarPenalty right) {
  auto children = std::make_shared<const Children>(Children{std::move(left), std::move(right)});
  return ScalarPenalty(Kind::kJoint, 0.0, std::move(children));
}

ScalarPenalty ScalarPenalty::parse(std::string_view spec) {
  return SpecParser(spec).parse_all();
}

std::string ScalarPenalty::to_string() const {
  switch (kind_) {
    case Kind::kPowerDeviation:
      return "power:" + format_exponent(exponent_);
    case Kind::kCharacteristicAtOne:
      return "char1";
    case Kind::kPureQuadratic:
      return "quad";
    case Kind::kJoint:
      return "joint(" + left().to_string() + "," + right().to_string() + ")";
  }
  return {};
}

const ScalarPenalty& ScalarPenalty::left() const {
  if (kind_ != Kind::kJoint) throw DomainError("left(): not a joint penalty");
  return children_->left;
}

const ScalarPenalty& ScalarPenalty::right() const {
  if (kind_ != Kind::kJoint) throw DomainError("right(): not a joint penalty");
  return children_->right;
}

bool ScalarPenalty::conforming() const {
  switch (kind_) {
    case Kind::kPowerDeviation:
    case Kind::kCharacteristicAtOne:
      return true;
    case Kind::kPureQuadratic:
      return false;
    case Kind::kJoint:
      return left().conforming() && right().conforming();
  }
  return false;
}

bool ScalarPenalty::is_characteristic() const {
  if (kind_ == Kind::kCharacteristicAtOne) return true;
  if (kind_ == Kind::kJoint) return left().is_characteristic() && right().is_characteristic();
  return false;
}

double ScalarPenalty::operator()(double v) const {
  if (v < 0.0 || std::isnan(v)) throw DomainError("eval_penalty: argument must be >= 0");
  switch (kind_) {
    case Kind::kPowerDeviation: {
      const double dev = std::abs(v - 1.0);
      if (exponent_ == 1.0) return dev;
      if (exponent_ == 2.0) return dev * dev;
      if (exponent_ == 4.0) return (dev * dev) * (dev * dev);
      return std::pow(dev, exponent_);
    }
    case Kind::kCharacteristicAtOne:
      return v == 1.0 ? 0.0 : kInfinity;
    case Kind::kPureQuadratic:
      return v * v;
    case Kind::kJoint:
      return joint_any(left(), right(), v, kDefaultTol).value;
  }
  return kInfinity;
}

double ScalarPenalty::derivative(double v) const {
  switch (kind_) {
    case Kind::kPowerDeviation: {
      const double dev = v - 1.0;
      if (dev == 0.0) return 0.0;
      return exponent_ * std::pow(std::abs(dev), exponent_ - 1.0) * std::copysign(1.0, dev);
    }
    case Kind::kCharacteristicAtOne:
      return 0.0;
    case Kind::kPureQuadratic:
      return 2.0 * v;
    case Kind::kJoint: {
      const double h = 1e-6 * std::max(1.0, v);
      const double lo = std::max(0.0, v - h);
      return ((*this)(v + h) - (*this)(lo)) / (v + h - lo);
    }
  }
  return 0.0;
}

bool operator==(const ScalarPenalty& a, const ScalarPenalty& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case ScalarPenalty::Kind::kPowerDeviation:
      return a.exponent_ == b.exponent_;
    case ScalarPenalty::Kind::kJoint:
      return a.left() == b.left() && a.right() == b.right();
    default:
      return true;
  }
}

double eval_penalty(const ScalarPenalty& penalty, double v) { return penalty(v); }

MinimizerResult minimize_quasiconvex_1d(const ScalarFunction& objective, double lo,
                                        double hi, double tol) {
  if (!(lo < hi)) throw DomainError("minimize_quasiconvex_1d: requires lo < hi");
  if (!(tol > 0.0)) throw DomainError("minimize_quasiconvex_1d: requires tol > 0");
  const Candidate left{lo, sanitize(objective(lo))};
  const Candidate right{hi, sanitize(objective(hi))};
  if (!std::isfinite(left.fx) && !std::isfinite(right.fx)) {
    throw DomainError("minimize_quasiconvex_1d: objective is non-finite at both endpoints");
  }

  double a = lo;
  double b = hi;
  double c = b - kGoldenRatio * (b - a);
  double d = a + kGoldenRatio * (b - a);
  double fc = sanitize(objective(c));
  double fd = sanitize(objective(d));
  int iterations = 0;
  while (b - a > tol && iterations < kMaxGoldenIterations) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kGoldenRatio * (b - a);
      fc = sanitize(objective(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kGoldenRatio * (b - a);
      fd = sanitize(objective(d));
    }
    ++iterations;
  }

  Candidate best = left;
  const double mid = 0.5 * (a + b);
  for (const Candidate& cand :
       {Candidate{c, fc}, Candidate{mid, sanitize(objective(mid))}, Candidate{d, fd}, right}) {
    if (better(cand, best)) best = cand;
  }
  return {best.x, best.fx, iterations};
}

MinimizerResult minimize_scanned_1d(const ScalarFunction& objective, double lo, double hi,
                                    double tol, int samples) {
  if (samples < 3) return minimize_quasiconvex_1d(objective, lo, hi, tol);
  if (!(lo < hi)) throw DomainError("minimize_scanned_1d: requires lo < hi");
  const double step = (hi - lo) / (samples - 1);
  int best_index = 0;
  Candidate best{lo, sanitize(objective(lo))};
  for (int i = 1; i < samples; ++i) {
    const double x = i + 1 == samples ? hi : lo + step * i;
    const Candidate cand{x, sanitize(objective(x))};
    if (better(cand, best)) {
      best = cand;
      best_index = i;
    }
  }
  if (!std::isfinite(best.fx)) {
    // Every sample is infinite; fall back to the plain search which reports
    // the endpoint error when appropriate.
    return minimize_quasiconvex_1d(objective, lo, hi, tol);
  }
  const double a = best_index == 0 ? lo : lo + step * (best_index - 1);
  const double b = best_index + 1 >= samples ? hi : lo + step * (best_index + 1);
  if (b - a <= tol) return {best.x, best.fx, 0};
  MinimizerResult refined = minimize_quasiconvex_1d(objective, a, b, tol);
  if (better(Candidate{best.x, best.fx}, Candidate{refined.argmin, refined.value})) {
    refined.argmin = best.x;
    refined.value = best.fx;
  }
  return refined;
}

double expand_upper_bracket(const ScalarFunction& objective, double lo, double initial_hi) {
  double hi = std::max(initial_hi, lo + 1.0);
  double previous = sanitize(objective(lo));
  for (int k = 0; k < 200; ++k) {
    const double f = sanitize(objective(hi));
    if (!(f < previous)) return hi;
    previous = f;
    hi = lo + 2.0 * (hi - lo);
  }
  throw ConvergenceError("expand_upper_bracket: objective keeps decreasing");
}

JointSplit joint_penalty_split(const ScalarPenalty& left, const ScalarPenalty& right,
                               double v, double tol) {
  if (!(v >= 1.0)) throw DomainError("joint_penalty: requires v >= 1");
  require_conforming(left, "joint_penalty");
  require_conforming(right, "joint_penalty");
  return joint_any(left, right, v, tol);
}

double joint_penalty(const ScalarPenalty& left, const ScalarPenalty& right, double v,
                     double tol) {
  return joint_penalty_split(left, right, v, tol).value;
}

EffectiveValue effective_scalar_penalty(const ScalarPenalty& penalty, double v, double tol) {
  if (v < 0.0 || std::isnan(v)) throw DomainError("effective_scalar_penalty: requires v >= 0");
  require_conforming(penalty, "effective_scalar_penalty");
  if (v == 0.0) return {0.0, 1.0};
  const double v2 = v * v;
  if (penalty.is_characteristic()) return {v2, 1.0};
  const auto objective = [&](double z) { return penalty(z) + v2 / (z * z); };
  // The minimizer satisfies ω(z*) <= v², so doubling terminates.
  const double hi = expand_upper_bracket(objective, 1.0, 2.0);
  const MinimizerResult r = minimize_scanned_1d(objective, 1.0, hi, tol, 33);
  return {r.value, r.argmin};
}

double spectral_penalty(const ScalarPenalty& penalty, std::span<const double> singular_values) {
  double total = 0.0;
  for (const double s : singular_values) {
    if (s < 0.0) throw DomainError("spectral_penalty: singular values must be >= 0");
    total += penalty(s);
  }
  return total;
}

double spectral_penalty(const ScalarPenalty& penalty, const Vector& singular_values) {
  return spectral_penalty(penalty, std::span<const double>(singular_values.data(),
                                                           static_cast<std::size_t>(singular_values.size())));
}

double diagonal_effective_penalty_demo(std::span<const double> beta) {
  const ScalarPenalty omega = ScalarPenalty::pure_quadratic();
  double total = 0.0;
  for (const double b : beta) {
    const double b2 = b * b;
    if (b2 == 0.0) continue;
    const auto objective = [&](double m) {
      return m == 0.0 ? kInfinity : omega(m) + b2 / (m * m);
    };
    const double hi = expand_upper_bracket(objective, 0.0, 1.0);
    total += minimize_scanned_1d(objective, 0.0, hi, 1e-12, 33).value;
  }
  return total;
}

double diagonal_effective_penalty_demo(const Vector& beta) {
  return diagonal_effective_penalty_demo(
      std::span<const double>(beta.data(), static_cast<std::size_t>(beta.size())));
}

}  // namespace adaptfeat
