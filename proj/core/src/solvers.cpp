#include "adaptfeat/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace adaptfeat {

namespace {

void check_structure(const FeatureOperator& op, const BlockStructure& structure) {
  op.validate();
  if (structure.column_ranges() != op.block_ranges) {
    throw ShapeError("solver: block structure does not match the feature operator's block ranges");
  }
}

Vector singular_values(const Matrix& m) { return svd(m).s; }

// argmin_x ω̃_J(x) + (rho / 2)(x − d)², via the product variable g of ω̃:
// for fixed g the inner problem in x is quadratic with x = rho g² d / (2 + rho g²).
double prox_effective_scalar(const ScalarPenalty& joint, double d, double rho, double tol) {
  if (d <= 0.0) return 0.0;
  if (joint.is_characteristic()) return rho * d / (2.0 + rho);
  const double d2 = d * d;
  const auto objective = [&](double g) { return joint(g) + rho * d2 / (2.0 + rho * g * g); };
  const double hi = expand_upper_bracket(objective, 1.0, 2.0);
  const double g = minimize_scanned_1d(objective, 1.0, hi, tol, 17).argmin;
  return rho * g * g * d / (2.0 + rho * g * g);
}

Matrix prox_block(const Matrix& y, const ScalarPenalty& joint, double rho, double tol) {
  const SvdFactors f = svd(y);
  Matrix out = Matrix::Zero(y.rows(), y.cols());
  for (Index j = 0; j < f.s.size(); ++j) {
    const double x = prox_effective_scalar(joint, f.s(j), rho, tol);
    if (x != 0.0) out.noalias() += x * f.u.col(j) * f.v.col(j).transpose();
  }
  return out;
}

std::vector<ScalarPenalty> joint_penalties(const BlockStructure& structure) {
  std::vector<ScalarPenalty> out;
  for (const BlockSpec& b : structure.blocks()) {
    if (!b.left.conforming() || !b.right.conforming()) {
      throw DomainError("solver: block penalties must be conforming");
    }
    out.push_back(combined_penalty(b.left, b.right));
  }
  return out;
}

std::vector<Matrix> split_blocks(const Vector& b, const BlockStructure& structure) {
  std::vector<Matrix> out;
  Index cursor = 0;
  for (const BlockSpec& spec : structure.blocks()) {
    out.push_back(unvec(b.segment(cursor, spec.size()), spec.rows, spec.cols));
    cursor += spec.size();
  }
  return out;
}

void attach_factorizations(AdaptiveSolution& sol, const BlockStructure& structure) {
  sol.factorizations.clear();
  for (std::size_t l = 0; l < structure.size(); ++l) {
    sol.factorizations.push_back(
        factorize_block(sol.blocks[l], structure[l].left, structure[l].right));
  }
}

}  // namespace

SolverConfig SolverConfig::from_json(std::string_view text) {
  SolverConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("solver config: ") + e.what());
  }
  if (!j.is_object()) throw Error("solver config: expected a JSON object");
  if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
  if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
  if (j.contains("step")) cfg.step = j.at("step").get<double>();
  if (j.contains("continuation")) cfg.continuation = j.at("continuation").get<std::vector<double>>();
  if (cfg.max_iter <= 0 || !(cfg.tol > 0.0) || !(cfg.step > 0.0)) {
    throw Error("solver config: max_iter, tol and step must be positive");
  }
  for (std::size_t i = 0; i < cfg.continuation.size(); ++i) {
    if (!(cfg.continuation[i] > 0.0) || (i > 0 && cfg.continuation[i] < cfg.continuation[i - 1])) {
      throw Error("solver config: continuation must be positive and nondecreasing");
    }
  }
  return cfg;
}

std::string SolverConfig::to_json() const {
  nlohmann::json j;
  j["max_iter"] = max_iter;
  j["tol"] = tol;
  j["step"] = step;
  j["continuation"] = continuation;
  return j.dump();
}

Vector AdaptiveSolution::coefficients() const {
  Index total = 0;
  for (const Matrix& b : blocks) total += b.size();
  Vector out(total);
  Index cursor = 0;
  for (const Matrix& b : blocks) {
    out.segment(cursor, b.size()) = vec(b);
    cursor += b.size();
  }
  return out;
}

double effective_objective(const Vector& coefficients, const BlockStructure& structure, double tol) {
  if (coefficients.size() != structure.total_params()) {
    throw ShapeError("effective_objective: coefficient length mismatch");
  }
  const std::vector<ScalarPenalty> joints = joint_penalties(structure);
  double total = 0.0;
  Index cursor = 0;
  for (std::size_t l = 0; l < structure.size(); ++l) {
    const BlockSpec& spec = structure[l];
    const Vector s = singular_values(unvec(coefficients.segment(cursor, spec.size()), spec.rows, spec.cols));
    for (Index j = 0; j < s.size(); ++j) total += effective_scalar_penalty(joints[l], s(j), tol).value;
    cursor += spec.size();
  }
  return total;
}

AdaptiveSolution solve_min_norm(const FeatureOperator& op, double tol) {
  op.validate();
  const Vector b = min_norm_solve(op.phi, op.rhs(), tol);
  AdaptiveSolution sol;
  sol.blocks = {Matrix(b)};
  sol.objective = b.squaredNorm();
  sol.constraint_residual = op.constraint_residual(b);
  const ScalarPenalty frozen = ScalarPenalty::characteristic_at_one();
  sol.factorizations = {factorize_block(sol.blocks.front(), frozen, frozen)};
  return sol;
}

AdaptiveSolution solve_effective(const FeatureOperator& op, const BlockStructure& structure,
                                 const SolverConfig& cfg) {
  check_structure(op, structure);
  const std::vector<ScalarPenalty> joints = joint_penalties(structure);
  const Vector rhs = op.rhs();
  const Matrix pinv = pseudoinverse(op.phi);
  const Vector b0 = pinv * rhs;
  if ((op.phi * b0 - rhs).norm() > std::max(cfg.tol, 1e-8) * std::max(1.0, rhs.norm())) {
    throw InfeasibleError("solve_effective: interpolation constraint is infeasible");
  }
  const auto project = [&](const Vector& x) -> Vector { return x - pinv * (op.phi * x - rhs); };
  const auto prox = [&](const Vector& y, double rho) {
    Vector out(y.size());
    Index cursor = 0;
    for (std::size_t l = 0; l < structure.size(); ++l) {
      const BlockSpec& spec = structure[l];
      const Matrix block = unvec(y.segment(cursor, spec.size()), spec.rows, spec.cols);
      out.segment(cursor, spec.size()) = vec(prox_block(block, joints[l], rho, kDefaultTol));
      cursor += spec.size();
    }
    return out;
  };

  constexpr int kWindow = 10;
  double rho = cfg.step;
  Vector b = b0;
  Vector x = b0;
  Vector dual = Vector::Zero(b0.size());
  Vector best = b0;
  double best_value = effective_objective(b0, structure);
  std::deque<double> values{best_value};
  std::deque<double> gaps;
  bool converged = false;
  int it = 0;
  for (; it < cfg.max_iter; ++it) {
    x = prox(b - dual, rho);
    const Vector b_prev = b;
    b = project(x + dual);
    dual += x - b;

    const double gap = (x - b).norm();
    const double drift = rho * (b - b_prev).norm();
    const double value = effective_objective(b, structure);
    if (value < best_value) {
      best_value = value;
      best = b;
    }
    values.push_back(value);
    gaps.push_back(gap);
    if (values.size() > kWindow + 1) values.pop_front();
    if (gaps.size() > kWindow + 1) gaps.pop_front();

    const double scale = std::max(1.0, b.norm());
    const bool settled = values.size() == kWindow + 1 &&
                         std::abs(values.back() - values.front()) <=
                             1e-9 * std::max(1.0, std::abs(values.back()));
    if (settled && gap <= 1e-7 * scale && drift <= 1e-7 * scale) {
      converged = true;
      ++it;
      break;
    }
    // Consensus gap stalled over the window: tighten the coupling.
    if (gaps.size() == kWindow + 1 && (it + 1) % kWindow == 0 && gaps.back() > 0.9 * gaps.front() &&
        gap > 1e-7 * scale) {
      rho *= 2.0;
      dual /= 2.0;
    }
  }

  AdaptiveSolution sol;
  sol.blocks = split_blocks(best, structure);
  sol.objective = best_value;
  sol.constraint_residual = op.constraint_residual(best);
  sol.iterations = it;
  sol.converged = converged && sol.constraint_residual <= cfg.tol * std::max(1.0, rhs.norm());
  std::ostringstream diag;
  diag << "splitting: iterations=" << it << " rho=" << rho << " objective=" << best_value
       << (converged ? " converged" : " not converged (iteration cap)");
  sol.diagnostics = diag.str();
  attach_factorizations(sol, structure);
  return sol;
}

namespace {

struct TransformBlock {
  Index p = 0;
  Index q = 0;
  ColumnRange range;
  ScalarPenalty left = ScalarPenalty::characteristic_at_one();
  ScalarPenalty right = ScalarPenalty::characteristic_at_one();
  bool free_left = true;
  bool free_right = true;
  Matrix m1;
  Matrix m2;
};

double spectral_value(const Matrix& m, const ScalarPenalty& omega) {
  return spectral_penalty(omega, singular_values(m));
}

Matrix spectral_gradient(const Matrix& m, const ScalarPenalty& omega) {
  const SvdFactors f = svd(m);
  Matrix g = Matrix::Zero(m.rows(), m.cols());
  for (Index j = 0; j < f.s.size(); ++j) {
    const double dw = omega.derivative(f.s(j));
    if (dw != 0.0) g.noalias() += dw * f.u.col(j) * f.v.col(j).transpose();
  }
  return g;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

class BilinearProblem {
 public:
  BilinearProblem(const FeatureOperator& op, const BlockStructure& structure)
      : op_(op), rhs_(op.rhs()) {
    const auto ranges = structure.column_ranges();
    for (std::size_t l = 0; l < structure.size(); ++l) {
      const BlockSpec& spec = structure[l];
      TransformBlock b;
      b.p = spec.rows;
      b.q = spec.cols;
      b.range = ranges[l];
      b.left = spec.left;
      b.right = spec.right;
      b.free_left = !spec.left.is_characteristic();
      b.free_right = !spec.right.is_characteristic();
      b.m1 = Matrix::Identity(b.p, b.p);
      b.m2 = Matrix::Identity(b.q, b.q);
      blocks_.push_back(std::move(b));
    }
  }

  Index dimension() const {
    Index n = 0;
    for (const TransformBlock& b : blocks_) {
      if (b.free_left) n += b.p * b.p;
      if (b.free_right) n += b.q * b.q;
    }
    return n;
  }

  Vector pack() const {
    Vector x(dimension());
    Index c = 0;
    for (const TransformBlock& b : blocks_) {
      if (b.free_left) {
        x.segment(c, b.m1.size()) = vec(b.m1);
        c += b.m1.size();
      }
      if (b.free_right) {
        x.segment(c, b.m2.size()) = vec(b.m2);
        c += b.m2.size();
      }
    }
    return x;
  }

  void unpack(const Vector& x) {
    Index c = 0;
    for (TransformBlock& b : blocks_) {
      if (b.free_left) {
        b.m1 = unvec(x.segment(c, b.p * b.p), b.p, b.p);
        c += b.p * b.p;
      }
      if (b.free_right) {
        b.m2 = unvec(x.segment(c, b.q * b.q), b.q, b.q);
        c += b.q * b.q;
      }
    }
  }

  struct Evaluation {
    double value = 0.0;
    Vector gradient;
    std::vector<Matrix> weights;
  };

  // Objective with W eliminated: for fixed transforms,
  // min_w ‖w‖² + μ‖A w − r‖² is attained at w = A^T λ, λ = (A A^T + I/μ)^{-1} r,
  // with value r^T λ and μ (A w − r) = −λ.
  Evaluation evaluate(const Vector& x, double mu, bool with_gradient) {
    unpack(x);
    const Index rows = op_.rows();
    Matrix a(rows, op_.params());
    for (const TransformBlock& b : blocks_) {
      a.middleCols(b.range.begin, b.range.size) =
          op_.phi.middleCols(b.range.begin, b.range.size) * kron(b.m2.transpose(), b.m1);
    }
    Matrix s = a * a.transpose();
    s.diagonal().array() += 1.0 / mu;
    const Vector lambda = s.ldlt().solve(rhs_);
    const Vector w = a.transpose() * lambda;

    Evaluation out;
    out.value = rhs_.dot(lambda);
    for (const TransformBlock& b : blocks_) {
      out.weights.push_back(unvec(w.segment(b.range.begin, b.range.size), b.p, b.q));
      if (b.free_left) out.value += spectral_value(b.m1, b.left);
      if (b.free_right) out.value += spectral_value(b.m2, b.right);
    }
    if (!with_gradient) return out;

    const Vector y = -2.0 * lambda;
    out.gradient.resize(x.size());
    Index c = 0;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const TransformBlock& b = blocks_[l];
      const Matrix& wl = out.weights[l];
      const Matrix gy = unvec(op_.phi.middleCols(b.range.begin, b.range.size).transpose() * y, b.p, b.q);
      if (b.free_left) {
        const Matrix g1 = gy * (wl * b.m2).transpose() + spectral_gradient(b.m1, b.left);
        out.gradient.segment(c, g1.size()) = vec(g1);
        c += g1.size();
      }
      if (b.free_right) {
        const Matrix g2 = (b.m1 * wl).transpose() * gy + spectral_gradient(b.m2, b.right);
        out.gradient.segment(c, g2.size()) = vec(g2);
        c += g2.size();
      }
    }
    return out;
  }

  std::vector<Matrix> products(const std::vector<Matrix>& weights) const {
    std::vector<Matrix> out;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      out.push_back(blocks_[l].m1 * weights[l] * blocks_[l].m2);
    }
    return out;
  }

  double penalty(const std::vector<Matrix>& weights) const {
    double total = 0.0;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      const TransformBlock& b = blocks_[l];
      if (b.free_left) total += spectral_value(b.m1, b.left);
      if (b.free_right) total += spectral_value(b.m2, b.right);
      total += weights[l].squaredNorm();
    }
    return total;
  }

  const std::vector<TransformBlock>& blocks() const { return blocks_; }

 private:
  const FeatureOperator& op_;
  Vector rhs_;
  std::vector<TransformBlock> blocks_;
};

}  // namespace

AdaptiveSolution solve_bilinear(const FeatureOperator& op, const BlockStructure& structure,
                                const SolverConfig& cfg) {
  check_structure(op, structure);
  for (const BlockSpec& b : structure.blocks()) {
    if (!b.left.conforming() || !b.right.conforming()) {
      throw DomainError("solve_bilinear: block penalties must be conforming");
    }
  }
  if (cfg.continuation.empty()) throw Error("solve_bilinear: empty continuation schedule");

  BilinearProblem problem(op, structure);
  Vector x = problem.pack();
  AdaptiveSolution sol;
  std::vector<double> residuals;
  std::ostringstream diag;
  bool stalled = false;
  double step = cfg.step;
  int total_iterations = 0;
  BilinearProblem::Evaluation current;

  for (const double mu : cfg.continuation) {
    sol.level_starts.push_back(sol.trace.size());
    current = problem.evaluate(x, mu, true);
    sol.trace.push_back(current.value);
    int flat_steps = 0;
    for (int it = 0; it < cfg.max_iter && x.size() > 0; ++it) {
      const double gnorm2 = current.gradient.squaredNorm();
      if (std::sqrt(gnorm2) <= 1e-11 * std::max(1.0, std::abs(current.value))) break;
      bool accepted = false;
      Vector next_x;
      BilinearProblem::Evaluation next;
      for (int halving = 0; halving < 80; ++halving) {
        next_x = x - step * current.gradient;
        next = problem.evaluate(next_x, mu, true);
        if (next.value <= current.value - 1e-4 * step * gnorm2) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      ++total_iterations;
      const Vector s = next_x - x;
      const Vector yv = next.gradient - current.gradient;
      const double sy = s.dot(yv);
      const double change = current.value - next.value;
      x = std::move(next_x);
      current = std::move(next);
      sol.trace.push_back(current.value);
      step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e6) : std::min(2.0 * step, 1e6);
      flat_steps = change <= 1e-15 * std::max(1.0, std::abs(current.value)) ? flat_steps + 1 : 0;
      if (flat_steps >= 20) break;
    }
    problem.unpack(x);
    current = problem.evaluate(x, mu, false);
    const std::vector<Matrix> b = problem.products(current.weights);
    Vector stacked(op.params());
    for (std::size_t l = 0; l < b.size(); ++l) {
      stacked.segment(problem.blocks()[l].range.begin, b[l].size()) = vec(b[l]);
    }
    const double residual = op.constraint_residual(stacked);
    residuals.push_back(residual);
    diag << "mu=" << mu << " residual=" << residual << "; ";
    if (residual <= cfg.tol) continue;
    const std::size_t n = residuals.size();
    if (n >= 3 && residuals[n - 1] >= residuals[n - 2] && residuals[n - 2] >= residuals[n - 3]) {
      stalled = true;
      diag << "continuation stalled; ";
      break;
    }
  }

  problem.unpack(x);
  sol.blocks = problem.products(current.weights);
  for (std::size_t l = 0; l < sol.blocks.size(); ++l) {
    const TransformBlock& b = problem.blocks()[l];
    sol.bilinear.push_back(BilinearFactors{b.m1, current.weights[l], b.m2});
  }
  sol.objective = problem.penalty(current.weights);
  sol.constraint_residual = residuals.empty() ? 0.0 : residuals.back();
  sol.iterations = total_iterations;
  sol.converged = !stalled && sol.constraint_residual <= cfg.tol;
  diag << (sol.converged ? "converged" : "not converged");
  sol.diagnostics = diag.str();
  attach_factorizations(sol, structure);
  return sol;
}

}  // namespace adaptfeat
