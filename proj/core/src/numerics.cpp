#include "adaptfeat/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace adaptfeat {

namespace {

// Extend the orthonormal columns [0, filled) of q to a full orthonormal basis
// using standard basis vectors as candidates.
void complete_orthonormal_basis(Matrix& q, Index filled) {
  const Index m = q.rows();
  Index next = filled;
  for (Index k = 0; k < m && next < m; ++k) {
    Vector candidate = Vector::Unit(m, k);
    for (int pass = 0; pass < 2; ++pass) {
      for (Index j = 0; j < next; ++j) {
        candidate -= q.col(j).dot(candidate) * q.col(j);
      }
    }
    const double norm = candidate.norm();
    if (norm > 0.5) {
      q.col(next++) = candidate / norm;
    }
  }
}

// Hestenes one-sided Jacobi on a tall (rows >= cols) matrix.
SvdFactors jacobi_tall(const Matrix& a, const SvdOptions& options) {
  const Index m = a.rows();
  const Index n = a.cols();
  Matrix g = a;
  Matrix v = Matrix::Identity(n, n);

  const double threshold =
      std::max(options.threshold, std::sqrt(static_cast<double>(m)) * std::numeric_limits<double>::epsilon());
  double off_mass = 0.0;
  bool converged = n < 2;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    off_mass = 0.0;
    bool rotated = false;
    for (Index i = 0; i + 1 < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        const double alpha = g.col(i).squaredNorm();
        const double beta = g.col(j).squaredNorm();
        const double gamma = g.col(i).dot(g.col(j));
        if (alpha == 0.0 || beta == 0.0) continue;
        const double relative = std::abs(gamma) / std::sqrt(alpha * beta);
        off_mass = std::max(off_mass, relative);
        if (relative <= threshold) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (Index r = 0; r < m; ++r) {
          const double gi = g(r, i);
          const double gj = g(r, j);
          g(r, i) = c * gi - s * gj;
          g(r, j) = s * gi + c * gj;
        }
        for (Index r = 0; r < n; ++r) {
          const double vi = v(r, i);
          const double vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "svd: Jacobi iteration did not converge after " << options.max_sweeps
        << " sweeps (residual relative off-diagonal mass " << off_mass << ")";
    throw ConvergenceError(msg.str());
  }

  Vector sigma(n);
  for (Index j = 0; j < n; ++j) sigma(j) = g.col(j).norm();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return sigma(x) > sigma(y); });

  SvdFactors out;
  out.s.resize(n);
  out.u = Matrix::Zero(m, m);
  out.v.resize(n, n);
  const double smax = n > 0 ? sigma(order[0]) : 0.0;
  const double reliable =
      smax * static_cast<double>(std::max(m, n)) *
      std::numeric_limits<double>::epsilon();
  Index good = 0;
  for (Index k = 0; k < n; ++k) {
    const Index j = order[static_cast<std::size_t>(k)];
    out.s(k) = sigma(j);
    out.v.col(k) = v.col(j);
    if (sigma(j) > reliable && sigma(j) > 0.0) {
      out.u.col(k) = g.col(j) / sigma(j);
      good = k + 1;
    }
  }
  // Columns past `good` carry (numerically) zero singular values; their left
  // vectors are rebuilt by completion.
  complete_orthonormal_basis(out.u, good);
  return out;
}

}  // namespace

Matrix SvdFactors::reconstruct() const {
  Matrix sigma = Matrix::Zero(u.cols(), v.cols());
  for (Index j = 0; j < s.size(); ++j) sigma(j, j) = s(j);
  return u * sigma * v.transpose();
}

SvdFactors svd(const Matrix& a, const SvdOptions& options) {
  if (!a.allFinite()) throw DomainError("svd: matrix has non-finite entries");
  if (a.rows() >= a.cols()) return jacobi_tall(a, options);
  SvdFactors t = jacobi_tall(a.transpose(), options);
  return SvdFactors{std::move(t.v), std::move(t.s), std::move(t.u)};
}

Index numerical_rank(const Vector& singular_values, double rank_cutoff) {
  if (singular_values.size() == 0) return 0;
  const double smax = singular_values(0);
  if (smax <= 0.0) return 0;
  Index rank = 0;
  while (rank < singular_values.size() &&
         singular_values(rank) >= rank_cutoff * smax) {
    ++rank;
  }
  return rank;
}

Matrix pseudoinverse(const Matrix& a, double rank_cutoff) {
  const SvdFactors f = svd(a);
  const Index rank = numerical_rank(f.s, rank_cutoff);
  Matrix out = Matrix::Zero(a.cols(), a.rows());
  for (Index j = 0; j < rank; ++j) {
    out.noalias() += (f.v.col(j) / f.s(j)) * f.u.col(j).transpose();
  }
  return out;
}

Matrix null_space_basis(const Matrix& a, double rank_cutoff) {
  const SvdFactors f = svd(a);
  const Index rank = numerical_rank(f.s, rank_cutoff);
  return f.v.rightCols(a.cols() - rank);
}

Vector min_norm_solve(const Matrix& a, const Vector& b, double tol,
                      double rank_cutoff) {
  if (a.rows() != b.size()) {
    throw ShapeError("min_norm_solve: right-hand side length does not match rows");
  }
  Vector x = pseudoinverse(a, rank_cutoff) * b;
  const double residual = (a * x - b).norm();
  if (residual > tol * b.norm()) {
    std::ostringstream msg;
    msg << "min_norm_solve: system is infeasible (residual " << residual
        << ", |b| " << b.norm() << ")";
    throw InfeasibleError(msg.str());
  }
  return x;
}

Matrix finite_difference_jacobian(const VectorFunction& f, const Vector& x,
                                  double h) {
  if (!(h > 0.0)) throw DomainError("finite_difference_jacobian: h must be positive");
  Vector probe = x;
  Matrix jac;
  for (Index j = 0; j < x.size(); ++j) {
    probe(j) = x(j) + h;
    const Vector plus = f(probe);
    probe(j) = x(j) - h;
    const Vector minus = f(probe);
    probe(j) = x(j);
    if (j == 0) jac.resize(plus.size(), x.size());
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("frobenius_inner: shape mismatch");
  }
  return a.cwiseProduct(b).sum();
}

Matrix unvec(const Eigen::Ref<const Vector>& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw ShapeError("unvec: length mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace adaptfeat
