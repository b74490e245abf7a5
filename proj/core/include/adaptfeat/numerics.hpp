#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace adaptfeat {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Full singular value decomposition A = U diag(S) V^T with U (m x m) and
/// V (n x n) orthogonal and S nonincreasing of length min(m, n).
struct SvdFactors {
  Matrix u;
  Vector s;
  Matrix v;

  Matrix reconstruct() const;
};

struct SvdOptions {
  int max_sweeps = 60;
  /// Relative column coupling below which a pair is left unrotated; the
  /// effective value is max(threshold, sqrt(rows) * eps).
  double threshold = 0.0;
};

/// One-sided Jacobi SVD. Throws ConvergenceError (with the final residual
/// off-diagonal mass) when the sweep cap is reached.
SvdFactors svd(const Matrix& a, const SvdOptions& options = {});

/// Relative rank cutoff used by pseudoinverse-based routines.
inline constexpr double kDefaultRankCutoff = 1e-10;

Matrix pseudoinverse(const Matrix& a, double rank_cutoff = kDefaultRankCutoff);

/// Orthonormal basis (columns) of null(A) using the same rank convention.
Matrix null_space_basis(const Matrix& a, double rank_cutoff = kDefaultRankCutoff);

Index numerical_rank(const Vector& singular_values,
                     double rank_cutoff = kDefaultRankCutoff);

/// x = A^+ b. Throws InfeasibleError when ||Ax - b|| > tol * ||b||.
Vector min_norm_solve(const Matrix& a, const Vector& b, double tol = 1e-8,
                      double rank_cutoff = kDefaultRankCutoff);

using VectorFunction = std::function<Vector(const Vector&)>;

/// Central differences: column j is (f(x + h e_j) - f(x - h e_j)) / 2h.
Matrix finite_difference_jacobian(const VectorFunction& f, const Vector& x,
                                  double h);

double frobenius_inner(const Matrix& a, const Matrix& b);

/// Reshape a column-stacked vector into a rows x cols matrix.
Matrix unvec(const Eigen::Ref<const Vector>& v, Index rows, Index cols);

/// Column stacking.
Vector vec(const Matrix& m);

}  // namespace adaptfeat
