#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adaptfeat/kernel.hpp"
#include "adaptfeat/mlp.hpp"
#include "adaptfeat/rng.hpp"
#include "oracles.hpp"

using namespace adaptfeat;

TEST_CASE("spec validation and layout") {
  const MlpSpec spec{{4, 3, 2}};
  CHECK(spec.param_count() == 18);
  CHECK(spec.block_ranges()[1].begin == 12);
  CHECK_THROWS_AS(MlpSpec{{4}}.validate(), ShapeError);
  CounterRng rng(51);
  CHECK_THROWS_AS(forward(spec, Vector::Zero(5), Vector::Zero(4)), ShapeError);
  CHECK_THROWS_AS(forward(spec, init_params(spec, rng), Vector::Zero(3)), ShapeError);
}

TEST_CASE("forward: zero input, identity layer, independent evaluator") {
  CounterRng rng(52);
  const MlpSpec spec{{5, 7, 6, 3}};
  const ParamVector theta = init_params(spec, rng);
  CHECK(forward(spec, theta, Vector::Zero(5)).norm() == 0.0);

  const MlpSpec identity{{3, 3}};
  const Vector x = rng.normal_vector(3);
  CHECK((forward(identity, vec(Matrix::Identity(3, 3)), x) - x).norm() == 0.0);

  for (int t = 0; t < 5; ++t) {
    const Vector xi = rng.normal_vector(5);
    const ParamVector th = init_params(spec, rng);
    CHECK((forward(spec, th, xi) - oracle::mlp_forward(spec.layer_widths, th, xi)).norm() < 1e-12);
  }
  const Matrix batch = rng.normal_matrix(4, 5);
  const Matrix out = forward_batch(spec, theta, batch);
  for (Index i = 0; i < 4; ++i) CHECK((out.row(i).transpose() - forward(spec, theta, batch.row(i).transpose())).norm() < 1e-12);
}

TEST_CASE("jacobian: final layer block is I_C ⊗ z^T") {
  CounterRng rng(53);
  const MlpSpec spec{{4, 5, 3}};
  const ParamVector theta = init_params(spec, rng);
  const Vector x = rng.normal_vector(4);
  const Matrix j = jacobian(spec, theta, x);
  const Vector z = forward_full(spec, theta, x).penultimate;
  const ColumnRange last = spec.block_ranges().back();
  const Matrix expected = oracle::kron(Matrix::Identity(3, 3), z.transpose());
  CHECK((j.middleCols(last.begin, last.size) - expected).norm() < 1e-14);
}

TEST_CASE("jacobian: single linear layer") {
  CounterRng rng(54);
  const MlpSpec spec{{3, 2}};
  const Vector x = rng.normal_vector(3);
  const Matrix j = jacobian(spec, init_params(spec, rng), x);
  Matrix expected = Matrix::Zero(2, 6);
  expected.block(0, 0, 1, 3) = x.transpose();
  expected.block(1, 3, 1, 3) = x.transpose();
  CHECK((j - expected).norm() == 0.0);
}

TEST_CASE("jacobian matches central differences of the independent evaluator") {
  CounterRng rng(55);
  for (int t = 0; t < 10; ++t) {
    const MlpSpec spec{{3 + static_cast<Index>(rng.below(3)), 4, 5, 1 + static_cast<Index>(rng.below(3))}};
    const ParamVector theta = init_params(spec, rng);
    const Vector x = rng.normal_vector(spec.input_dim());
    const Matrix j = jacobian(spec, theta, x);
    Matrix fd(j.rows(), j.cols());
    const double h = 1e-5;
    for (Index k = 0; k < theta.size(); ++k) {
      Vector a = theta, b = theta;
      a(k) += h;
      b(k) -= h;
      fd.col(k) = (oracle::mlp_forward(spec.layer_widths, a, x) - oracle::mlp_forward(spec.layer_widths, b, x)) / (2 * h);
    }
    CHECK((j - fd).cwiseAbs().maxCoeff() / std::max(1.0, j.cwiseAbs().maxCoeff()) <= 1e-5);
  }
}

TEST_CASE("batched jacobian stacks per-sample jacobians sample-major") {
  CounterRng rng(56);
  const MlpSpec spec{{3, 4, 2}};
  const ParamVector theta = init_params(spec, rng);
  const Matrix x = rng.normal_matrix(3, 3);
  const Matrix stacked = jacobian_batch(spec, theta, x);
  for (Index i = 0; i < 3; ++i) {
    CHECK((stacked.middleRows(2 * i, 2) - jacobian(spec, theta, x.row(i).transpose())).norm() < 1e-14);
  }
}

TEST_CASE("path-averaged features") {
  CounterRng rng(57);
  const MlpSpec spec{{3, 6, 2}};
  const ParamVector a = init_params(spec, rng);
  const ParamVector b = init_params(spec, rng);
  const Vector x = rng.normal_vector(3);
  CHECK((path_averaged_features(spec, a, a, x) - jacobian(spec, a, x)).norm() < 1e-13);
  const MlpSpec linear{{3, 2}};
  const ParamVector la = init_params(linear, rng), lb = init_params(linear, rng);
  CHECK((path_averaged_features(linear, la, lb, x, 7) - jacobian(linear, la, x)).norm() < 1e-13);
  CHECK_THROWS_AS(path_averaged_features(spec, a, b, x, 1), DomainError);

  // Three-point trapezoid by hand.
  const Matrix manual = 0.25 * jacobian(spec, a, x) + 0.5 * jacobian(spec, 0.5 * (a + b), x) + 0.25 * jacobian(spec, b, x);
  CHECK((path_averaged_features(spec, a, b, x, 3) - manual).norm() < 1e-13);
}

TEST_CASE("path-averaged features linearize the function delta") {
  CounterRng rng(58);
  const MlpSpec spec{{4, 8, 8, 1}};
  // Small displacement: the activation pattern stays fixed along the path.
  int checked = 0;
  for (int t = 0; t < 40 && checked < 3; ++t) {
    const ParamVector a = init_params(spec, rng);
    const ParamVector b = a + 0.01 * rng.normal_vector(a.size());
    const Vector x = rng.normal_vector(4);
    const Vector df = forward(spec, b, x) - forward(spec, a, x);
    const auto err = [&](int n) { return (path_averaged_features(spec, a, b, x, n) * (b - a) - df).norm() / df.norm(); };
    const double e101 = err(101), e201 = err(201), e401 = err(401);
    if (!(e101 > 1e-12)) continue;
    ++checked;
    CHECK(e201 <= 1e-3);
    CHECK(e101 / e401 >= 3.0);
  }
  CHECK(checked == 3);
}

TEST_CASE("kernels: K0, PSD, block layout") {
  CounterRng rng(59);
  const MlpSpec spec{{3, 5, 2}};
  const ParamVector theta = init_params(spec, rng);
  const Vector x = rng.normal_vector(3);
  const Matrix j = jacobian(spec, theta, x);
  const KernelMatrix k = kernel_from_features(j, {}, 2);
  CHECK((k.gram() - j * j.transpose()).norm() < 1e-12);
  CHECK(k.is_psd());
  CHECK(k.samples() == 1);

  // Orthogonal inputs through one linear layer give a block-diagonal Gram.
  const MlpSpec linear{{4, 1}};
  Matrix xs = Matrix::Zero(2, 4);
  xs(0, 0) = 1.0;
  xs(1, 2) = 2.0;
  const KernelMatrix kb = kernel_from_features(jacobian_batch(linear, init_params(linear, rng), xs));
  CHECK(kb.gram()(0, 1) == 0.0);
  CHECK(kb.gram()(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("kernel transforms are validated") {
  CounterRng rng(60);
  const Matrix f = rng.normal_matrix(3, 4);
  Matrix bad = Matrix::Identity(4, 4);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(kernel_from_features(f, std::vector<BlockTransform>{{{0, 4}, 4, 1, bad, Matrix::Identity(1, 1)}}),
                  DomainError);
  Matrix asym = Matrix::Identity(4, 4);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(kernel_from_features(f, std::vector<BlockTransform>{{{0, 4}, 4, 1, asym, Matrix::Identity(1, 1)}}),
                  DomainError);
  CHECK_THROWS_AS(kernel_from_features(f, std::vector<BlockTransform>{{{0, 4}, 2, 1, Matrix::Identity(2, 2), Matrix::Identity(1, 1)}}),
                  ShapeError);
  Matrix asym_gram = Matrix::Identity(2, 2);
  asym_gram(0, 1) = 1.0;
  CHECK_THROWS_AS(KernelMatrix{asym_gram}, DomainError);
  const Matrix cross = cross_kernel(f, f);
  CHECK((cross - f * f.transpose()).norm() < 1e-12);
}

TEST_CASE("label kernel") {
  CounterRng rng(61);
  CHECK(label_kernel(Matrix::Zero(4, 2)).gram().norm() == 0.0);
  const Vector y = rng.normal_vector(5);
  CHECK((label_kernel(Matrix(y)).gram() - y * y.transpose()).norm() < 1e-14);
  const Matrix d = rng.normal_matrix(6, 2);
  const KernelMatrix k = label_kernel(d);
  const Eigen::JacobiSVD<Matrix> s(k.gram());
  int rank = 0;
  for (Index i = 0; i < s.singularValues().size(); ++i) rank += s.singularValues()(i) > 1e-10 * s.singularValues()(0);
  CHECK(rank <= 2);
  CHECK(k.output_dim() == 2);
  CHECK(k.block(1, 2)(0, 1) == doctest::Approx(d(1, 0) * d(2, 1)));
}

TEST_CASE("kernel alignment") {
  CounterRng rng(62);
  const Matrix fa = rng.normal_matrix(5, 8), fb = rng.normal_matrix(5, 8);
  const KernelMatrix a = kernel_from_features(fa), b = kernel_from_features(fb);
  CHECK(kernel_alignment(a, a) == doctest::Approx(1.0));
  CHECK(kernel_alignment(a, KernelMatrix(3.5 * a.gram())) == doctest::Approx(1.0));
  double num = 0, na = 0, nb = 0;
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      num += a.gram()(i, j) * b.gram()(i, j);
      na += a.gram()(i, j) * a.gram()(i, j);
      nb += b.gram()(i, j) * b.gram()(i, j);
    }
  const double expected = num / std::sqrt(na * nb);
  CHECK(kernel_alignment(a, b) == doctest::Approx(expected).epsilon(1e-12));
  const std::vector<Index> order = {3, 0, 4, 1, 2};
  CHECK(kernel_alignment(a.permuted(order), b.permuted(order)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(kernel_alignment(a, KernelMatrix(Matrix::Zero(5, 5))), DomainError);
}

TEST_CASE("loss gradient matches finite differences") {
  CounterRng rng(63);
  const MlpSpec spec{{3, 4, 2}};
  const ParamVector theta = init_params(spec, rng);
  const Matrix x = rng.normal_matrix(5, 3);
  const Matrix y = rng.normal_matrix(5, 2);
  const LossGradient lg = squared_loss_gradient(spec, theta, x, y);
  const auto loss = [&](const Vector& th) {
    double total = 0.0;
    for (Index i = 0; i < 5; ++i) total += (oracle::mlp_forward(spec.layer_widths, th, x.row(i).transpose()) - y.row(i).transpose()).squaredNorm();
    return total / 5.0;
  };
  CHECK(lg.loss == doctest::Approx(loss(theta)));
  for (Index k = 0; k < theta.size(); ++k) {
    Vector a = theta, b = theta;
    a(k) += 1e-6;
    b(k) -= 1e-6;
    CHECK(lg.gradient(k) == doctest::Approx((loss(a) - loss(b)) / 2e-6).epsilon(1e-5));
  }
}
