#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "shrinklab/core.hpp"
#include "test_util.hpp"

using namespace shrinklab;
using testutil::random_matrix;

TEST(SampleObservation, EntryMeanMatchesM) {
  Matrix m(2, 2);
  m << 1.5, -2.0, 0.3, 4.0;
  auto eng = make_engine(RngSeed{7});
  const int draws = 100000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += sample_observation(m, SampleSize(1), eng)(0, 0);
  EXPECT_NEAR(sum / draws, 1.5, 4.0 / std::sqrt(double(draws)));
}

TEST(SampleObservation, VarianceIsInverseN) {
  const Matrix m = Matrix::Zero(3, 2);
  auto eng = make_engine(RngSeed{8});
  double s = 0.0, s2 = 0.0;
  long count = 0;
  for (int k = 0; k < 20000; ++k) {
    const Matrix y = sample_observation(m, SampleSize(4), eng);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      s += y(i);
      s2 += y(i) * y(i);
      ++count;
    }
  }
  const double mean = s / count, var = s2 / count - mean * mean;
  EXPECT_NEAR(var, 0.25, 0.05 * 0.25);
}

TEST(SampleObservation, Deterministic) {
  const Matrix m = random_matrix(4, 2, 1);
  const Matrix a = sample_observation(m, SampleSize(3), RngSeed{42});
  const Matrix b = sample_observation(m, SampleSize(3), RngSeed{42});
  EXPECT_TRUE((a.array() == b.array()).all());
  const Matrix c = sample_observation(m, SampleSize(3), RngSeed{43});
  EXPECT_FALSE((a.array() == c.array()).all());
}

TEST(SampleSize, RejectsNonpositive) {
  EXPECT_THROW(SampleSize(0.0), Error);
  EXPECT_THROW(SampleSize(-1.0), Error);
}

TEST(LogLikelihood, ZeroResidual) {
  const Matrix y = Matrix::Constant(1, 1, 0.7);
  EXPECT_NEAR(log_likelihood(y, y, SampleSize(1)), -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
}

TEST(LogLikelihood, ResidualNormTwo) {
  Matrix y(1, 2), m = Matrix::Zero(1, 2);
  y << 1.0, -1.0;
  EXPECT_NEAR(log_likelihood(y, m, SampleSize(1)), -std::log(2.0 * std::numbers::pi) - 1.0, 1e-14);
}

TEST(LogLikelihood, SumOfScalarGaussians) {
  const Matrix y = random_matrix(4, 2, 2), m = random_matrix(4, 2, 3);
  const double n_obs = 2.5, sd = 1.0 / std::sqrt(n_obs);
  double oracle = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double z = (y(i) - m(i)) / sd;
    oracle += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  EXPECT_NEAR(log_likelihood(y, m, SampleSize(n_obs)), oracle, 1e-12);
}

TEST(LogLikelihood, ShapeMismatchThrows) {
  EXPECT_THROW(log_likelihood(Matrix::Zero(3, 2), Matrix::Zero(2, 2), SampleSize(1)), ShapeError);
}

TEST(Svd, OrthogonalColumns) {
  Matrix y = Matrix::Zero(4, 2);
  y(0, 0) = 2.0;
  y(1, 1) = 3.0;
  const SvdTriple d = svd(y);
  EXPECT_NEAR(d.sigma(0), 3.0, 1e-14);
  EXPECT_NEAR(d.sigma(1), 2.0, 1e-14);
}

TEST(Svd, ScaledIdentityBlock) {
  Matrix y = Matrix::Zero(5, 2);
  y.topRows(2) = 1.7 * Matrix::Identity(2, 2);
  const SvdTriple d = svd(y);
  EXPECT_NEAR(d.sigma(0), 1.7, 1e-14);
  EXPECT_NEAR(d.sigma(1), 1.7, 1e-14);
}

TEST(Svd, FrobeniusIdentity) {
  const Matrix y = random_matrix(5, 3, 4);
  EXPECT_NEAR(svd(y).sigma.squaredNorm(), y.squaredNorm(), 1e-10);
}

TEST(Svd, InvariantsOnRandomMatrices) {
  for (auto [n, p] : {std::pair{4, 2}, {10, 3}, {20, 3}})
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Matrix y = random_matrix(n, p, 100 + s);
      const SvdTriple d = svd(y);
      const Matrix ip = Matrix::Identity(p, p);
      EXPECT_LT((d.u.transpose() * d.u - ip).norm(), 1e-10);
      EXPECT_LT((d.v.transpose() * d.v - ip).norm(), 1e-10);
      EXPECT_LT((d.u * d.sigma.asDiagonal() * d.v.transpose() - y).norm() / y.norm(), 1e-10);
      for (Eigen::Index i = 1; i < p; ++i) EXPECT_GE(d.sigma(i - 1), d.sigma(i));
      EXPECT_GE(d.sigma(p - 1), 0.0);
      for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::Index i = 0;
        while (d.v(i, j) == 0.0) ++i;
        EXPECT_GT(d.v(i, j), 0.0);
      }
    }
}

TEST(FrobeniusLoss, Basics) {
  const Matrix m = random_matrix(3, 2, 5);
  EXPECT_EQ(frobenius_loss(m, m), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_loss(Matrix::Ones(2, 3), Matrix::Zero(2, 3)), 6.0);
  EXPECT_THROW(frobenius_loss(Matrix::Zero(2, 3), Matrix::Zero(3, 2)), ShapeError);
}

TEST(FrobeniusLoss, TraceOfMatrixLoss) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix a = random_matrix(6, 3, 200 + s), b = random_matrix(6, 3, 300 + s);
    EXPECT_NEAR(matrix_quadratic_loss(a, b).trace(), frobenius_loss(a, b), 1e-12);
  }
}

TEST(FrobeniusLoss, OrthogonalInvariance) {
  const Matrix a = random_matrix(5, 3, 6), b = random_matrix(5, 3, 7);
  const Matrix q = testutil::random_orthogonal(5, 8), r = testutil::random_orthogonal(3, 9);
  EXPECT_NEAR(frobenius_loss(q * a * r, q * b * r), frobenius_loss(a, b), 1e-10);
}

TEST(MatrixQuadraticLoss, Examples) {
  const Matrix m = random_matrix(4, 2, 10);
  EXPECT_EQ(matrix_quadratic_loss(m, m).norm(), 0.0);
  Matrix d = Matrix::Zero(4, 2);
  d.topRows(2).setIdentity();
  EXPECT_LT((matrix_quadratic_loss(m + d, m) - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(MatrixQuadraticLoss, PositiveSemidefinite) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix l = matrix_quadratic_loss(random_matrix(5, 3, 400 + s), random_matrix(5, 3, 500 + s));
    EXPECT_LT((l - l.transpose()).norm(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(l);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(HaarColumnOrthonormal, Orthonormal) {
  auto eng = make_engine(RngSeed{11});
  const Matrix u = haar_column_orthonormal(10, 3, eng);
  EXPECT_LT((u.transpose() * u - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(Rng, DerivedStreamsDiffer) {
  const RngSeed a = derive_seed(RngSeed{1}, StreamRole::chain, {3});
  const RngSeed b = derive_seed(RngSeed{1}, StreamRole::chain, {4});
  const RngSeed c = derive_seed(RngSeed{1}, StreamRole::observation, {3});
  EXPECT_NE(a.value, b.value);
  EXPECT_NE(a.value, c.value);
  EXPECT_EQ(a.value, derive_seed(RngSeed{1}, StreamRole::chain, {3}).value);
}
