#ifndef SHRINKLAB_CORE_HPP_
#define SHRINKLAB_CORE_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "shrinklab/rng.hpp"

namespace shrinklab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.3.0";

////////////////////////////////////////////////////////////////
// errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix shapes or invalid dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// The requested quantity has no implementation for this prior/estimator.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

// Singular systems, non-convergence, degenerate weights.
class NumericError : public Error {
 public:
  using Error::Error;
};

////////////////////////////////////////////////////////////////
// domain types

/// Number of averaged replicates. The observation Y has per-entry
/// variance 1/N. Stored as a real so that intermediate precisions
/// (e.g. N + t when pooling a future draw) can be represented; the
/// user-facing surfaces only hand out integers.
class SampleSize {
 public:
  explicit SampleSize(double n) : n_(n) {
    if (!(n > 0.0) || !std::isfinite(n))
      throw Error("sample size must be positive and finite, got " + std::to_string(n));
  }
  double value() const { return n_; }
  double noise_variance() const { return 1.0 / n_; }

 private:
  double n_;
};

inline void require_mean_matrix(const Matrix& m, const char* what = "mean matrix") {
  if (m.cols() < 1 || m.rows() < m.cols())
    throw ShapeError(std::string(what) + ": need n >= p >= 1, got " + std::to_string(m.rows()) +
                     "x" + std::to_string(m.cols()));
  if (!m.allFinite()) throw Error(std::string(what) + ": entries must be finite");
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

////////////////////////////////////////////////////////////////
// sampling

/// Y = M + E with E_ai ~ N(0, 1/N) drawn from `eng`.
template <class Engine>
Matrix sample_observation(const Matrix& m, SampleSize n, Engine& eng) {
  Matrix y(m.rows(), m.cols());
  fill_standard_normal(y, eng);
  y *= std::sqrt(n.noise_variance());
  y += m;
  return y;
}

inline Matrix sample_observation(const Matrix& m, SampleSize n, RngSeed seed) {
  require_mean_matrix(m);
  auto eng = make_engine(seed, StreamRole::observation);
  return sample_observation(m, n, eng);
}

/// n x p matrix with orthonormal columns, Haar distributed on the Stiefel manifold.
template <class Engine>
Matrix haar_column_orthonormal(Eigen::Index n, Eigen::Index p, Engine& eng) {
  Matrix g(n, p);
  fill_standard_normal(g, eng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, p);
  // Q R with positive diag(R) makes the law exactly Haar
  const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < p; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

////////////////////////////////////////////////////////////////
// densities and losses

/// log p(Y | M) for Y ~ N_{n,p}(M, I_n, N^{-1} I_p).
inline double log_likelihood(const Matrix& y, const Matrix& m, SampleSize n) {
  require_same_shape(y, m, "log_likelihood");
  const double np = static_cast<double>(y.size());
  const double prec = n.value();
  return 0.5 * np * std::log(prec / (2.0 * std::numbers::pi)) - 0.5 * prec * (y - m).squaredNorm();
}

inline double frobenius_loss(const Matrix& mhat, const Matrix& m) {
  require_same_shape(mhat, m, "frobenius_loss");
  return (mhat - m).squaredNorm();
}

/// (Mhat - M)^T (Mhat - M), symmetrized.
inline Matrix matrix_quadratic_loss(const Matrix& mhat, const Matrix& m) {
  require_same_shape(mhat, m, "matrix_quadratic_loss");
  const Matrix d = mhat - m;
  Matrix out = d.transpose() * d;
  return 0.5 * (out + out.transpose());
}

////////////////////////////////////////////////////////////////
// svd

struct SvdTriple {
  Matrix u;      // n x p, orthonormal columns
  Vector sigma;  // nonincreasing
  Matrix v;      // p x p orthogonal
};

/// Thin SVD, Y = U diag(sigma) V^T. Sign convention: the first nonzero
/// entry of each column of V is nonnegative.
inline SvdTriple svd(const Matrix& y) {
  require_mean_matrix(y, "svd");
  Eigen::JacobiSVD<Matrix> solver(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) throw NumericError("svd: Jacobi SVD did not converge");
  SvdTriple out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  for (Eigen::Index j = 0; j < out.v.cols(); ++j) {
    for (Eigen::Index i = 0; i < out.v.rows(); ++i) {
      if (out.v(i, j) != 0.0) {
        if (out.v(i, j) < 0) {
          out.v.col(j) = -out.v.col(j);
          out.u.col(j) = -out.u.col(j);
        }
        break;
      }
    }
  }
  return out;
}

inline Vector singular_values(const Matrix& y) {
  return Eigen::JacobiSVD<Matrix>(y).singularValues();
}

}  // namespace shrinklab

#endif  // SHRINKLAB_CORE_HPP_
