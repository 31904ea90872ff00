#ifndef SHRINKLAB_ESTIMATORS_HPP_
#define SHRINKLAB_ESTIMATORS_HPP_

#include <string>

#include "shrinklab/core.hpp"

namespace shrinklab {

enum class ClosedFormKind { mle, em, mem, james_stein };

inline std::string to_string(ClosedFormKind kind) {
  switch (kind) {
    case ClosedFormKind::mle: return "mle";
    case ClosedFormKind::em: return "em";
    case ClosedFormKind::mem: return "mem";
    case ClosedFormKind::james_stein: return "js";
  }
  return "?";
}

namespace detail {

inline constexpr double kMaxGramCondition = 1e12;

inline void require_em_shape(const Matrix& y) {
  if (y.rows() - y.cols() - 1 <= 0)
    throw ShapeError("Efron-Morris type estimators need n - p - 1 > 0");
}

}  // namespace detail

/// Closed-form estimators of M from Y ~ N(M, I_n, N^{-1} I_p). None of
/// them apply positive-part truncation, so shrinkage factors may be
/// negative.
inline Matrix estimate(ClosedFormKind kind, const Matrix& y, SampleSize n_obs) {
  require_mean_matrix(y, "estimate");
  const double big_n = n_obs.value();
  const double n = static_cast<double>(y.rows()), p = static_cast<double>(y.cols());
  switch (kind) {
    case ClosedFormKind::mle:
      return y;
    case ClosedFormKind::james_stein: {
      if (y.cols() != 1) throw ShapeError("james-stein needs p = 1");
      if (y.rows() < 3) throw ShapeError("james-stein needs n >= 3");
      const double s = y.squaredNorm();
      if (s == 0.0) throw NumericError("james-stein: y = 0");
      return (1.0 - (n - 2.0) / (big_n * s)) * y;
    }
    case ClosedFormKind::em:
    case ClosedFormKind::mem: {
      detail::require_em_shape(y);
      const Matrix gram = y.transpose() * y;
      Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
      if (!(lo > 0.0) || hi / lo > detail::kMaxGramCondition)
        throw NumericError("estimate: Y^T Y is singular or ill-conditioned (condition > 1e12)");
      Matrix factor = Matrix::Identity(y.cols(), y.cols()) - ((n - p - 1.0) / big_n) * gram.inverse();
      if (kind == ClosedFormKind::mem)
        factor.diagonal().array() -= (p * p + p - 2.0) / (big_n * gram.trace());
      return y * factor;
    }
  }
  throw UnsupportedOperation("estimate: unknown kind");
}

/// Same estimators through the SVD: singular vectors are kept and each
/// singular value is multiplied by its shrinkage factor.
inline Matrix sv_shrinkage_form(const Matrix& y, SampleSize n_obs, ClosedFormKind kind) {
  if (kind != ClosedFormKind::em && kind != ClosedFormKind::mem)
    throw UnsupportedOperation("sv_shrinkage_form: only em and mem have a singular value form");
  require_mean_matrix(y, "sv_shrinkage_form");
  detail::require_em_shape(y);
  const double big_n = n_obs.value();
  const double n = static_cast<double>(y.rows()), p = static_cast<double>(y.cols());
  const SvdTriple d = svd(y);
  if (d.sigma.minCoeff() <= 0.0) throw NumericError("sv_shrinkage_form: zero singular value");
  const double fro2 = d.sigma.squaredNorm();
  Vector shrunk(d.sigma.size());
  for (Eigen::Index i = 0; i < d.sigma.size(); ++i) {
    const double s = d.sigma(i);
    double f = 1.0 - (n - p - 1.0) / (big_n * s * s);
    if (kind == ClosedFormKind::mem) f -= (p * p + p - 2.0) / (big_n * fro2);
    shrunk(i) = f * s;
  }
  return d.u * shrunk.asDiagonal() * d.v.transpose();
}

}  // namespace shrinklab

#endif  // SHRINKLAB_ESTIMATORS_HPP_
