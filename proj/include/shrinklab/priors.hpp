#ifndef SHRINKLAB_PRIORS_HPP_
#define SHRINKLAB_PRIORS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "shrinklab/core.hpp"

namespace shrinklab {

enum class PriorKind {
  svs,              // det(M^T M)^{-(n-p-1)/2}
  msvs1,            // svs * ||M||_F^{-gamma}
  msvs2,            // svs * prod_i ||M_.i||^{-gamma_i}
  frobenius_power,  // ||M||_F^{-gamma}; gamma = np - 2 is Stein's prior
  columnwise,       // prod_i ||M_.i||^{-gamma_i}, the column factor of msvs2
  uniform,
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// log det(M^T M) from the Gram matrix; -inf when M is rank deficient.
// Cholesky on the p x p Gram matrix; falls back to the singular values of
// M when the factorization breaks down.
inline double log_det_gram(const Matrix& m, const Matrix& gram) {
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success) {
    const auto d = llt.matrixLLT().diagonal();
    if ((d.array() > 0.0).all()) return 2.0 * d.array().log().sum();
  }
  const Vector s = singular_values(m);
  if (s.minCoeff() <= 0.0) return -kInf;
  return 2.0 * s.array().log().sum();
}

// -c/2 * log(x) with the convention that c == 0 contributes nothing.
inline double neg_half_power_log(double c, double x) {
  if (c == 0.0) return 0.0;
  return -0.5 * c * std::log(x);
}

}  // namespace detail

/// Improper prior on an n x p mean matrix. All densities are unnormalized.
class PriorModel {
 public:
  static PriorModel svs(Eigen::Index n, Eigen::Index p) { return PriorModel(PriorKind::svs, n, p, 0.0, {}); }

  static PriorModel msvs1(Eigen::Index n, Eigen::Index p, double gamma) {
    return PriorModel(PriorKind::msvs1, n, p, gamma, {});
  }
  /// gamma = p^2 + p - 2 minimizes the leading risk-difference term.
  static PriorModel msvs1(Eigen::Index n, Eigen::Index p) {
    return msvs1(n, p, static_cast<double>(p * p + p - 2));
  }

  static PriorModel msvs2(Eigen::Index n, Eigen::Index p, std::vector<double> gamma_vec) {
    return PriorModel(PriorKind::msvs2, n, p, 0.0, std::move(gamma_vec));
  }
  static PriorModel msvs2(Eigen::Index n, Eigen::Index p) {
    return msvs2(n, p, std::vector<double>(static_cast<std::size_t>(p), static_cast<double>(p - 1)));
  }

  static PriorModel frobenius_power(Eigen::Index n, Eigen::Index p, double gamma) {
    return PriorModel(PriorKind::frobenius_power, n, p, gamma, {});
  }
  /// Stein's prior on vec(M): ||M||_F^{2-np}.
  static PriorModel stein(Eigen::Index n, Eigen::Index p) {
    PriorModel out = frobenius_power(n, p, static_cast<double>(n * p - 2));
    out.label_ = "stein";
    return out;
  }

  static PriorModel columnwise(Eigen::Index n, Eigen::Index p, std::vector<double> gamma_vec) {
    return PriorModel(PriorKind::columnwise, n, p, 0.0, std::move(gamma_vec));
  }

  static PriorModel uniform(Eigen::Index n, Eigen::Index p) {
    return PriorModel(PriorKind::uniform, n, p, 0.0, {});
  }

  PriorKind kind() const { return kind_; }
  Eigen::Index rows() const { return n_; }
  Eigen::Index cols() const { return p_; }
  double gamma() const { return gamma_; }
  const std::vector<double>& gamma_vec() const { return gamma_vec_; }
  const std::string& name() const { return label_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  bool has_svs_factor() const {
    return kind_ == PriorKind::svs || kind_ == PriorKind::msvs1 || kind_ == PriorKind::msvs2;
  }

  /// Whether the marginal density m(Y) is finite for every Y.
  bool has_proper_marginal() const {
    const double n = static_cast<double>(n_), p = static_cast<double>(p_);
    switch (kind_) {
      case PriorKind::svs:
      case PriorKind::uniform:
        return true;
      case PriorKind::msvs1:
        return gamma_ >= 0.0 && gamma_ < p * p + p;
      case PriorKind::msvs2:
        return std::all_of(gamma_vec_.begin(), gamma_vec_.end(), [p](double g) { return g >= 0.0 && g <= p; });
      case PriorKind::frobenius_power:
        return gamma_ < n * p;
      case PriorKind::columnwise:
        return std::all_of(gamma_vec_.begin(), gamma_vec_.end(), [n](double g) { return g < n; });
    }
    return false;
  }

  /// Column exponents gamma_i if all equal, else NaN.
  double common_gamma() const {
    if (gamma_vec_.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double g = gamma_vec_.front();
    for (double x : gamma_vec_)
      if (x != g) return std::numeric_limits<double>::quiet_NaN();
    return g;
  }

  ////////////////////////////////////////////////////////////////
  // log density

  /// Log density from M and its Gram matrix K = M^T M. +inf on the
  /// singular set (rank deficiency, zero column/matrix with positive
  /// exponent).
  double log_density(const Matrix& m, const Matrix& gram) const {
    const double n = static_cast<double>(n_), p = static_cast<double>(p_);
    double out = 0.0;
    if (has_svs_factor()) {
      const double ld = detail::log_det_gram(m, gram);
      if (ld == -detail::kInf) return detail::kInf;
      out -= 0.5 * (n - p - 1.0) * ld;
    }
    switch (kind_) {
      case PriorKind::msvs1:
      case PriorKind::frobenius_power: {
        const double tr = gram.trace();
        if (tr == 0.0 && gamma_ != 0.0) return gamma_ > 0 ? detail::kInf : -detail::kInf;
        out += detail::neg_half_power_log(gamma_, tr);
        break;
      }
      case PriorKind::msvs2:
      case PriorKind::columnwise:
        for (Eigen::Index i = 0; i < p_; ++i) {
          const double g = gamma_vec_[static_cast<std::size_t>(i)];
          if (g == 0.0) continue;
          if (gram(i, i) == 0.0) return g > 0 ? detail::kInf : -detail::kInf;
          out += detail::neg_half_power_log(g, gram(i, i));
        }
        break;
      default:
        break;
    }
    return out;
  }

  double log_density(const Matrix& m) const {
    check_shape(m);
    if (kind_ == PriorKind::uniform) return 0.0;
    return log_density(m, m.transpose() * m);
  }

  double operator()(const Matrix& m) const { return log_density(m); }

  ////////////////////////////////////////////////////////////////
  // derivatives

  /// Matrix gradient of log pi, (d/dM_ai) log pi(M).
  Matrix grad_log_density(const Matrix& m) const {
    check_shape(m);
    const Matrix gram = m.transpose() * m;
    Matrix g = Matrix::Zero(n_, p_);
    if (has_svs_factor()) {
      Eigen::LDLT<Matrix> ldlt(gram);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all() || ldlt.rcond() < 1e-14)
        throw NumericError("grad_log_density: M^T M is singular");
      g -= static_cast<double>(n_ - p_ - 1) * ldlt.solve(m.transpose()).transpose();
    }
    switch (kind_) {
      case PriorKind::msvs1:
      case PriorKind::frobenius_power: {
        const double tr = gram.trace();
        if (tr == 0.0) throw NumericError("grad_log_density: M = 0");
        g -= (gamma_ / tr) * m;
        break;
      }
      case PriorKind::msvs2:
      case PriorKind::columnwise:
        for (Eigen::Index i = 0; i < p_; ++i) {
          const double g_i = gamma_vec_[static_cast<std::size_t>(i)];
          if (g_i == 0.0) continue;
          if (gram(i, i) == 0.0) throw NumericError("grad_log_density: zero column " + std::to_string(i));
          g.col(i) -= (g_i / gram(i, i)) * m.col(i);
        }
        break;
      default:
        break;
    }
    return g;
  }

  /// p x p matrix Laplacian of log pi: sum_a d^2 log pi / dM_ai dM_aj.
  /// Closed forms exist for the factor priors only.
  Matrix matrix_laplacian_log(const Matrix& m) const {
    check_shape(m);
    const double n = static_cast<double>(n_);
    const Matrix gram = m.transpose() * m;
    switch (kind_) {
      case PriorKind::uniform:
        return Matrix::Zero(p_, p_);
      case PriorKind::frobenius_power: {
        const double tr = gram.trace();
        if (tr == 0.0) throw NumericError("matrix_laplacian_log: M = 0");
        return (-n * gamma_ / tr) * Matrix::Identity(p_, p_) + (2.0 * gamma_ / (tr * tr)) * gram;
      }
      case PriorKind::columnwise:
        return -(n - 2.0) * column_shrinkage_diag(gram);
      default:
        throw UnsupportedOperation("matrix_laplacian_log: no closed form for prior '" + label_ +
                                   "'; use laplacian_log_finite_difference for its trace");
    }
  }

  /// D = diag(gamma_i / ||M_.i||^2) for the column-wise exponents.
  Matrix column_shrinkage_diag(const Matrix& gram) const {
    if (gamma_vec_.empty()) throw UnsupportedOperation("column_shrinkage_diag: prior has no column exponents");
    Matrix d = Matrix::Zero(p_, p_);
    for (Eigen::Index i = 0; i < p_; ++i) {
      if (gram(i, i) == 0.0) throw NumericError("zero column " + std::to_string(i));
      d(i, i) = gamma_vec_[static_cast<std::size_t>(i)] / gram(i, i);
    }
    return d;
  }

  /// Laplacian of the density itself (not its log), from the closed forms
  /// for the orthogonally invariant and column-wise families.
  double laplacian_density_closed_form(const Matrix& m) const {
    check_shape(m);
    const double n = static_cast<double>(n_), p = static_cast<double>(p_);
    const Matrix gram = m.transpose() * m;
    if (kind_ != PriorKind::uniform && kind_ != PriorKind::frobenius_power &&
        kind_ != PriorKind::columnwise && detail::log_det_gram(m, gram) == -detail::kInf)
      throw NumericError("laplacian_density_closed_form: M is rank deficient");
    const double density = std::exp(log_density(m, gram));
    switch (kind_) {
      case PriorKind::uniform:
      case PriorKind::svs:
        return 0.0;
      case PriorKind::msvs1:
        return gamma_ * (gamma_ + n * p - 2.0 * p * p - 2.0 * p + 2.0) / gram.trace() * density;
      case PriorKind::msvs2: {
        const double g = common_gamma();
        if (std::isnan(g))
          throw UnsupportedOperation("laplacian_density_closed_form: msvs2 requires equal column exponents");
        return g * (g + n - 2.0 * p) * gram.diagonal().cwiseInverse().sum() * density;
      }
      case PriorKind::frobenius_power:
        return gamma_ * (gamma_ + 2.0 - n * p) / gram.trace() * density;
      case PriorKind::columnwise: {
        double s = 0.0;
        for (Eigen::Index i = 0; i < p_; ++i) {
          const double g = gamma_vec_[static_cast<std::size_t>(i)];
          s += g * (g + 2.0 - n) / gram(i, i);
        }
        return s * density;
      }
    }
    return 0.0;
  }

 private:
  PriorModel(PriorKind kind, Eigen::Index n, Eigen::Index p, double gamma, std::vector<double> gamma_vec)
      : kind_(kind), n_(n), p_(p), gamma_(gamma), gamma_vec_(std::move(gamma_vec)) {
    if (p < 1 || n < p) throw ShapeError("prior shape: need n >= p >= 1");
    label_ = default_label(kind);
    if (has_svs_factor() && n - p - 1 <= 0)
      throw ShapeError("singular value shrinkage priors need n - p - 1 > 0, got n=" + std::to_string(n) +
                       " p=" + std::to_string(p));
    if ((kind == PriorKind::msvs2 || kind == PriorKind::columnwise) &&
        gamma_vec_.size() != static_cast<std::size_t>(p))
      throw ShapeError("gamma_vec must have length p = " + std::to_string(p));
    const double pd = static_cast<double>(p);
    if (kind == PriorKind::msvs1 && !(gamma_ >= 0.0 && gamma_ < pd * pd + pd))
      warnings_.push_back("msvs1: gamma outside [0, p^2+p); marginal density may be infinite");
    if (kind == PriorKind::msvs2) {
      if (!has_proper_marginal())
        warnings_.push_back("msvs2: some gamma_i outside [0, p]; marginal density may be infinite");
      const double sum = std::accumulate(gamma_vec_.begin(), gamma_vec_.end(), 0.0);
      if (sum >= pd * pd + pd)
        warnings_.push_back("msvs2: sum of gamma_i >= p^2+p; the radial integrability bound fails");
    }
  }

  static std::string default_label(PriorKind kind) {
    switch (kind) {
      case PriorKind::svs: return "svs";
      case PriorKind::msvs1: return "msvs1";
      case PriorKind::msvs2: return "msvs2";
      case PriorKind::frobenius_power: return "frobenius_power";
      case PriorKind::columnwise: return "columnwise";
      case PriorKind::uniform: return "uniform";
    }
    return "?";
  }

  void check_shape(const Matrix& m) const {
    if (m.rows() != n_ || m.cols() != p_)
      throw ShapeError("prior '" + label_ + "' expects " + std::to_string(n_) + "x" + std::to_string(p_) +
                       ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }

  PriorKind kind_;
  Eigen::Index n_, p_;
  double gamma_ = 0.0;
  std::vector<double> gamma_vec_;
  std::string label_;
  std::vector<std::string> warnings_;
};

/// Scalar Laplacian of log pi by fourth-order central differences,
/// step h = 1e-3 * max(1, ||M||_F) unless given.
template <class LogDensity>
double laplacian_log_finite_difference(const LogDensity& log_pi, const Matrix& m, double h = 0.0) {
  if (h <= 0.0) h = 1e-3 * std::max(1.0, m.norm());
  const double f0 = log_pi(m);
  Matrix x = m;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double orig = x(i, j);
      double f[4];
      const double steps[4] = {2.0 * h, h, -h, -2.0 * h};
      for (int k = 0; k < 4; ++k) {
        x(i, j) = orig + steps[k];
        f[k] = log_pi(x);
      }
      x(i, j) = orig;
      acc += (-f[0] + 16.0 * f[1] - 30.0 * f0 + 16.0 * f[2] - f[3]) / (12.0 * h * h);
    }
  return acc;
}

/// Central-difference gradient, step h = 1e-5 * max(1, ||M||_F) unless given.
template <class LogDensity>
Matrix gradient_finite_difference(const LogDensity& log_pi, const Matrix& m, double h = 0.0) {
  if (h <= 0.0) h = 1e-5 * std::max(1.0, m.norm());
  Matrix x = m, g(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double orig = x(i, j);
      x(i, j) = orig + h;
      const double fp = log_pi(x);
      x(i, j) = orig - h;
      const double fm = log_pi(x);
      x(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  return g;
}

/// Laplacian of an orthogonally invariant f(X) = g(sigma(X)) given the
/// first and second partials of g at the singular values of X.
inline double invariant_laplacian(const Vector& sigma, const Vector& dg, const Vector& d2g, Eigen::Index n) {
  const Eigen::Index p = sigma.size();
  if (dg.size() != p || d2g.size() != p) throw ShapeError("invariant_laplacian: partials must have length p");
  if (n < p) throw ShapeError("invariant_laplacian: need n >= p");
  for (Eigen::Index i = 0; i < p; ++i)
    if (!(sigma(i) > 0.0)) throw NumericError("invariant_laplacian: singular values must be positive");
  double cross = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i + 1; j < p; ++j) {
      if (std::abs(sigma(i) - sigma(j)) < 1e-8)
        throw NumericError("invariant_laplacian: repeated singular values");
      cross += (sigma(i) * dg(i) - sigma(j) * dg(j)) / (sigma(i) * sigma(i) - sigma(j) * sigma(j));
    }
  const double radial = static_cast<double>(n - p) * (dg.array() / sigma.array()).sum();
  return 2.0 * cross + radial + d2g.sum();
}

}  // namespace shrinklab

#endif  // SHRINKLAB_PRIORS_HPP_
