#ifndef SHRINKLAB_DIAGNOSTICS_HPP_
#define SHRINKLAB_DIAGNOSTICS_HPP_

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "shrinklab/core.hpp"
#include "shrinklab/parallel.hpp"
#include "shrinklab/priors.hpp"

namespace shrinklab {

////////////////////////////////////////////////////////////////
// marginal density, N = 1

struct MarginalEstimate {
  double log_value = 0.0;      // log of the Monte Carlo mean
  double log_std_error = 0.0;  // delta method: sd(w) / (mean(w) sqrt(n))
  long n_samples = 0;
};

namespace detail {

// log mean exp with a delta-method standard error on the log scale.
inline std::string short_number(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

inline MarginalEstimate log_mean_exp(const std::vector<double>& logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw NumericError("log_mean_exp: all weights underflow or diverge");
  const double n = static_cast<double>(logs.size());
  double s = 0.0, s2 = 0.0;
  for (double v : logs) {
    const double w = std::exp(v - mx);
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean) * n / std::max(1.0, n - 1.0);
  return {mx + std::log(mean), std::sqrt(var / n) / mean, static_cast<long>(logs.size())};
}

}  // namespace detail

/// m_pi(Y) = E_Z pi(Y + Z), Z standard matrix normal, by plain Monte Carlo.
inline MarginalEstimate marginal_density_mc(const PriorModel& prior, const Matrix& y, long n_samples, RngSeed seed) {
  if (n_samples < 2) throw Error("marginal_density_mc: need n_samples >= 2");
  if (!prior.has_proper_marginal()) throw Error("marginal_density_mc: prior '" + prior.name() + "' has no proper marginal");
  auto eng = make_engine(seed, StreamRole::inner);
  Matrix x(y.rows(), y.cols());
  std::vector<double> logs(static_cast<std::size_t>(n_samples));
  for (auto& v : logs) {
    fill_standard_normal(x, eng);
    x += y;
    v = prior.log_density(x);
  }
  for (double v : logs)
    if (v == std::numeric_limits<double>::infinity())
      throw NumericError("marginal_density_mc: sample hit the singular set of the prior");
  return detail::log_mean_exp(logs);
}

/// log A_{n,p} - p(n-p-1) log ||M||_F, A_{n,p} = p^{p(n-p-1)/2}: the AM-GM
/// lower bound on log pi_SVS(M).
inline double svs_amgm_log_bound(const Matrix& m) {
  const double p = static_cast<double>(m.cols()), e = p * (static_cast<double>(m.rows()) - p - 1.0);
  return 0.5 * e * std::log(p) - e * std::log(m.norm());
}

/// A_{n,p} E[(||Y|| + ||Z||)^{-p(n-p-1)}] on the same stream that
/// marginal_density_mc(svs, Y, n, seed) uses; a lower bound for m_SVS(Y).
inline MarginalEstimate svs_marginal_lower_bound_mc(const Matrix& y, long n_samples, RngSeed seed) {
  auto eng = make_engine(seed, StreamRole::inner);
  const double p = static_cast<double>(y.cols()), e = p * (static_cast<double>(y.rows()) - p - 1.0);
  const double log_a = 0.5 * e * std::log(p), ny = y.norm();
  Matrix z(y.rows(), y.cols());
  std::vector<double> logs(static_cast<std::size_t>(n_samples));
  for (auto& v : logs) {
    fill_standard_normal(z, eng);
    v = log_a - e * std::log(ny + z.norm());
  }
  return detail::log_mean_exp(logs);
}

////////////////////////////////////////////////////////////////
// Brown's integral test

struct UnderlineM {
  double log_value = 0.0;  // log of the sphere average of 1 / m_pi
  double log_std_error = 0.0;
};

/// Average of 1 / m_pi(Y) over n_sphere points uniform on the Frobenius
/// sphere of radius r, each m_pi from n_inner Monte Carlo draws.
inline UnderlineM log_brown_underline_m(const PriorModel& prior, double r, long n_sphere, long n_inner, RngSeed seed,
                                        int threads = 1) {
  if (!(r > 0.0)) throw Error("brown_underline_m: r must be positive");
  if (n_sphere < 2) throw Error("brown_underline_m: need n_sphere >= 2");
  std::vector<double> neg_log_m(static_cast<std::size_t>(n_sphere));
  parallel_for(neg_log_m.size(), threads, [&](std::size_t k) {
    auto eng = make_engine(seed, StreamRole::sphere, {k});
    Matrix y(prior.rows(), prior.cols());
    fill_standard_normal(y, eng);
    y *= r / y.norm();
    const MarginalEstimate m = marginal_density_mc(prior, y, n_inner, derive_seed(seed, StreamRole::inner, {k}));
    if (!std::isfinite(m.log_value)) throw NumericError("brown_underline_m: nonpositive inner estimate");
    neg_log_m[k] = -m.log_value;
  });
  const MarginalEstimate avg = detail::log_mean_exp(neg_log_m);
  return {avg.log_value, avg.log_std_error};
}

inline double brown_underline_m(const PriorModel& prior, double r, long n_sphere, long n_inner, RngSeed seed,
                                int threads = 1) {
  return std::exp(log_brown_underline_m(prior, r, n_sphere, n_inner, seed, threads).log_value);
}

/// Growth exponent bound for underline m(r): 1/m_pi behaves at most like
/// 1/pi, a homogeneous function of this negative degree.
inline double brown_slope_bound(const PriorModel& prior) {
  const double n = static_cast<double>(prior.rows()), p = static_cast<double>(prior.cols());
  const double svs = prior.has_svs_factor() ? p * (n - p - 1.0) : 0.0;
  switch (prior.kind()) {
    case PriorKind::uniform:
    case PriorKind::svs:
      return svs;
    case PriorKind::msvs1:
    case PriorKind::frobenius_power:
      return svs + prior.gamma();
    case PriorKind::msvs2:
    case PriorKind::columnwise:
      return svs + std::accumulate(prior.gamma_vec().begin(), prior.gamma_vec().end(), 0.0);
  }
  return svs;
}

struct BrownTestReport {
  std::string prior;
  std::vector<double> r_grid;
  std::vector<double> log_underline_m;
  std::vector<double> log_underline_m_se;
  double fitted_slope = 0.0;
  double slope_bound = 0.0;
  bool verdict = false;              // fitted_slope <= slope_bound + slack
  double convergence_statistic = 0.0;  // 1 - np + fitted_slope
  bool integral_finite = false;      // convergence_statistic < -1
  std::string note;
};

inline constexpr double kBrownSlopeSlack = 0.5;

/// Least-squares slope of log underline m against log r and the
/// resulting convergence test for int r^{1-np} underline m(r) dr.
inline BrownTestReport brown_integral_test(const PriorModel& prior, const std::vector<double>& r_grid, long n_sphere,
                                           long n_inner, RngSeed seed, int threads = 1) {
  if (r_grid.size() < 2) throw Error("brown_integral_test: need at least two radii");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0)) throw Error("brown_integral_test: radii must be positive");
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) throw Error("brown_integral_test: radii must be increasing");
  }
  if (r_grid.back() / r_grid.front() < 10.0) throw Error("brown_integral_test: r_grid must span a decade");
  BrownTestReport rep;
  rep.prior = prior.name();
  rep.r_grid = r_grid;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const UnderlineM u = log_brown_underline_m(prior, r_grid[i], n_sphere, n_inner,
                                               derive_seed(seed, {static_cast<std::uint64_t>(i)}), threads);
    rep.log_underline_m.push_back(u.log_value);
    rep.log_underline_m_se.push_back(u.log_std_error);
  }
  const double k = static_cast<double>(r_grid.size());
  double xb = 0.0, yb = 0.0;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    xb += std::log(r_grid[i]) / k;
    yb += rep.log_underline_m[i] / k;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    const double dx = std::log(r_grid[i]) - xb;
    sxy += dx * (rep.log_underline_m[i] - yb);
    sxx += dx * dx;
  }
  rep.fitted_slope = sxy / sxx;
  rep.slope_bound = brown_slope_bound(prior);
  rep.verdict = rep.fitted_slope <= rep.slope_bound + kBrownSlopeSlack;
  rep.convergence_statistic = 1.0 - static_cast<double>(prior.rows() * prior.cols()) + rep.fitted_slope;
  rep.integral_finite = rep.convergence_statistic < -1.0;
  if (prior.kind() == PriorKind::uniform)
    rep.note = "flat prior: the integral converges for np > 2, but the inadmissibility condition concerns "
               "generalized Bayes estimators with a nonconstant prior; no conclusion is drawn";
  else if (rep.verdict && rep.integral_finite)
    rep.note = "integral finite: sufficient condition for inadmissibility holds";
  else if (!rep.verdict)
    rep.note = "fitted slope exceeds its bound; estimate unreliable, rerun with larger n_inner/n_sphere";
  else
    rep.note = "integral not shown finite; no conclusion";
  return rep;
}

////////////////////////////////////////////////////////////////
// minimaxity via superharmonicity

struct MinimaxityRow {
  std::size_t point = 0;
  double laplacian = 0.0;  // closed-form Laplacian of the density
  bool nonpositive = false;
};

struct MinimaxityReport {
  std::string prior;
  bool window_satisfied = false;
  std::string window;  // the parameter window, spelled out
  std::vector<MinimaxityRow> rows;
  bool all_nonpositive = true;
};

/// Parameter window for minimaxity by superharmonicity:
///   msvs1: p >= 2, p + 2 <= n < 2p + 2 - 2/p, 0 < gamma <= -np + 2p^2 + 2p - 2
///   msvs2: p >= 3, p + 2 <= n < 2p, 0 < gamma <= 2p - n (equal gamma_i)
inline bool minimaxity_window(const PriorModel& prior, std::string* description = nullptr) {
  const double n = static_cast<double>(prior.rows()), p = static_cast<double>(prior.cols());
  std::string desc;
  bool ok = false;
  if (prior.kind() == PriorKind::msvs1) {
    const double g = prior.gamma(), hi = -n * p + 2.0 * p * p + 2.0 * p - 2.0;
    ok = p >= 2 && p + 2 <= n && n < 2 * p + 2 - 2 / p && g > 0 && g <= hi;
    desc = "p>=2, p+2<=n<2p+2-2/p, 0<gamma<=" + detail::short_number(hi);
  } else if (prior.kind() == PriorKind::msvs2) {
    const double g = prior.common_gamma(), hi = 2.0 * p - n;
    ok = !std::isnan(g) && p >= 3 && p + 2 <= n && n < 2 * p && g > 0 && g <= hi;
    desc = "p>=3, p+2<=n<2p, 0<gamma_1=...=gamma_p<=" + detail::short_number(hi);
  } else {
    throw UnsupportedOperation("minimaxity_report: no superharmonicity window for prior '" + prior.name() + "'");
  }
  if (description) *description = desc;
  return ok;
}

inline MinimaxityReport minimaxity_report(const PriorModel& prior, const std::vector<Matrix>& points) {
  MinimaxityReport rep;
  rep.prior = prior.name();
  rep.window_satisfied = minimaxity_window(prior, &rep.window);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double lap = prior.laplacian_density_closed_form(points[i]);
    rep.rows.push_back({i, lap, lap <= 0.0});
    rep.all_nonpositive = rep.all_nonpositive && lap <= 0.0;
  }
  return rep;
}


////////////////////////////////////////////////////////////////
// derivative oracles

struct DerivativeCheck {
  double grad_rel_err = 0.0;       // max |analytic - FD| / max |analytic|
  double laplacian_rel_err = 0.0;  // |closed - FD| / max(|closed|, ||M||^-2), both as Laplacian pi / pi
  double laplacian_closed = 0.0;   // closed-form Laplacian pi / pi
  double laplacian_fd = 0.0;       // FD Laplacian log pi + ||FD grad log pi||^2
};

/// Analytic gradient and closed-form Laplacian against central
/// differences of the log density at a full-rank point. For SVS the closed
/// form is 0 and the error is the harmonicity residual |FD| ||M||^2.
inline DerivativeCheck check_derivatives(const PriorModel& prior, const Matrix& m) {
  const auto log_pi = [&prior](const Matrix& x) { return prior.log_density(x); };
  DerivativeCheck out;
  const Matrix g = prior.grad_log_density(m);
  const Matrix g_fd = gradient_finite_difference(log_pi, m);
  out.grad_rel_err = (g - g_fd).cwiseAbs().maxCoeff() / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  out.laplacian_fd = laplacian_log_finite_difference(log_pi, m) +
                     gradient_finite_difference(log_pi, m).squaredNorm();
  const double log_density = prior.log_density(m);
  out.laplacian_closed = prior.laplacian_density_closed_form(m) / std::exp(log_density);
  out.laplacian_rel_err =
      std::abs(out.laplacian_closed - out.laplacian_fd) / std::max(std::abs(out.laplacian_closed), 1.0 / m.squaredNorm());
  return out;
}

}  // namespace shrinklab

#endif  // SHRINKLAB_DIAGNOSTICS_HPP_
