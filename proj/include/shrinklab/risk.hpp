#ifndef SHRINKLAB_RISK_HPP_
#define SHRINKLAB_RISK_HPP_

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shrinklab/core.hpp"
#include "shrinklab/estimators.hpp"
#include "shrinklab/mcmc.hpp"
#include "shrinklab/parallel.hpp"
#include "shrinklab/priors.hpp"

namespace shrinklab {

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(n_reps)
  long n_reps = 0;
};

struct MatrixRiskEstimate {
  Matrix mean;
  Matrix std_error;
  long n_reps = 0;
};

inline RiskEstimate summarize(std::span<const double> values) {
  RiskEstimate out;
  out.n_reps = static_cast<long>(values.size());
  if (values.empty()) return out;
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
  }
  return out;
}

////////////////////////////////////////////////////////////////
// estimator handles

/// Anything that maps an observation to an estimate. `chain_seed` is the
/// replicate's derived seed; closed-form estimators ignore it.
struct Estimator {
  std::string name;
  std::function<Matrix(const Matrix& y, SampleSize n, RngSeed chain_seed)> fn;

  Matrix operator()(const Matrix& y, SampleSize n, RngSeed chain_seed) const { return fn(y, n, chain_seed); }
};

inline Estimator closed_form_estimator(ClosedFormKind kind) {
  return {to_string(kind), [kind](const Matrix& y, SampleSize n, RngSeed) { return estimate(kind, y, n); }};
}

inline Estimator bayes_estimator(PriorModel prior, MCMCConfig cfg, std::string name = {}) {
  if (name.empty()) name = prior.name();
  cfg.validate();
  return {std::move(name), [prior = std::move(prior), cfg](const Matrix& y, SampleSize n, RngSeed chain_seed) {
            MCMCConfig c = cfg;
            c.seed = chain_seed;
            return posterior_mean_rwmh(y, n, prior, c).posterior_mean;
          }};
}

/// Two estimators evaluated on the same observation and chain seed.
struct EstimatorPair {
  std::string name_a, name_b;
  std::function<std::pair<Matrix, Matrix>(const Matrix& y, SampleSize n, RngSeed chain_seed)> fn;
};

inline EstimatorPair pair_of(Estimator a, Estimator b) {
  std::string na = a.name, nb = b.name;
  return {std::move(na), std::move(nb), [a = std::move(a), b = std::move(b)](const Matrix& y, SampleSize n, RngSeed s) {
            return std::make_pair(a(y, n, s), b(y, n, s));
          }};
}

/// Bayes(base * factor) against Bayes(base) from one chain on the base
/// posterior: the first is the self-normalized reweighting of the same
/// retained states by the factor density. Both estimates then share every
/// source of Monte Carlo noise except the weights.
inline EstimatorPair shared_chain_pair(PriorModel base, PriorModel factor, MCMCConfig cfg) {
  cfg.validate();
  std::string na = base.name() + "*" + factor.name(), nb = base.name();
  return {std::move(na), std::move(nb),
          [base = std::move(base), factor = std::move(factor), cfg](const Matrix& y, SampleSize n, RngSeed s) {
            MCMCConfig c = cfg;
            c.seed = s;
            const PriorModel f[] = {factor};
            ChainResult r = posterior_mean_rwmh(y, n, base, c, f);
            return std::make_pair(std::move(r.reweighted_means.front()), std::move(r.posterior_mean));
          }};
}

////////////////////////////////////////////////////////////////
// replicate plumbing

struct ReplicateOptions {
  // Replicates 2k and 2k+1 use noise Z and -Z (same chain seed); the
  // standard error is then computed over pair averages.
  bool antithetic = false;
  // Regress the loss on the MLE loss ||Y - M||^2, whose mean np/N is
  // known, and report the adjusted mean. Unbiased up to O(1/n_reps).
  bool control_variate = false;
  int threads = 0;  // 0: default_thread_count()
};

struct ReplicateDraw {
  Matrix y;
  RngSeed chain_seed;
};

/// Observation and chain seed of replicate r. Noise depends only on
/// (seed, r), so every estimator and every grid point sees the same Z.
inline ReplicateDraw replicate_draw(const Matrix& m, SampleSize n_obs, RngSeed seed, long r, bool antithetic) {
  const long key = antithetic ? r / 2 : r;
  const double sign = (antithetic && (r % 2 == 1)) ? -1.0 : 1.0;
  auto eng = make_engine(seed, StreamRole::observation, {static_cast<std::uint64_t>(key)});
  Matrix z(m.rows(), m.cols());
  fill_standard_normal(z, eng);
  return {m + (sign * std::sqrt(n_obs.noise_variance())) * z,
          derive_seed(seed, StreamRole::chain, {static_cast<std::uint64_t>(key)})};
}

namespace detail {

inline void require_reps(long n_reps, bool antithetic) {
  if (n_reps < 2) throw Error("risk: n_reps must be at least 2");
  if (antithetic && n_reps % 2 != 0) throw Error("risk: antithetic replication needs an even n_reps");
}

inline std::vector<double> pair_average(const std::vector<double>& v) {
  std::vector<double> out(v.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = 0.5 * (v[2 * k] + v[2 * k + 1]);
  return out;
}

inline RiskEstimate summarize_replicates(const std::vector<double>& v, bool antithetic) {
  return antithetic ? summarize(pair_average(v)) : summarize(v);
}

// mean(v) - beta (mean(c) - c_mean) with the least-squares beta.
inline RiskEstimate summarize_controlled(std::vector<double> v, std::vector<double> c, double c_mean, bool antithetic) {
  if (antithetic) {
    v = pair_average(v);
    c = pair_average(c);
  }
  const double n = static_cast<double>(v.size());
  double vb = 0.0, cb = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    vb += v[i] / n;
    cb += c[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sxy += (v[i] - vb) * (c[i] - cb);
    sxx += (c[i] - cb) * (c[i] - cb);
  }
  const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
  std::vector<double> u(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) u[i] = v[i] - beta * (c[i] - c_mean);
  return summarize(u);
}

inline RiskEstimate summarize_losses(const std::vector<double>& loss, const std::vector<double>& mle_loss,
                                     double mle_risk, const ReplicateOptions& opts) {
  if (opts.control_variate) return summarize_controlled(loss, mle_loss, mle_risk, opts.antithetic);
  return summarize_replicates(loss, opts.antithetic);
}

}  // namespace detail

/// Estimates for every replicate, in replicate order.
inline std::vector<Matrix> replicate_estimates(const Estimator& est, const Matrix& m, SampleSize n_obs, long n_reps,
                                               RngSeed seed, const ReplicateOptions& opts = {}) {
  require_mean_matrix(m, "risk: M");
  detail::require_reps(n_reps, opts.antithetic);
  std::vector<Matrix> out(static_cast<std::size_t>(n_reps));
  parallel_for(out.size(), opts.threads, [&](std::size_t r) {
    const ReplicateDraw d = replicate_draw(m, n_obs, seed, static_cast<long>(r), opts.antithetic);
    out[r] = est(d.y, n_obs, d.chain_seed);
  });
  return out;
}

inline RiskEstimate frobenius_risk(const Estimator& est, const Matrix& m, SampleSize n_obs, long n_reps, RngSeed seed,
                                   const ReplicateOptions& opts = {}) {
  const auto hats = replicate_estimates(est, m, n_obs, n_reps, seed, opts);
  std::vector<double> losses(hats.size()), mle(hats.size());
  for (std::size_t r = 0; r < hats.size(); ++r) {
    losses[r] = frobenius_loss(hats[r], m);
    if (opts.control_variate)
      mle[r] = frobenius_loss(replicate_draw(m, n_obs, seed, static_cast<long>(r), opts.antithetic).y, m);
  }
  return detail::summarize_losses(losses, mle, static_cast<double>(m.size()) / n_obs.value(), opts);
}

inline MatrixRiskEstimate matrix_quadratic_risk(const Estimator& est, const Matrix& m, SampleSize n_obs, long n_reps,
                                                RngSeed seed, const ReplicateOptions& opts = {}) {
  const auto hats = replicate_estimates(est, m, n_obs, n_reps, seed, opts);
  const Eigen::Index p = m.cols();
  MatrixRiskEstimate out{Matrix::Zero(p, p), Matrix::Zero(p, p), 0};
  std::vector<Matrix> losses(hats.size());
  for (std::size_t r = 0; r < hats.size(); ++r) losses[r] = matrix_quadratic_loss(hats[r], m);
  std::vector<double> entry(losses.size());
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      for (std::size_t r = 0; r < losses.size(); ++r) entry[r] = losses[r](i, j);
      const RiskEstimate e = detail::summarize_replicates(entry, opts.antithetic);
      out.mean(i, j) = e.mean;
      out.std_error(i, j) = e.std_error;
      out.n_reps = e.n_reps;
    }
  return out;
}

/// Mean and standard error of loss(A) - loss(B) on identical replicates.
inline RiskEstimate paired_risk_difference(const EstimatorPair& pair, const Matrix& m, SampleSize n_obs, long n_reps,
                                           RngSeed seed, const ReplicateOptions& opts = {}) {
  require_mean_matrix(m, "risk: M");
  detail::require_reps(n_reps, opts.antithetic);
  std::vector<double> diff(static_cast<std::size_t>(n_reps));
  parallel_for(diff.size(), opts.threads, [&](std::size_t r) {
    const ReplicateDraw d = replicate_draw(m, n_obs, seed, static_cast<long>(r), opts.antithetic);
    const auto [a, b] = pair.fn(d.y, n_obs, d.chain_seed);
    diff[r] = frobenius_loss(a, m) - frobenius_loss(b, m);
  });
  return detail::summarize_replicates(diff, opts.antithetic);
}

inline RiskEstimate paired_risk_difference(const Estimator& a, const Estimator& b, const Matrix& m, SampleSize n_obs,
                                           long n_reps, RngSeed seed, const ReplicateOptions& opts = {}) {
  return paired_risk_difference(pair_of(a, b), m, n_obs, n_reps, seed, opts);
}

////////////////////////////////////////////////////////////////
// asymptotic risk differences, Bayes(pi1 * pi2) minus Bayes(pi1), in units of N^{-2}

namespace detail {

inline void require_factor_shapes(const PriorModel& prior1, const PriorModel& factor2, const Matrix& m) {
  if (prior1.rows() != m.rows() || prior1.cols() != m.cols() || factor2.rows() != m.rows() ||
      factor2.cols() != m.cols())
    throw ShapeError("asymptotic difference: prior shapes must match M");
}

}  // namespace detail

/// 2 G1^T G2 + G2^T G2 + 2 L2 with G the matrix gradients of the log
/// priors and L2 the matrix Laplacian of log pi2, symmetrized in the
/// cross term. Needs a closed-form matrix Laplacian for factor2.
inline Matrix asymptotic_matrix_difference(const PriorModel& prior1, const PriorModel& factor2, const Matrix& m) {
  detail::require_factor_shapes(prior1, factor2, m);
  Matrix lap;
  try {
    lap = factor2.matrix_laplacian_log(m);
  } catch (const UnsupportedOperation& e) {
    throw UnsupportedOperation(std::string("asymptotic_matrix_difference: missing matrix Laplacian of factor2: ") +
                               e.what());
  }
  const Matrix g1 = prior1.grad_log_density(m);
  const Matrix g2 = factor2.grad_log_density(m);
  const Matrix cross = g1.transpose() * g2;
  return cross + cross.transpose() + g2.transpose() * g2 + 2.0 * lap;
}

/// Trace of the above. Without a closed-form Laplacian the trace may be
/// taken by finite differences when `allow_finite_difference` is set.
inline double asymptotic_frobenius_difference(const PriorModel& prior1, const PriorModel& factor2, const Matrix& m,
                                              bool allow_finite_difference = false) {
  detail::require_factor_shapes(prior1, factor2, m);
  const Matrix g1 = prior1.grad_log_density(m);
  const Matrix g2 = factor2.grad_log_density(m);
  double lap;
  try {
    lap = factor2.matrix_laplacian_log(m).trace();
  } catch (const UnsupportedOperation& e) {
    if (!allow_finite_difference)
      throw UnsupportedOperation(std::string("asymptotic_frobenius_difference: missing Laplacian of factor2 (") +
                                 e.what() + ")");
    lap = laplacian_log_finite_difference([&factor2](const Matrix& x) { return factor2.log_density(x); }, m);
  }
  return 2.0 * (g1.array() * g2.array()).sum() + g2.squaredNorm() + 2.0 * lap;
}

/// SVS times ||M||_F^{-gamma}: gamma (gamma - 2p^2 - 2p + 4) / tr(M^T M).
inline double svs_scalar_shrinkage_limit(Eigen::Index p, double gamma, double trace_k) {
  if (!(trace_k > 0.0)) throw NumericError("svs_scalar_shrinkage_limit: tr(M^T M) must be positive");
  const double pd = static_cast<double>(p);
  return gamma * (gamma - 2.0 * pd * pd - 2.0 * pd + 4.0) / trace_k;
}

/// Matrix form: gamma tr(K)^{-2} (-2(p+1) tr(K) I + (gamma + 4) K).
inline Matrix svs_scalar_shrinkage_matrix_limit(double gamma, const Matrix& gram) {
  const double tr = gram.trace();
  if (!(tr > 0.0)) throw NumericError("svs_scalar_shrinkage_matrix_limit: tr(K) must be positive");
  const Eigen::Index p = gram.rows();
  return gamma / (tr * tr) *
         (-2.0 * static_cast<double>(p + 1) * tr * Matrix::Identity(p, p) + (gamma + 4.0) * gram);
}

/// SVS times prod_i ||M_.i||^{-gamma_i}: sum_i gamma_i (gamma_i - 2p + 2) / ||M_.i||^2.
inline double svs_column_shrinkage_limit(const std::vector<double>& gamma_vec, const Matrix& m) {
  if (gamma_vec.size() != static_cast<std::size_t>(m.cols())) throw ShapeError("gamma_vec must have length p");
  const double pd = static_cast<double>(m.cols());
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    const double c2 = m.col(i).squaredNorm();
    if (c2 == 0.0) throw NumericError("svs_column_shrinkage_limit: zero column");
    const double g = gamma_vec[static_cast<std::size_t>(i)];
    s += g * (g - 2.0 * pd + 2.0) / c2;
  }
  return s;
}

/// Matrix form: -2(p-1) D + D M^T M D, D = diag(gamma_i / ||M_.i||^2).
inline Matrix svs_column_shrinkage_matrix_limit(const std::vector<double>& gamma_vec, const Matrix& m) {
  const Eigen::Index p = m.cols();
  if (gamma_vec.size() != static_cast<std::size_t>(p)) throw ShapeError("gamma_vec must have length p");
  Matrix d = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double c2 = m.col(i).squaredNorm();
    if (c2 == 0.0) throw NumericError("svs_column_shrinkage_matrix_limit: zero column");
    d(i, i) = gamma_vec[static_cast<std::size_t>(i)] / c2;
  }
  return -2.0 * static_cast<double>(p - 1) * d + d * (m.transpose() * m) * d;
}

struct AsymptoticCheck {
  double n_obs = 0.0;
  RiskEstimate raw;         // loss(Bayes(pi1 pi2)) - loss(Bayes(pi1))
  double scaled_mean = 0.0;  // N^2 * raw.mean
  double scaled_std_error = 0.0;
  double limit = 0.0;  // asymptotic_frobenius_difference at M
};

/// Simulated N^2 x risk difference between Bayes(base * factor) and
/// Bayes(base), using the shared-chain pair and antithetic replicates.
inline AsymptoticCheck asymptotic_check(const PriorModel& base, const PriorModel& factor, const Matrix& m,
                                        SampleSize n_obs, long n_reps, const MCMCConfig& cfg, RngSeed seed,
                                        int threads = 0) {
  AsymptoticCheck out;
  out.n_obs = n_obs.value();
  out.limit = asymptotic_frobenius_difference(base, factor, m, true);
  ReplicateOptions opts;
  opts.antithetic = true;
  opts.threads = threads;
  out.raw = paired_risk_difference(shared_chain_pair(base, factor, cfg), m, n_obs, n_reps, seed, opts);
  const double n2 = out.n_obs * out.n_obs;
  out.scaled_mean = n2 * out.raw.mean;
  out.scaled_std_error = n2 * out.raw.std_error;
  return out;
}

////////////////////////////////////////////////////////////////
// risk curves

enum class GridAxis { sigma1, sigma2 };
enum class MeanConstruction { padded_diagonal, haar_rotated };

struct GridSpec {
  GridAxis axis = GridAxis::sigma1;
  std::vector<double> values;
  std::vector<double> fixed_sigmas;  // the other p - 1 singular values, in order
  MeanConstruction construction = MeanConstruction::padded_diagonal;
  RngSeed haar_seed{};

  void validate(Eigen::Index p) const {
    if (values.empty()) throw Error("grid: no values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0) || !std::isfinite(values[i])) throw Error("grid: values must be nonnegative");
      if (i > 0 && !(values[i] > values[i - 1])) throw Error("grid: values must be increasing");
    }
    if (fixed_sigmas.size() != static_cast<std::size_t>(p - 1))
      throw Error("grid: fixed_sigmas needs p - 1 = " + std::to_string(p - 1) + " entries");
    if (axis == GridAxis::sigma2 && p < 2) throw Error("grid: sigma2 axis needs p >= 2");
    for (double s : fixed_sigmas)
      if (!(s >= 0.0)) throw Error("grid: fixed_sigmas must be nonnegative");
  }

  Vector sigmas_at(double value, Eigen::Index p) const {
    Vector s(p);
    const Eigen::Index at = axis == GridAxis::sigma1 ? 0 : 1;
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < p; ++i) s(i) = (i == at) ? value : fixed_sigmas[static_cast<std::size_t>(k++)];
    return s;
  }
};

/// [diag(sigma); 0] or U diag(sigma) with a seeded Haar U.
inline Matrix build_mean(const GridSpec& grid, double value, Eigen::Index n, Eigen::Index p) {
  grid.validate(p);
  const Vector s = grid.sigmas_at(value, p);
  if (grid.construction == MeanConstruction::padded_diagonal) {
    Matrix m = Matrix::Zero(n, p);
    m.topRows(p) = s.asDiagonal();
    return m;
  }
  auto eng = make_engine(grid.haar_seed, StreamRole::haar);
  return haar_column_orthonormal(n, p, eng) * s.asDiagonal();
}

struct RiskCurveRow {
  double axis_value = 0.0;
  std::string estimator;
  RiskEstimate risk;
  std::uint64_t seed = 0;
};

struct RiskCurveSpec {
  Eigen::Index n = 0, p = 0;
  double n_obs = 1.0;
  GridSpec grid;
  std::vector<Estimator> estimators;
  long n_reps = 1000;
  RngSeed seed{};
  ReplicateOptions opts;
};

/// One row per (grid value, estimator), grid-major. Replicate r uses the
/// same noise at every grid point and for every estimator.
inline std::vector<RiskCurveRow> risk_curve(const RiskCurveSpec& spec) {
  spec.grid.validate(spec.p);
  detail::require_reps(spec.n_reps, spec.opts.antithetic);
  if (spec.estimators.empty()) throw Error("risk_curve: no estimators");
  const SampleSize n_obs(spec.n_obs);
  const std::size_t n_grid = spec.grid.values.size(), n_est = spec.estimators.size();
  const std::size_t reps = static_cast<std::size_t>(spec.n_reps);
  std::vector<Matrix> means;
  for (double v : spec.grid.values) means.push_back(build_mean(spec.grid, v, spec.n, spec.p));

  std::vector<double> losses(n_grid * n_est * reps), mle(n_grid * reps);
  parallel_for(losses.size(), spec.opts.threads, [&](std::size_t task) {
    const std::size_t r = task % reps, e = (task / reps) % n_est, g = task / (reps * n_est);
    const ReplicateDraw d = replicate_draw(means[g], n_obs, spec.seed, static_cast<long>(r), spec.opts.antithetic);
    losses[task] = frobenius_loss(spec.estimators[e](d.y, n_obs, d.chain_seed), means[g]);
    if (e == 0) mle[g * reps + r] = frobenius_loss(d.y, means[g]);
  });
  const double mle_risk = static_cast<double>(spec.n * spec.p) / spec.n_obs;

  std::vector<RiskCurveRow> rows;
  for (std::size_t g = 0; g < n_grid; ++g)
    for (std::size_t e = 0; e < n_est; ++e) {
      const auto first = losses.begin() + static_cast<std::ptrdiff_t>((g * n_est + e) * reps);
      const auto cfirst = mle.begin() + static_cast<std::ptrdiff_t>(g * reps);
      std::vector<double> v(first, first + static_cast<std::ptrdiff_t>(reps));
      std::vector<double> c(cfirst, cfirst + static_cast<std::ptrdiff_t>(reps));
      rows.push_back({spec.grid.values[g], spec.estimators[e].name, detail::summarize_losses(v, c, mle_risk, spec.opts),
                      spec.seed.value});
    }
  return rows;
}

}  // namespace shrinklab

#endif  // SHRINKLAB_RISK_HPP_
