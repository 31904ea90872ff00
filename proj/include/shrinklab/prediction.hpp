#ifndef SHRINKLAB_PREDICTION_HPP_
#define SHRINKLAB_PREDICTION_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shrinklab/core.hpp"
#include "shrinklab/mcmc.hpp"
#include "shrinklab/parallel.hpp"
#include "shrinklab/priors.hpp"
#include "shrinklab/risk.hpp"

namespace shrinklab {

/// log of the average of p(Ytilde | M_s) over posterior samples, for a
/// future observation with unit variance.
inline double log_predictive_density(const Matrix& y_future, std::span<const Matrix> samples) {
  if (samples.empty()) throw Error("log_predictive_density: no posterior samples");
  const SampleSize unit(1.0);
  std::vector<double> ll(samples.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    ll[s] = log_likelihood(y_future, samples[s], unit);
    mx = std::max(mx, ll[s]);
  }
  double acc = 0.0;
  for (double v : ll) acc += std::exp(v - mx);
  return mx + std::log(acc / static_cast<double>(samples.size()));
}

/// Differential entropy of N_{n,p}(M, I, I): np/2 log(2 pi e). The
/// expected log score of a predictive density is its KL risk plus this.
inline double gaussian_entropy(Eigen::Index n, Eigen::Index p) {
  return 0.5 * static_cast<double>(n * p) * (std::log(2.0 * std::numbers::pi) + 1.0);
}

/// KL risk of the flat-prior predictive N(Y, (1 + 1/N) I): np/2 log(1 + 1/N).
inline double uniform_kl_risk_closed_form(Eigen::Index n, Eigen::Index p, double n_obs) {
  return 0.5 * static_cast<double>(n * p) * std::log1p(1.0 / n_obs);
}

struct QuadratureRule {
  std::vector<double> nodes, weights;
};

/// Gauss-Legendre rule on [a, b] (Golub-Welsch).
inline QuadratureRule gauss_legendre(int k, double a, double b) {
  if (k < 1) throw Error("gauss_legendre: need at least one node");
  Matrix jac = Matrix::Zero(k, k);
  for (int i = 1; i < k; ++i) {
    const double beta = i / std::sqrt(4.0 * i * i - 1.0);
    jac(i, i - 1) = jac(i - 1, i) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jac);
  QuadratureRule out;
  for (int i = 0; i < k; ++i) {
    const double x = eig.eigenvalues()(i);
    const double w = 2.0 * eig.eigenvectors()(0, i) * eig.eigenvectors()(0, i);
    out.nodes.push_back(0.5 * (b - a) * x + 0.5 * (a + b));
    out.weights.push_back(0.5 * (b - a) * w);
  }
  return out;
}

struct PredictiveTask {
  Matrix m;            // true mean
  double n_obs = 1.0;  // Y has per-entry variance 1/N; the future draw has variance 1
  PriorModel prior;
  MCMCConfig chain_cfg;
  long n_future = 100;    // nested route only
  long n_obs_reps = 500;  // Y replicates
  int quadrature_nodes = 3;
  bool control_variate = false;
  int threads = 0;

  void validate() const {
    require_mean_matrix(m, "predictive task M");
    SampleSize{n_obs};
    if (prior.rows() != m.rows() || prior.cols() != m.cols()) throw ShapeError("predictive task: prior shape");
    chain_cfg.validate();
    if (n_future < 1) throw Error("predictive task: n_future must be positive");
    if (n_obs_reps < 2) throw Error("predictive task: n_obs_reps must be at least 2");
    if (quadrature_nodes < 1) throw Error("predictive task: quadrature_nodes must be positive");
  }
};

namespace detail {

// Chain settings at observation variance v, keeping the proposal scale
// relative to the posterior spread that the configured variance has at 1/N.
inline MCMCConfig chain_at_variance(const MCMCConfig& cfg, double v, double n_obs, RngSeed seed) {
  MCMCConfig c = cfg;
  c.proposal_variance = cfg.proposal_variance * v * n_obs;
  c.seed = seed;
  return c;
}

// Shared driver for the variance-integral route. `losses(y, n, seed)`
// returns one or two Frobenius losses at observation precision n.
template <class Losses>
std::vector<std::vector<double>> kl_integral_replicates(const Matrix& m, double n_obs, long n_reps, int nodes,
                                                        RngSeed seed, bool antithetic, int threads,
                                                        std::size_t n_out, const Losses& losses) {
  const double lo = std::log(1.0 / (n_obs + 1.0)), hi = std::log(1.0 / n_obs);
  const QuadratureRule rule = gauss_legendre(nodes, lo, hi);
  std::vector<std::vector<double>> out(n_out, std::vector<double>(static_cast<std::size_t>(n_reps), 0.0));
  parallel_for(static_cast<std::size_t>(n_reps), threads, [&](std::size_t r) {
    const long key = antithetic ? static_cast<long>(r) / 2 : static_cast<long>(r);
    const double sign = (antithetic && r % 2 == 1) ? -1.0 : 1.0;
    auto eng = make_engine(seed, StreamRole::observation, {static_cast<std::uint64_t>(key)});
    Matrix z(m.rows(), m.cols());
    fill_standard_normal(z, eng);
    z *= sign;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double v = std::exp(rule.nodes[k]);
      const Matrix y = m + std::sqrt(v) * z;
      const RngSeed chain = derive_seed(seed, StreamRole::chain, {static_cast<std::uint64_t>(key), k});
      const std::vector<double> l = losses(y, v, chain);
      for (std::size_t j = 0; j < n_out; ++j) out[j][r] += 0.5 * rule.weights[k] * l[j] / v;
    }
  });
  return out;
}

}  // namespace detail

/// KL risk E_Y D(p(. | M), p_pi(. | Y)) through the identity
///   KL = 1/2 int_{1/(N+1)}^{1/N} R(v) / v^2 dv,
/// where R(v) is the Frobenius risk of the Bayes estimator from an
/// observation with variance v. The integral is taken over log v by
/// Gauss-Legendre with the same noise Z at every node. Each replicate
/// value is an unbiased draw of the integrand sum, so the standard error
/// is an honest replicate standard error.
inline RiskEstimate kl_risk(const PredictiveTask& task, RngSeed seed) {
  task.validate();
  const auto vals = detail::kl_integral_replicates(
      task.m, task.n_obs, task.n_obs_reps, task.quadrature_nodes, seed, false, task.threads, 2,
      [&](const Matrix& y, double v, RngSeed chain) {
        const MCMCConfig c = detail::chain_at_variance(task.chain_cfg, v, task.n_obs, chain);
        const Matrix hat = posterior_mean_rwmh(y, SampleSize(1.0 / v), task.prior, c).posterior_mean;
        return std::vector<double>{frobenius_loss(hat, task.m), frobenius_loss(y, task.m)};
      });
  if (task.control_variate)
    return detail::summarize_controlled(vals[0], vals[1],
                                        uniform_kl_risk_closed_form(task.m.rows(), task.m.cols(), task.n_obs), false);
  return summarize(vals[0]);
}

/// KL risk by the direct nested Monte Carlo route: posterior samples give
/// log p_pi(Ytilde | Y) by log-mean-exp, averaged over n_future draws.
/// The log of a sample average is biased low, so this overstates the
/// risk; the bias grows with dimension and is visible at np = 30.
inline RiskEstimate kl_risk_nested(const PredictiveTask& task, RngSeed seed) {
  task.validate();
  const double np = static_cast<double>(task.m.size());
  const double expected_true_log = -0.5 * np * std::log(2.0 * std::numbers::pi) - 0.5 * np;
  std::vector<double> vals(static_cast<std::size_t>(task.n_obs_reps));
  const SampleSize n_obs(task.n_obs);
  parallel_for(vals.size(), task.threads, [&](std::size_t r) {
    const ReplicateDraw d = replicate_draw(task.m, n_obs, seed, static_cast<long>(r), false);
    MCMCConfig c = task.chain_cfg;
    c.seed = d.chain_seed;
    c.keep_samples = true;
    const ChainResult chain = posterior_mean_rwmh(d.y, n_obs, task.prior, c);
    auto eng = make_engine(seed, StreamRole::future, {static_cast<std::uint64_t>(r)});
    double acc = 0.0;
    Matrix yt(task.m.rows(), task.m.cols());
    for (long f = 0; f < task.n_future; ++f) {
      fill_standard_normal(yt, eng);
      yt += task.m;
      acc += log_predictive_density(yt, chain.retained_samples);
    }
    vals[r] = expected_true_log - acc / static_cast<double>(task.n_future);
  });
  return summarize(vals);
}

/// Paired KL-risk difference, Bayes(base * factor) minus Bayes(base)
/// predictive, from shared chains and antithetic noise on each node.
inline RiskEstimate paired_kl_difference(const PriorModel& base, const PriorModel& factor, const Matrix& m,
                                         double n_obs, long n_reps, const MCMCConfig& cfg, RngSeed seed,
                                         int nodes = 3, int threads = 0) {
  require_mean_matrix(m, "paired_kl_difference: M");
  detail::require_reps(n_reps, true);
  cfg.validate();
  const auto vals = detail::kl_integral_replicates(
      m, n_obs, n_reps, nodes, seed, true, threads, 1, [&](const Matrix& y, double v, RngSeed chain) {
        const MCMCConfig c = detail::chain_at_variance(cfg, v, n_obs, chain);
        const PriorModel f[] = {factor};
        const ChainResult res = posterior_mean_rwmh(y, SampleSize(1.0 / v), base, c, f);
        return std::vector<double>{frobenius_loss(res.reweighted_means.front(), m) -
                                   frobenius_loss(res.posterior_mean, m)};
      });
  return detail::summarize_replicates(vals[0], true);
}

/// Leading N^{-2} coefficient of the KL-risk difference: half the
/// estimation-side coefficient.
inline double asymptotic_kl_difference(const PriorModel& prior1, const PriorModel& factor2, const Matrix& m,
                                       bool allow_finite_difference = false) {
  return 0.5 * asymptotic_frobenius_difference(prior1, factor2, m, allow_finite_difference);
}

inline double svs_scalar_shrinkage_kl_limit(Eigen::Index p, double gamma, double trace_k) {
  return 0.5 * svs_scalar_shrinkage_limit(p, gamma, trace_k);
}

inline double svs_column_shrinkage_kl_limit(const std::vector<double>& gamma_vec, const Matrix& m) {
  return 0.5 * svs_column_shrinkage_limit(gamma_vec, m);
}

struct KlCurveSpec {
  Eigen::Index n = 0, p = 0;
  double n_obs = 1.0;
  GridSpec grid;
  std::vector<PriorModel> priors;
  MCMCConfig chain_cfg;
  long n_reps = 500;
  int quadrature_nodes = 3;
  bool control_variate = false;
  RngSeed seed{};
  int threads = 0;
};

/// Rows of KL risk per (grid value, prior). `log_score` adds the entropy
/// so that values are on the expected -log p_pi(Ytilde | Y) scale.
inline std::vector<RiskCurveRow> kl_risk_curve(const KlCurveSpec& spec, bool log_score = false) {
  spec.grid.validate(spec.p);
  std::vector<RiskCurveRow> rows;
  const double shift = log_score ? gaussian_entropy(spec.n, spec.p) : 0.0;
  for (double v : spec.grid.values) {
    const Matrix m = build_mean(spec.grid, v, spec.n, spec.p);
    for (const auto& prior : spec.priors) {
      PredictiveTask task{m, spec.n_obs, prior, spec.chain_cfg};
      task.n_obs_reps = spec.n_reps;
      task.quadrature_nodes = spec.quadrature_nodes;
      task.control_variate = spec.control_variate;
      task.threads = spec.threads;
      RiskEstimate r = kl_risk(task, spec.seed);
      r.mean += shift;
      rows.push_back({v, prior.name(), r, spec.seed.value});
    }
  }
  return rows;
}

}  // namespace shrinklab

#endif  // SHRINKLAB_PREDICTION_HPP_
