#ifndef SHRINKLAB_MCMC_HPP_
#define SHRINKLAB_MCMC_HPP_

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "shrinklab/core.hpp"
#include "shrinklab/estimators.hpp"
#include "shrinklab/priors.hpp"

namespace shrinklab {

enum class ChainInit { at_observation, at_em };

struct MCMCConfig {
  double proposal_variance = 0.1;  // per-entry variance of the Gaussian random-walk step
  long iterations = 200000;
  long burn_in = 20000;
  long thin = 10;
  RngSeed seed{};
  ChainInit init = ChainInit::at_observation;
  bool keep_samples = false;
  bool allow_improper_marginal = false;

  long retained_count() const { return thin > 0 ? (iterations - burn_in) / thin : 0; }

  void validate() const {
    if (!(proposal_variance > 0.0) || !std::isfinite(proposal_variance))
      throw Error("mcmc: proposal-variance must be positive");
    if (iterations <= 0) throw Error("mcmc: iters must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw Error("mcmc: need 0 <= burn-in < iters");
    if (thin <= 0) throw Error("mcmc: thin must be positive");
    if (retained_count() < 100)
      throw Error("mcmc: (iters - burn-in) / thin must be at least 100, got " + std::to_string(retained_count()));
  }
};

struct ChainResult {
  Matrix posterior_mean;
  double acceptance_rate = 0.0;
  Matrix mc_standard_error;  // batch-means standard error per entry
  long retained = 0;
  std::vector<Matrix> retained_samples;  // only with keep_samples
  // Self-normalized means under prior * exp(factor_k), one per reweighting factor.
  std::vector<Matrix> reweighted_means;
  std::vector<double> reweighted_ess;
  std::vector<std::string> warnings;
};

using LogFactor = std::function<double(const Matrix&)>;

namespace detail {

// Running self-normalized weighted mean with max-shifted log weights.
class WeightedMean {
 public:
  WeightedMean(Eigen::Index rows, Eigen::Index cols) : acc_(Matrix::Zero(rows, cols)) {}

  void add(double log_w, const Matrix& x) {
    if (!std::isfinite(log_w)) {
      if (log_w == -std::numeric_limits<double>::infinity()) return;
      throw NumericError("reweighting: non-finite log weight");
    }
    if (log_w > max_) {
      const double scale = std::exp(max_ - log_w);
      sum_ *= scale;
      sum2_ *= scale * scale;
      acc_ *= scale;
      max_ = log_w;
    }
    const double w = std::exp(log_w - max_);
    sum_ += w;
    sum2_ += w * w;
    acc_ += w * x;
  }

  Matrix mean() const {
    if (!(sum_ > 0.0)) throw NumericError("reweighting: all weights vanished");
    return acc_ / sum_;
  }
  double ess() const { return sum2_ > 0 ? sum_ * sum_ / sum2_ : 0.0; }

 private:
  Matrix acc_;
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0, sum2_ = 0.0;
};

}  // namespace detail

/// Random-walk Metropolis-Hastings on p(Y | M) pi(M). `log_prior` is any
/// callable Matrix -> double; proposals where it is not finite are
/// rejected. The result is the ergodic average of retained states.
template <class LogPrior>
ChainResult run_random_walk_mh(const Matrix& y, SampleSize n_obs, const LogPrior& log_prior,
                               const MCMCConfig& cfg, const Matrix& init,
                               std::span<const LogFactor> reweight = {}) {
  cfg.validate();
  require_same_shape(y, init, "mcmc init");
  const double prec = n_obs.value();
  const double step = std::sqrt(cfg.proposal_variance);
  auto eng = make_engine(cfg.seed, StreamRole::chain);

  Matrix cur = init;
  double cur_ll = -0.5 * prec * (y - cur).squaredNorm();
  double cur_lp = log_prior(cur);
  if (!std::isfinite(cur_ll) || !std::isfinite(cur_lp))
    throw NumericError("mcmc: initial state has non-finite target log-density");

  const long retained = cfg.retained_count();
  const long batch = std::max<long>(1, static_cast<long>(std::sqrt(static_cast<double>(retained))));
  const long n_batches = retained / batch;

  Matrix prop(y.rows(), y.cols()), noise(y.rows(), y.cols());
  Matrix total = Matrix::Zero(y.rows(), y.cols());
  Matrix batch_sum = Matrix::Zero(y.rows(), y.cols());
  Matrix bm_sum = Matrix::Zero(y.rows(), y.cols()), bm_sq = Matrix::Zero(y.rows(), y.cols());
  std::vector<detail::WeightedMean> weighted(reweight.size(), detail::WeightedMean(y.rows(), y.cols()));

  ChainResult out;
  if (cfg.keep_samples) out.retained_samples.reserve(static_cast<std::size_t>(retained));
  long accepted = 0, kept = 0, in_batch = 0, batches_done = 0;

  for (long it = 0; it < cfg.iterations; ++it) {
    fill_standard_normal(noise, eng);
    prop = cur + step * noise;
    const double lp = log_prior(prop);
    const double u = uniform01(eng);
    if (std::isfinite(lp)) {
      const double ll = -0.5 * prec * (y - prop).squaredNorm();
      const double log_ratio = ll + lp - cur_ll - cur_lp;
      if (std::isfinite(ll) && std::log(u) < log_ratio) {
        cur.swap(prop);
        cur_ll = ll;
        cur_lp = lp;
        ++accepted;
      }
    }
    if (it < cfg.burn_in || (it - cfg.burn_in) % cfg.thin != cfg.thin - 1) continue;
    if (kept >= retained) continue;
    ++kept;
    total += cur;
    if (cfg.keep_samples) out.retained_samples.push_back(cur);
    for (std::size_t k = 0; k < reweight.size(); ++k) weighted[k].add(reweight[k](cur), cur);
    if (batches_done < n_batches) {
      batch_sum += cur;
      if (++in_batch == batch) {
        const Matrix bmean = batch_sum / static_cast<double>(batch);
        bm_sum += bmean;
        bm_sq += bmean.cwiseProduct(bmean);
        batch_sum.setZero();
        in_batch = 0;
        ++batches_done;
      }
    }
  }

  out.retained = kept;
  out.posterior_mean = total / static_cast<double>(kept);
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.iterations);
  if (n_batches >= 2) {
    const double b = static_cast<double>(n_batches);
    const Matrix mean_b = bm_sum / b;
    Matrix var = (bm_sq - b * mean_b.cwiseProduct(mean_b)) / (b - 1.0);
    var = var.cwiseMax(0.0);
    out.mc_standard_error = (var / b).cwiseSqrt();
  } else {
    out.mc_standard_error = Matrix::Constant(y.rows(), y.cols(), std::numeric_limits<double>::infinity());
  }
  for (auto& w : weighted) {
    out.reweighted_means.push_back(w.mean());
    out.reweighted_ess.push_back(w.ess());
  }
  if (out.acceptance_rate < 0.01 || out.acceptance_rate > 0.99)
    out.warnings.push_back("mcmc: acceptance rate " + std::to_string(out.acceptance_rate) +
                           " outside [0.01, 0.99]; tune proposal-variance");
  return out;
}

inline Matrix chain_initial_state(const Matrix& y, SampleSize n_obs, ChainInit init) {
  if (init == ChainInit::at_em) return estimate(ClosedFormKind::em, y, n_obs);
  return y;
}

/// Generalized Bayes estimator (posterior mean) for `prior` by random-walk MH.
/// Optional `reweight` factor priors yield, from the same chain, the
/// posterior means under prior * factor.
inline ChainResult posterior_mean_rwmh(const Matrix& y, SampleSize n_obs, const PriorModel& prior,
                                       const MCMCConfig& cfg, std::span<const PriorModel> reweight = {}) {
  require_mean_matrix(y, "posterior_mean_rwmh");
  if (!prior.has_proper_marginal() && !cfg.allow_improper_marginal)
    throw Error("posterior_mean_rwmh: prior '" + prior.name() +
                "' violates its proper-marginal condition (set allow_improper_marginal to override)");
  std::vector<LogFactor> factors;
  for (const auto& f : reweight) factors.emplace_back([&f](const Matrix& m) { return f.log_density(m); });
  auto result = run_random_walk_mh(y, n_obs, prior, cfg, chain_initial_state(y, n_obs, cfg.init), factors);
  for (const auto& w : prior.warnings()) result.warnings.push_back(w);
  return result;
}

////////////////////////////////////////////////////////////////
// importance sampling oracle

struct ImportanceResult {
  Matrix mean;
  Matrix std_error;
  double ess = 0.0;
  long n_samples = 0;
};

/// E[M | Y] = E_W[(Y+W) pi(Y+W)] / E_W[pi(Y+W)], W ~ N(0, I_n, N^{-1} I_p),
/// estimated by self-normalized importance sampling.
template <class LogPrior>
ImportanceResult importance_sampling_posterior_mean(const Matrix& y, SampleSize n_obs, const LogPrior& log_prior,
                                                    long n_samples, RngSeed seed, double min_ess = 50.0) {
  if (n_samples <= 1) throw Error("importance sampling: need n_samples > 1");
  auto eng = make_engine(seed, StreamRole::importance);
  const double sd = std::sqrt(n_obs.noise_variance());
  const Eigen::Index r = y.rows(), c = y.cols();
  Matrix m(r, c);
  double max_lw = -std::numeric_limits<double>::infinity();
  double s0 = 0.0, s00 = 0.0;
  Matrix s1 = Matrix::Zero(r, c), s11 = Matrix::Zero(r, c), s21 = Matrix::Zero(r, c);
  for (long s = 0; s < n_samples; ++s) {
    fill_standard_normal(m, eng);
    m = y + sd * m;
    const double lw = log_prior(m);
    if (lw == -std::numeric_limits<double>::infinity()) continue;
    if (!std::isfinite(lw)) continue;  // measure-zero singular set
    if (lw > max_lw) {
      const double sc = std::exp(max_lw - lw);
      s0 *= sc;
      s1 *= sc;
      s00 *= sc * sc;
      s11 *= sc * sc;
      s21 *= sc * sc;
      max_lw = lw;
    }
    const double w = std::exp(lw - max_lw);
    s0 += w;
    s1 += w * m;
    s00 += w * w;
    s11 += (w * w) * m.cwiseProduct(m);
    s21 += (w * w) * m;
  }
  if (!(s0 > 0.0)) throw NumericError("importance sampling: all weights vanished");
  ImportanceResult out;
  out.n_samples = n_samples;
  out.mean = s1 / s0;
  out.ess = s0 * s0 / s00;
  // sum w^2 (m - mu)^2 / (sum w)^2
  Matrix num = s11 - 2.0 * out.mean.cwiseProduct(s21) + s00 * out.mean.cwiseProduct(out.mean);
  out.std_error = (num.cwiseMax(0.0) / (s0 * s0)).cwiseSqrt();
  if (out.ess < min_ess)
    throw NumericError("importance sampling: effective sample size " + std::to_string(out.ess) +
                       " below " + std::to_string(min_ess) + "; increase n_samples");
  return out;
}

inline ImportanceResult importance_sampling_posterior_mean(const Matrix& y, SampleSize n_obs,
                                                           const PriorModel& prior, long n_samples, RngSeed seed) {
  return importance_sampling_posterior_mean(y, n_obs, [&prior](const Matrix& m) { return prior.log_density(m); },
                                            n_samples, seed);
}

}  // namespace shrinklab

#endif  // SHRINKLAB_MCMC_HPP_
