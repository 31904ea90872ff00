#ifndef SHRINKLAB_BLOCKWISE_HPP_
#define SHRINKLAB_BLOCKWISE_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shrinklab/core.hpp"
#include "shrinklab/mcmc.hpp"
#include "shrinklab/risk.hpp"

namespace shrinklab {

/// Partition of a d-vector into consecutive blocks. Block b carries the
/// Stein exponent R_b = -(d_b - 2)_+.
class BlockStructure {
 public:
  explicit BlockStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw ShapeError("blocks: need at least one block");
    for (int s : sizes_)
      if (s < 1) throw ShapeError("blocks: sizes must be positive");
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int count() const { return static_cast<int>(sizes_.size()); }
  int dim() const {
    int d = 0;
    for (int s : sizes_) d += s;
    return d;
  }
  double exponent(int b) const { return -static_cast<double>(std::max(sizes_[static_cast<std::size_t>(b)] - 2, 0)); }
  double r_sharp() const {
    double r = 0.0;
    for (int b = 0; b < count(); ++b) r += exponent(b);
    return r;
  }
  /// R_# + d - 2, the James-Stein constant of the dominator and the
  /// optimal scalar-shrinkage exponent.
  double shrinkage_constant() const { return r_sharp() + dim() - 2.0; }
  bool admits_dominator() const { return r_sharp() > 2.0 - dim(); }

  int offset(int b) const {
    int o = 0;
    for (int i = 0; i < b; ++i) o += sizes_[static_cast<std::size_t>(i)];
    return o;
  }

 private:
  std::vector<int> sizes_;
};

enum class VectorPriorKind {
  bs,          // prod_b ||theta_b||^{R_b}
  mbs,         // bs * ||theta||^{-gamma}
  norm_power,  // ||theta||^{-gamma}, the scalar factor alone
};

class VectorPrior {
 public:
  VectorPrior(VectorPriorKind kind, BlockStructure blocks, double gamma = 0.0)
      : kind_(kind), blocks_(std::move(blocks)), gamma_(kind == VectorPriorKind::bs ? 0.0 : gamma) {
    if (!(gamma_ >= 0.0)) throw Error("vector prior: gamma must be nonnegative");
  }
  static VectorPrior bs(BlockStructure b) { return {VectorPriorKind::bs, std::move(b)}; }
  static VectorPrior mbs(BlockStructure b, double gamma) { return {VectorPriorKind::mbs, std::move(b), gamma}; }
  static VectorPrior norm_power(int d, double gamma) {
    return {VectorPriorKind::norm_power, BlockStructure({d}), gamma};
  }

  VectorPriorKind kind() const { return kind_; }
  const BlockStructure& blocks() const { return blocks_; }
  double gamma() const { return gamma_; }
  int dim() const { return blocks_.dim(); }
  std::string name() const {
    switch (kind_) {
      case VectorPriorKind::bs: return "bs";
      case VectorPriorKind::mbs: return "mbs";
      case VectorPriorKind::norm_power: return "norm_power";
    }
    return "?";
  }

  bool uses_blocks() const { return kind_ != VectorPriorKind::norm_power; }

  /// sum_b R_b log ||theta_b|| - gamma log ||theta||; +inf at a zero block
  /// with negative exponent or at theta = 0 with gamma > 0.
  double log_density(const Vector& theta) const {
    check(theta);
    constexpr double inf = std::numeric_limits<double>::infinity();
    double out = 0.0;
    if (uses_blocks()) {
      for (int b = 0; b < blocks_.count(); ++b) {
        const double rb = blocks_.exponent(b);
        if (rb == 0.0) continue;
        const double n2 = theta.segment(blocks_.offset(b), blocks_.sizes()[static_cast<std::size_t>(b)]).squaredNorm();
        if (n2 == 0.0) return inf;
        out += 0.5 * rb * std::log(n2);
      }
    }
    if (gamma_ != 0.0) {
      const double n2 = theta.squaredNorm();
      if (n2 == 0.0) return inf;
      out -= 0.5 * gamma_ * std::log(n2);
    }
    return out;
  }
  double operator()(const Matrix& theta) const { return log_density(theta.col(0)); }

  Vector grad_log_density(const Vector& theta) const {
    check(theta);
    Vector g = Vector::Zero(theta.size());
    if (uses_blocks()) {
      for (int b = 0; b < blocks_.count(); ++b) {
        const double rb = blocks_.exponent(b);
        if (rb == 0.0) continue;
        const int o = blocks_.offset(b), s = blocks_.sizes()[static_cast<std::size_t>(b)];
        const double n2 = theta.segment(o, s).squaredNorm();
        if (n2 == 0.0) throw NumericError("grad_log_density: zero block");
        g.segment(o, s) += (rb / n2) * theta.segment(o, s);
      }
    }
    if (gamma_ != 0.0) {
      const double n2 = theta.squaredNorm();
      if (n2 == 0.0) throw NumericError("grad_log_density: theta = 0");
      g -= (gamma_ / n2) * theta;
    }
    return g;
  }

  /// Laplacian of the log density: sum_b R_b (d_b - 2) / ||theta_b||^2 - gamma (d - 2) / ||theta||^2.
  double laplacian_log_density(const Vector& theta) const {
    check(theta);
    double out = 0.0;
    if (uses_blocks()) {
      for (int b = 0; b < blocks_.count(); ++b) {
        const double rb = blocks_.exponent(b);
        if (rb == 0.0) continue;
        const int o = blocks_.offset(b), s = blocks_.sizes()[static_cast<std::size_t>(b)];
        out += rb * (s - 2.0) / theta.segment(o, s).squaredNorm();
      }
    }
    if (gamma_ != 0.0) out -= gamma_ * (dim() - 2.0) / theta.squaredNorm();
    return out;
  }

 private:
  void check(const Vector& theta) const {
    if (theta.size() != dim())
      throw ShapeError("vector prior: expected length " + std::to_string(dim()) + ", got " +
                       std::to_string(theta.size()));
  }

  VectorPriorKind kind_;
  BlockStructure blocks_;
  double gamma_;
};

struct IntegrabilityCheck {
  bool ok = false;
  std::vector<double> margins;  // B (R_b + d_b) - gamma per block
};

/// 0 <= gamma < B (R_b + d_b) for every block.
inline IntegrabilityCheck mbs_integrability_check(const BlockStructure& blocks, double gamma) {
  IntegrabilityCheck out;
  out.ok = gamma >= 0.0;
  const double nb = static_cast<double>(blocks.count());
  for (int b = 0; b < blocks.count(); ++b) {
    const double m = nb * (blocks.exponent(b) + blocks.sizes()[static_cast<std::size_t>(b)]) - gamma;
    out.margins.push_back(m);
    out.ok = out.ok && m > 0.0;
  }
  return out;
}

inline Matrix as_column(const Vector& v) { return Matrix(v); }

/// Posterior mean of theta under a vector prior by random-walk MH, with
/// optional reweighting factors evaluated on the same chain.
inline ChainResult vector_posterior_mean(const Vector& y, SampleSize n_obs, const VectorPrior& prior,
                                         const MCMCConfig& cfg, const std::vector<VectorPrior>& reweight = {}) {
  if (prior.kind() == VectorPriorKind::mbs && !mbs_integrability_check(prior.blocks(), prior.gamma()).ok &&
      !cfg.allow_improper_marginal)
    throw Error("vector_posterior_mean: mbs gamma outside its proper-marginal window");
  std::vector<LogFactor> factors;
  for (const auto& f : reweight) factors.emplace_back([&f](const Matrix& m) { return f(m); });
  const Matrix ym = as_column(y);
  return run_random_walk_mh(ym, n_obs, [&prior](const Matrix& m) { return prior(m); }, cfg, ym, factors);
}

/// Theta estimate from BS-Bayes with the extra James-Stein type step
///   - (R_# + d - 2) / (N ||y||^2) y.
/// With every block of size <= 2 the BS prior is flat and its posterior
/// mean is y itself, so no chain is run.
inline Vector brown_dominator(const Vector& y, const BlockStructure& blocks, SampleSize n_obs, const MCMCConfig& cfg) {
  if (y.size() != blocks.dim()) throw ShapeError("brown_dominator: y length does not match blocks");
  if (!blocks.admits_dominator()) throw Error("brown_dominator: needs R_# > 2 - d");
  const double y2 = y.squaredNorm();
  if (y2 == 0.0) throw NumericError("brown_dominator: y = 0");
  Vector bs = y;
  if (blocks.r_sharp() != 0.0) bs = vector_posterior_mean(y, n_obs, VectorPrior::bs(blocks), cfg).posterior_mean.col(0);
  return bs - (blocks.shrinkage_constant() / (n_obs.value() * y2)) * y;
}

/// (dominator, BS-Bayes) from one chain, for paired risk comparisons.
inline EstimatorPair brown_dominator_pair(const BlockStructure& blocks, MCMCConfig cfg) {
  cfg.validate();
  return {"brown_dominator", "bs", [blocks, cfg](const Matrix& y, SampleSize n, RngSeed s) {
            MCMCConfig c = cfg;
            c.seed = s;
            Vector bs = y.col(0);
            if (blocks.r_sharp() != 0.0)
              bs = vector_posterior_mean(y.col(0), n, VectorPrior::bs(blocks), c).posterior_mean.col(0);
            const Vector dom = bs - (blocks.shrinkage_constant() / (n.value() * y.squaredNorm())) * y.col(0);
            return std::make_pair(as_column(dom), as_column(bs));
          }};
}

inline Estimator vector_bayes_estimator(VectorPrior prior, MCMCConfig cfg) {
  cfg.validate();
  std::string name = prior.name();
  return {std::move(name), [prior = std::move(prior), cfg](const Matrix& y, SampleSize n, RngSeed s) {
            MCMCConfig c = cfg;
            c.seed = s;
            return vector_posterior_mean(y.col(0), n, prior, c).posterior_mean;
          }};
}

/// (MBS-Bayes, BS-Bayes) from one BS chain reweighted by ||theta||^{-gamma}.
inline EstimatorPair mbs_shared_chain_pair(const BlockStructure& blocks, double gamma, MCMCConfig cfg) {
  cfg.validate();
  return {"mbs", "bs", [blocks, gamma, cfg](const Matrix& y, SampleSize n, RngSeed s) {
            MCMCConfig c = cfg;
            c.seed = s;
            ChainResult r =
                vector_posterior_mean(y.col(0), n, VectorPrior::bs(blocks), c, {VectorPrior::norm_power(blocks.dim(), gamma)});
            return std::make_pair(std::move(r.reweighted_means.front()), std::move(r.posterior_mean));
          }};
}

/// N^{-2} coefficient of risk(MBS) - risk(BS): gamma (gamma - 2(R_# + d - 2)) / ||theta||^2.
inline double asymptotic_difference_bs(const BlockStructure& blocks, double gamma, const Vector& theta) {
  if (theta.size() != blocks.dim()) throw ShapeError("asymptotic_difference_bs: theta length");
  const double t2 = theta.squaredNorm();
  if (t2 == 0.0) throw NumericError("asymptotic_difference_bs: theta = 0");
  return gamma * (gamma - 2.0 * blocks.shrinkage_constant()) / t2;
}

/// KL-risk counterpart: half the estimation coefficient.
inline double asymptotic_kl_difference_bs(const BlockStructure& blocks, double gamma, const Vector& theta) {
  return 0.5 * asymptotic_difference_bs(blocks, gamma, theta);
}

/// 0 < gamma < 2(R_# + d - 2), where the leading coefficient is negative.
/// The same window is used for the predictive side; no separate condition
/// is imposed there.
inline bool mbs_improvement_window(const BlockStructure& blocks, double gamma) {
  return gamma > 0.0 && gamma < 2.0 * blocks.shrinkage_constant();
}

inline double optimal_mbs_gamma(const BlockStructure& blocks) { return blocks.shrinkage_constant(); }

/// 2 grad log pi1 . grad log pi2 + ||grad log pi2||^2 + 2 Laplacian log pi2.
inline double asymptotic_difference_generic(const VectorPrior& prior1, const VectorPrior& factor2, const Vector& theta) {
  const Vector g1 = prior1.grad_log_density(theta), g2 = factor2.grad_log_density(theta);
  return 2.0 * g1.dot(g2) + g2.squaredNorm() + 2.0 * factor2.laplacian_log_density(theta);
}

}  // namespace shrinklab

#endif  // SHRINKLAB_BLOCKWISE_HPP_
