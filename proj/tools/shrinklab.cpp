// Batch experiment runner. Each subcommand reads a flat key = value config,
// validates every key before computing, and writes a CSV atomically with a
// .meta.json sidecar. Exit codes: 0 ok, 2 config error, 3 numeric failure.

#include <unistd.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shrinklab/blockwise.hpp"
#include "shrinklab/config.hpp"
#include "shrinklab/diagnostics.hpp"
#include "shrinklab/prediction.hpp"
#include "shrinklab/risk.hpp"

namespace sl = shrinklab;
using nlohmann::json;

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> messages;  // printed to stdout
  json extra = json::object();        // merged into the sidecar
};

std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}
std::string num(long x) { return std::to_string(x); }
std::string num(std::uint64_t x) { return std::to_string(x); }
std::string flag(bool b) { return b ? "true" : "false"; }

std::string to_csv(const Table& t) {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

// Write to a temp file in the target directory, then rename over the target.
void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw sl::ConfigError("cannot write output '" + path + "'");
    out << content;
    out.close();
    if (!out) {
      std::remove(tmp.c_str());
      throw sl::Error("write failed for '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw sl::Error("rename failed for '" + path + "': " + ec.message());
  }
}

////////////////////////////////////////////////////////////////
// config interpretation

struct Shape {
  Eigen::Index n = 0, p = 0;
};

Shape read_shape(const sl::ConfigTable& t) {
  const long n = t.integer("n"), p = t.integer("p");
  if (p < 1 || n < p) throw sl::ConfigError("shape: need n >= p >= 1");
  return {n, p};
}

double read_n_obs(const sl::ConfigTable& t) {
  const double n_obs = t.number("N", 1.0);
  if (!(n_obs > 0.0)) throw sl::ConfigError("key 'N': must be positive");
  return n_obs;
}

int read_threads(const sl::ConfigTable& t) {
  if (std::getenv("SHRINKLAB_THREADS")) return sl::default_thread_count();
  const long th = t.integer("threads", 0);
  if (th < 0) throw sl::ConfigError("key 'threads': must be nonnegative");
  return th == 0 ? sl::default_thread_count() : static_cast<int>(th);
}

long read_reps(const sl::ConfigTable& t, long fallback) {
  const long r = t.integer("n_reps", fallback);
  if (r < 2) throw sl::ConfigError("key 'n_reps': need at least 2");
  return r;
}

sl::MCMCConfig read_mcmc(const sl::ConfigTable& t) {
  sl::MCMCConfig c;
  c.proposal_variance = t.number("proposal-variance", c.proposal_variance);
  c.iterations = t.integer("iters", c.iterations);
  c.burn_in = t.integer("burn-in", c.burn_in);
  c.thin = t.integer("thin", c.thin);
  const std::string init = t.string("init", "observation");
  if (init == "observation")
    c.init = sl::ChainInit::at_observation;
  else if (init == "em")
    c.init = sl::ChainInit::at_em;
  else
    throw sl::ConfigError("key 'init': expected \"observation\" or \"em\"");
  c.allow_improper_marginal = t.boolean("allow_improper_marginal", false);
  try {
    c.validate();
  } catch (const sl::Error& e) {
    throw sl::ConfigError(e.what());
  }
  return c;
}

std::vector<double> read_gamma_vec(const sl::ConfigTable& t, const std::string& key, Shape s,
                                   std::vector<double> fallback) {
  std::vector<double> g = t.numbers(key, std::move(fallback));
  if (g.size() == 1 && s.p > 1) g.assign(static_cast<std::size_t>(s.p), g.front());
  if (g.size() != static_cast<std::size_t>(s.p))
    throw sl::ConfigError("key '" + key + "': needs 1 or p = " + std::to_string(s.p) + " entries");
  return g;
}

// Prior by name; parameters come from keys prefixed with the name.
sl::PriorModel read_prior(const sl::ConfigTable& t, const std::string& name, Shape s) {
  const double p = static_cast<double>(s.p);
  if (name == "svs") return sl::PriorModel::svs(s.n, s.p);
  if (name == "msvs1") return sl::PriorModel::msvs1(s.n, s.p, t.number("msvs1.gamma", p * p + p - 2.0));
  if (name == "msvs2") return sl::PriorModel::msvs2(s.n, s.p, read_gamma_vec(t, "msvs2.gamma_vec", s, {p - 1.0}));
  if (name == "stein") return sl::PriorModel::stein(s.n, s.p);
  if (name == "uniform") return sl::PriorModel::uniform(s.n, s.p);
  if (name == "frobenius_power")
    return sl::PriorModel::frobenius_power(s.n, s.p, t.number("frobenius_power.gamma"));
  if (name == "columnwise") return sl::PriorModel::columnwise(s.n, s.p, read_gamma_vec(t, "columnwise.gamma_vec", s, {}));
  throw sl::ConfigError("unknown prior '" + name +
                        "' (expected svs, msvs1, msvs2, stein, uniform, frobenius_power, columnwise)");
}

sl::PriorModel read_checked_prior(const sl::ConfigTable& t, const std::string& name, Shape s) {
  try {
    sl::PriorModel pr = read_prior(t, name, s);
    for (const auto& w : pr.warnings()) std::cerr << "warning: " << w << "\n";
    return pr;
  } catch (const sl::ConfigError&) {
    throw;
  } catch (const sl::Error& e) {
    throw sl::ConfigError(std::string("prior '") + name + "': " + e.what());
  }
}

sl::GridSpec read_grid(const sl::ConfigTable& t, Shape s) {
  sl::GridSpec g;
  const std::string axis = t.string("grid.axis", "sigma1");
  if (axis == "sigma1")
    g.axis = sl::GridAxis::sigma1;
  else if (axis == "sigma2")
    g.axis = sl::GridAxis::sigma2;
  else
    throw sl::ConfigError("key 'grid.axis': expected \"sigma1\" or \"sigma2\"");
  g.values = t.numbers("grid.values");
  g.fixed_sigmas = t.numbers("grid.fixed_sigmas", std::vector<double>(static_cast<std::size_t>(s.p - 1), 0.0));
  const std::string cons = t.string("grid.construction", "padded");
  if (cons == "padded")
    g.construction = sl::MeanConstruction::padded_diagonal;
  else if (cons == "haar")
    g.construction = sl::MeanConstruction::haar_rotated;
  else
    throw sl::ConfigError("key 'grid.construction': expected \"padded\" or \"haar\"");
  if (g.construction == sl::MeanConstruction::haar_rotated) g.haar_seed = {t.seed("grid.haar_seed", 0)};
  try {
    g.validate(s.p);
  } catch (const sl::Error& e) {
    throw sl::ConfigError(e.what());
  }
  return g;
}

// Mean matrix from its singular values: padded diagonal or seeded Haar frame.
sl::Matrix read_mean(const sl::ConfigTable& t, Shape s) {
  const std::vector<double> sig = t.numbers("mean.sigmas");
  if (sig.size() != static_cast<std::size_t>(s.p)) throw sl::ConfigError("key 'mean.sigmas': needs p entries");
  sl::GridSpec g;
  g.values = {sig.front()};
  g.fixed_sigmas.assign(sig.begin() + 1, sig.end());
  const std::string cons = t.string("mean.construction", "padded");
  if (cons == "haar") {
    g.construction = sl::MeanConstruction::haar_rotated;
    g.haar_seed = {t.seed("mean.haar_seed", 0)};
  } else if (cons != "padded") {
    throw sl::ConfigError("key 'mean.construction': expected \"padded\" or \"haar\"");
  }
  for (double x : sig)
    if (!(x >= 0.0)) throw sl::ConfigError("key 'mean.sigmas': must be nonnegative");
  return sl::build_mean(g, sig.front(), s.n, s.p);
}

std::vector<int> parse_blocks(const std::vector<double>& v) {
  std::vector<int> out;
  for (double x : v) {
    if (x != std::floor(x) || x < 1) throw sl::ConfigError("key 'blocks': sizes must be positive integers");
    out.push_back(static_cast<int>(x));
  }
  if (out.empty()) throw sl::ConfigError("key 'blocks': empty");
  return out;
}

using Job = std::function<Table()>;

////////////////////////////////////////////////////////////////
// subcommands: each reads its keys and returns the computation

const std::vector<std::string> kCurveHeader = {"axis_value", "estimator", "mean", "std_error", "n_reps", "seed"};

Table curve_table(const std::vector<sl::RiskCurveRow>& rows) {
  Table out;
  out.header = kCurveHeader;
  for (const auto& r : rows)
    out.rows.push_back({num(r.axis_value), r.estimator, num(r.risk.mean), num(r.risk.std_error), num(r.risk.n_reps),
                        num(r.seed)});
  return out;
}

Job plan_risk_curve(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  sl::RiskCurveSpec spec;
  spec.n = s.n;
  spec.p = s.p;
  spec.n_obs = read_n_obs(t);
  spec.grid = read_grid(t, s);
  spec.n_reps = read_reps(t, 500);
  spec.seed = {t.seed("seed", 0)};
  spec.opts.antithetic = t.boolean("antithetic", false);
  spec.opts.control_variate = t.boolean("control_variate", false);
  spec.opts.threads = read_threads(t);
  if (spec.opts.antithetic && spec.n_reps % 2) throw sl::ConfigError("key 'n_reps': must be even with antithetic");
  const sl::MCMCConfig cfg = read_mcmc(t);
  for (const auto& name : t.strings("estimators")) {
    if (name == "mle")
      spec.estimators.push_back(sl::closed_form_estimator(sl::ClosedFormKind::mle));
    else if (name == "em")
      spec.estimators.push_back(sl::closed_form_estimator(sl::ClosedFormKind::em));
    else if (name == "mem")
      spec.estimators.push_back(sl::closed_form_estimator(sl::ClosedFormKind::mem));
    else if (name == "js" || name == "james_stein")
      spec.estimators.push_back(sl::closed_form_estimator(sl::ClosedFormKind::james_stein));
    else
      spec.estimators.push_back(sl::bayes_estimator(read_checked_prior(t, name, s), cfg));
  }
  if (spec.estimators.empty()) throw sl::ConfigError("key 'estimators': empty");
  return [spec] { return curve_table(sl::risk_curve(spec)); };
}

Job plan_kl_risk_curve(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  sl::KlCurveSpec spec;
  spec.n = s.n;
  spec.p = s.p;
  spec.n_obs = read_n_obs(t);
  spec.grid = read_grid(t, s);
  spec.n_reps = read_reps(t, 100);
  spec.seed = {t.seed("seed", 0)};
  spec.quadrature_nodes = static_cast<int>(t.integer("quadrature_nodes", 3));
  if (spec.quadrature_nodes < 1) throw sl::ConfigError("key 'quadrature_nodes': must be positive");
  spec.control_variate = t.boolean("control_variate", false);
  spec.threads = read_threads(t);
  spec.chain_cfg = read_mcmc(t);
  const bool log_score = t.boolean("log_score", false);
  for (const auto& name : t.strings("priors")) spec.priors.push_back(read_checked_prior(t, name, s));
  if (spec.priors.empty()) throw sl::ConfigError("key 'priors': empty");
  return [spec, log_score] {
    Table out = curve_table(sl::kl_risk_curve(spec, log_score));
    out.extra["scale"] = log_score ? "log_score" : "kl";
    return out;
  };
}

Job plan_asymptotic_check(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  const double n_obs = read_n_obs(t);
  const sl::PriorModel base = read_checked_prior(t, t.string("base", "svs"), s);
  const std::string factor_name = t.string("factor");
  if (factor_name != "frobenius_power" && factor_name != "columnwise")
    throw sl::ConfigError("key 'factor': expected \"frobenius_power\" or \"columnwise\"");
  const sl::PriorModel factor = read_checked_prior(t, factor_name, s);
  const sl::Matrix m = read_mean(t, s);
  const std::string loss = t.string("loss", "frobenius");
  if (loss != "frobenius" && loss != "kl") throw sl::ConfigError("key 'loss': expected \"frobenius\" or \"kl\"");
  const long reps = read_reps(t, 1000);
  if (reps % 2) throw sl::ConfigError("key 'n_reps': must be even (antithetic pairs)");
  const sl::RngSeed seed{t.seed("seed", 0)};
  const int nodes = static_cast<int>(t.integer("quadrature_nodes", 3));
  const int threads = read_threads(t);
  const sl::MCMCConfig cfg = read_mcmc(t);
  return [=] {
    Table out;
    out.header = {"N", "loss", "raw_mean", "raw_std_error", "scaled_mean", "scaled_std_error", "limit", "n_reps", "seed"};
    sl::RiskEstimate raw;
    double limit = 0.0;
    if (loss == "frobenius") {
      const sl::AsymptoticCheck c = sl::asymptotic_check(base, factor, m, sl::SampleSize(n_obs), reps, cfg, seed, threads);
      raw = c.raw;
      limit = c.limit;
    } else {
      raw = sl::paired_kl_difference(base, factor, m, n_obs, reps, cfg, seed, nodes, threads);
      limit = sl::asymptotic_kl_difference(base, factor, m, true);
    }
    const double n2 = n_obs * n_obs;
    out.rows.push_back({num(n_obs), loss, num(raw.mean), num(raw.std_error), num(n2 * raw.mean),
                        num(n2 * raw.std_error), num(limit), num(raw.n_reps), num(seed.value)});
    out.messages.push_back("N^2 x difference " + num(n2 * raw.mean) + " +- " + num(n2 * raw.std_error) + ", limit " +
                           num(limit));
    return out;
  };
}

Job plan_brown_test(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  const sl::PriorModel prior = read_checked_prior(t, t.string("prior", "svs"), s);
  const std::vector<double> r_grid = t.numbers("r_grid", {5.0, 10.0, 20.0, 50.0});
  const long n_sphere = t.integer("n_sphere", 200), n_inner = t.integer("n_inner", 10000);
  if (n_sphere < 2 || n_inner < 2) throw sl::ConfigError("keys 'n_sphere', 'n_inner': need at least 2");
  std::vector<std::uint64_t> seeds;
  for (double x : t.numbers("seeds", {0.0})) {
    if (x < 0 || x != std::floor(x)) throw sl::ConfigError("key 'seeds': nonnegative integers");
    seeds.push_back(static_cast<std::uint64_t>(x));
  }
  const int threads = read_threads(t);
  if (r_grid.size() < 2 || r_grid.back() / r_grid.front() < 10.0)
    throw sl::ConfigError("key 'r_grid': must span at least a decade");
  return [=] {
    Table out;
    out.header = {"seed", "r", "log_underline_m", "log_std_error", "fitted_slope", "slope_bound",
                  "convergence_statistic", "verdict", "integral_finite"};
    for (std::uint64_t sd : seeds) {
      const sl::BrownTestReport rep = sl::brown_integral_test(prior, r_grid, n_sphere, n_inner, {sd}, threads);
      for (std::size_t i = 0; i < r_grid.size(); ++i)
        out.rows.push_back({num(sd), num(r_grid[i]), num(rep.log_underline_m[i]), num(rep.log_underline_m_se[i]),
                            num(rep.fitted_slope), num(rep.slope_bound), num(rep.convergence_statistic),
                            flag(rep.verdict), flag(rep.integral_finite)});
      out.messages.push_back("seed " + num(sd) + ": slope " + num(rep.fitted_slope) + " (bound " +
                             num(rep.slope_bound) + "); " + rep.note);
    }
    return out;
  };
}

Job plan_minimaxity_report(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  const std::string name = t.string("prior");
  if (name != "msvs1" && name != "msvs2") throw sl::ConfigError("key 'prior': expected \"msvs1\" or \"msvs2\"");
  const sl::PriorModel prior = read_checked_prior(t, name, s);
  const long n_points = t.integer("n_points", 20);
  const double scale = t.number("point_scale", 3.0);
  const sl::RngSeed seed{t.seed("seed", 0)};
  if (n_points < 1 || !(scale > 0.0)) throw sl::ConfigError("keys 'n_points', 'point_scale': must be positive");
  return [=] {
    std::vector<sl::Matrix> points;
    for (long k = 0; k < n_points; ++k) {
      auto eng = sl::make_engine(seed, sl::StreamRole::points, {static_cast<std::uint64_t>(k)});
      sl::Matrix m(s.n, s.p);
      sl::fill_standard_normal(m, eng);
      points.push_back(scale * m);
    }
    const sl::MinimaxityReport rep = sl::minimaxity_report(prior, points);
    Table out;
    out.header = {"point", "laplacian", "nonpositive", "window_satisfied"};
    for (const auto& r : rep.rows)
      out.rows.push_back({num(static_cast<long>(r.point)), num(r.laplacian), flag(r.nonpositive),
                          flag(rep.window_satisfied)});
    out.extra["window"] = rep.window;
    out.messages.push_back(rep.prior + " window " + rep.window + ": " +
                           (rep.window_satisfied ? "satisfied" : "violated, minimaxity by superharmonicity not shown"));
    out.messages.push_back(std::string("Laplacian nonpositive at all points: ") + flag(rep.all_nonpositive));
    return out;
  };
}

Job plan_blockwise(const sl::ConfigTable& t) {
  const sl::BlockStructure blocks(parse_blocks(t.numbers("blocks")));
  const std::string mode = t.string("mode", "asymptotic");
  if (mode != "asymptotic" && mode != "dominator")
    throw sl::ConfigError("key 'mode': expected \"asymptotic\" or \"dominator\"");
  const double n_obs = read_n_obs(t);
  sl::Vector theta = sl::Vector::Zero(blocks.dim());
  if (t.has("theta")) {
    const std::vector<double> v = t.numbers("theta");
    if (v.size() != static_cast<std::size_t>(blocks.dim())) throw sl::ConfigError("key 'theta': needs d entries");
    theta = Eigen::Map<const sl::Vector>(v.data(), blocks.dim());
  }
  if (t.has("theta_norm")) {
    const double r = t.number("theta_norm");
    if (theta.norm() == 0.0) throw sl::ConfigError("key 'theta_norm': theta is zero");
    theta *= r / theta.norm();
  }
  double gamma = 0.0;
  if (mode == "asymptotic") {
    gamma = t.number("gamma", sl::optimal_mbs_gamma(blocks));
    if (theta.norm() == 0.0) throw sl::ConfigError("asymptotic mode: theta must be nonzero");
    if (!sl::mbs_integrability_check(blocks, gamma).ok)
      throw sl::ConfigError("key 'gamma': outside the proper-marginal window");
  } else if (!blocks.admits_dominator()) {
    throw sl::ConfigError("key 'blocks': dominator needs R_# > 2 - d");
  }
  const long reps = read_reps(t, 1000);
  if (reps % 2) throw sl::ConfigError("key 'n_reps': must be even (antithetic pairs)");
  const sl::RngSeed seed{t.seed("seed", 0)};
  sl::ReplicateOptions opts;
  opts.antithetic = true;
  opts.threads = read_threads(t);
  const sl::MCMCConfig cfg = read_mcmc(t);
  return [=] {
    Table out;
    out.header = {"mode", "quantity", "mean", "std_error", "reference", "n_reps", "seed"};
    const sl::Matrix m = sl::as_column(theta);
    if (mode == "dominator") {
      const sl::RiskEstimate d =
          sl::paired_risk_difference(sl::brown_dominator_pair(blocks, cfg), m, sl::SampleSize(n_obs), reps, seed, opts);
      out.rows.push_back({mode, "risk(dominator)-risk(bs)", num(d.mean), num(d.std_error), "0", num(d.n_reps),
                          num(seed.value)});
      out.messages.push_back("dominator minus BS risk " + num(d.mean) + " +- " + num(d.std_error));
    } else {
      const sl::RiskEstimate d = sl::paired_risk_difference(sl::mbs_shared_chain_pair(blocks, gamma, cfg), m,
                                                            sl::SampleSize(n_obs), reps, seed, opts);
      const double n2 = n_obs * n_obs, limit = sl::asymptotic_difference_bs(blocks, gamma, theta);
      out.rows.push_back({mode, "N^2*(risk(mbs)-risk(bs))", num(n2 * d.mean), num(n2 * d.std_error), num(limit),
                          num(d.n_reps), num(seed.value)});
      out.messages.push_back("N^2 x difference " + num(n2 * d.mean) + " +- " + num(n2 * d.std_error) + ", limit " +
                             num(limit));
    }
    return out;
  };
}

Job plan_check_derivatives(const sl::ConfigTable& t) {
  const Shape s = read_shape(t);
  std::vector<sl::PriorModel> priors;
  for (const auto& name : t.strings("priors", {"svs", "msvs1", "msvs2", "frobenius_power"}))
    priors.push_back(read_checked_prior(t, name, s));
  const long n_points = t.integer("n_points", 20);
  const double scale = t.number("point_scale", 2.0);
  const sl::RngSeed seed{t.seed("seed", 0)};
  if (n_points < 1 || !(scale > 0.0)) throw sl::ConfigError("keys 'n_points', 'point_scale': must be positive");
  return [=] {
    Table out;
    out.header = {"prior", "point", "grad_rel_err", "laplacian_rel_err", "pass"};
    long failures = 0;
    for (const auto& prior : priors)
      for (long k = 0; k < n_points; ++k) {
        auto eng = sl::make_engine(seed, sl::StreamRole::points, {static_cast<std::uint64_t>(k)});
        sl::Matrix m(s.n, s.p);
        sl::fill_standard_normal(m, eng);
        m *= scale;
        const sl::DerivativeCheck c = sl::check_derivatives(prior, m);
        const bool pass = c.grad_rel_err < 1e-6 && c.laplacian_rel_err < 1e-4;
        failures += pass ? 0 : 1;
        out.rows.push_back({prior.name(), num(k), num(c.grad_rel_err), num(c.laplacian_rel_err), flag(pass)});
      }
    out.messages.push_back(num(failures) + " of " + num(static_cast<long>(out.rows.size())) + " checks failed");
    return out;
  };
}

Job plan(const std::string& command, const sl::ConfigTable& t) {
  if (command == "risk-curve") return plan_risk_curve(t);
  if (command == "kl-risk-curve") return plan_kl_risk_curve(t);
  if (command == "asymptotic-check") return plan_asymptotic_check(t);
  if (command == "brown-test") return plan_brown_test(t);
  if (command == "minimaxity-report") return plan_minimaxity_report(t);
  if (command == "blockwise") return plan_blockwise(t);
  if (command == "check-derivatives") return plan_check_derivatives(t);
  throw sl::ConfigError("unknown command '" + command + "'");
}

////////////////////////////////////////////////////////////////

struct Overrides {
  std::string config;
  std::vector<std::string> set;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<long> n_reps;
  std::optional<long> threads;
  std::string blocks;
};

// --set key=value parses the value with the config syntax.
void apply_overrides(sl::ConfigTable& t, const Overrides& o) {
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sl::ConfigError("--set expects key=value, got '" + kv + "'");
    const sl::ConfigTable one = sl::ConfigTable::parse(kv, "--set");
    for (const auto& [k, v] : one.values()) t.set(k, v);
  }
  if (!o.output.empty()) t.set_string("output", o.output);
  if (o.seed) t.set_number("seed", static_cast<double>(*o.seed));
  if (o.n_reps) t.set_number("n_reps", static_cast<double>(*o.n_reps));
  if (o.threads) t.set_number("threads", static_cast<double>(*o.threads));
  if (!o.blocks.empty()) {
    std::vector<sl::ConfigValue::Scalar> sizes;
    std::size_t start = 0;
    while (start <= o.blocks.size()) {
      const auto comma = o.blocks.find(',', start);
      const std::string tok = o.blocks.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      double x = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw sl::ConfigError("--blocks: expected comma-separated sizes, got '" + o.blocks + "'");
      sizes.push_back(x);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    t.set("blocks", sl::ConfigValue{sizes});
  }
}

int run(const std::string& command, const Overrides& o) {
  std::string out_path, meta_path;
  Job job;
  sl::ConfigTable table;
  try {
    if (!o.config.empty()) table = sl::ConfigTable::load(o.config);
    apply_overrides(table, o);
    const std::string declared = table.string("command", command);
    if (declared != command)
      throw sl::ConfigError("config declares command '" + declared + "' but subcommand is '" + command + "'");
    out_path = table.string("output", command + ".csv");
    job = plan(command, table);
    table.reject_unused();
  } catch (const sl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sl::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  meta_path = out_path + ".meta.json";
  try {
    Table result = job();
    json meta = result.extra;
    meta["command"] = command;
    meta["version"] = sl::kVersion;
    meta["seed"] = table.has("seed") ? table.seed("seed", 0) : 0;
    meta["config"] = table.serialize();
    meta["columns"] = result.header;
    meta["rows"] = result.rows.size();
    write_atomic(out_path, to_csv(result));
    write_atomic(meta_path, meta.dump(2) + "\n");
    for (const auto& msg : result.messages) std::cout << msg << "\n";
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::remove(out_path.c_str());
    std::remove(meta_path.c_str());
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shrinklab: risk simulations for singular value shrinkage priors"};
  app.set_version_flag("--version", std::string(sl::kVersion));
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"risk-curve", "Frobenius risk of estimators along a singular-value grid"},
      {"kl-risk-curve", "Kullback-Leibler risk of Bayes predictive densities along a grid"},
      {"asymptotic-check", "N^2 x paired risk difference against its closed-form limit"},
      {"brown-test", "Brown's integral test for inadmissibility"},
      {"minimaxity-report", "superharmonicity window and Laplacian signs"},
      {"blockwise", "blockwise Stein priors: dominator and asymptotic checks"},
      {"check-derivatives", "analytic gradients and Laplacians against finite differences"},
  };
  std::vector<Overrides> opts(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, commands[i].second);
    Overrides& o = opts[i];
    sub->add_option("-c,--config", o.config, "config file (key = value lines)");
    sub->add_option("--set", o.set, "override a config key, key=value (repeatable)");
    sub->add_option("-o,--output", o.output, "output CSV path");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--n-reps", o.n_reps, "replicates");
    sub->add_option("--threads", o.threads, "worker threads (SHRINKLAB_THREADS overrides)");
    if (commands[i].first == "blockwise") sub->add_option("--blocks", o.blocks, "block sizes, e.g. 3,3");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (std::size_t i = 0; i < commands.size(); ++i)
    if (app.got_subcommand(commands[i].first)) return run(commands[i].first, opts[i]);
  return 2;
}
