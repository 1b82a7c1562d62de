#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "shiftfunc/chain.hpp"
#include "shiftfunc/covariance.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/functional.hpp"
#include "shiftfunc/parallel.hpp"
#include "shiftfunc/stats.hpp"

namespace shiftfunc {

// One outer Monte Carlo experiment over X ~ N(theta, Sigma).
//
// Substream layout (fixed): with root = stream(chain.seed.master_seed),
// substream 0 drives the strong-variance estimate, substream r+1 drives outer
// replicate r (its child 0 draws X, its child 1 drives the inner chain).
struct ExperimentConfig {
  Functional f;
  CovarianceModel model;
  Point theta;
  ChainConfig chain;
  long n_rep = 100;
  long strongvar_n_mc = 2000;

  void validate() const {
    chain.validate();
    theta.validate();
    if (n_rep < 100) throw config_error("experiment: n_rep must be >= 100");
    if (theta.storage_dim() != model.storage_dim())
      throw config_error("experiment: theta dimension does not match the model");
    if (theta.matrix_view != model.matrix_view())
      throw config_error("experiment: theta view does not match the model");
  }
};

struct ExperimentReport {
  double f_theta = 0.0;
  double bias = 0.0, bias_se = 0.0;
  double variance = 0.0, variance_se = 0.0;  // population (1/n) variance
  double mse = 0.0, mse_se = 0.0;
  double sigma_f_xi = 0.0;
  double efficiency_ratio = 0.0;  // mse / sigma_f_xi^2
  double ks_statistic = 0.0;
  bool normalized_valid = false;  // false when sigma_f_xi degenerates or no gradient
  bool truncated = false;         // the truncation rule fired (T_k = 0)
  double strong_variance = 0.0;
  double nu = 0.0;  // sqrt(strong variance)
  long n_rep = 0;
  double runtime_sec = 0.0;  // console-only; never serialized into report files
  std::vector<double> normalized_errors;  // (f_k - f(theta)) / sigma_f_xi, unsorted
};

inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       bool keep_normalized = true) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.n_rep = cfg.n_rep;
  rep.f_theta = cfg.f.eval(cfg.theta);

  RngStream root = RngStream::from_seed(cfg.chain.seed);
  const MeanSE strong = cfg.model.strong_variance(cfg.strongvar_n_mc, root.fork(0));
  rep.strong_variance = strong.value;
  rep.nu = std::sqrt(std::max(0.0, strong.value));
  const bool pass = !cfg.chain.truncate || rep.nu <= 0.5;
  rep.truncated = !pass;

  if (cfg.f.has_grad()) rep.sigma_f_xi = sigma_f_xi(cfg.f, cfg.model, cfg.theta);

  std::vector<double> fk(static_cast<std::size_t>(cfg.n_rep));
  parallel_for(cfg.n_rep, [&](std::int64_t r) {
    RngStream rs = root.fork(static_cast<std::uint64_t>(r) + 1);
    RngStream noise = rs.fork(0);
    RngStream inner = rs.fork(1);
    const Point x = cfg.theta + cfg.model.sample_noise(noise);
    fk[static_cast<std::size_t>(r)] =
        estimate_fk_stream(cfg.f, x, cfg.chain.k, cfg.chain.n_mc, cfg.model, inner).value;
  });

  std::vector<double> err(static_cast<std::size_t>(cfg.n_rep));
  std::vector<double> sqerr(static_cast<std::size_t>(cfg.n_rep));
  for (std::size_t i = 0; i < fk.size(); ++i) {
    const double tk = pass ? fk[i] : 0.0;
    err[i] = tk - rep.f_theta;
    sqerr[i] = err[i] * err[i];
  }
  const SampleStats es = sample_stats(err);
  rep.bias = es.mean;
  rep.bias_se = es.mean_se;
  rep.variance = es.pop_variance;
  rep.variance_se = es.variance_se;
  const SampleStats ss = sample_stats(sqerr);
  rep.mse = ss.mean;
  rep.mse_se = ss.mean_se;

  if (rep.sigma_f_xi > 0.0) {
    std::vector<double> z(fk.size());
    for (std::size_t i = 0; i < fk.size(); ++i)
      z[i] = (fk[i] - rep.f_theta) / rep.sigma_f_xi;
    rep.ks_statistic = ks_statistic_normal(z);
    rep.normalized_valid = true;
    rep.efficiency_ratio = rep.mse / (rep.sigma_f_xi * rep.sigma_f_xi);
    if (keep_normalized) rep.normalized_errors = std::move(z);
  }

  rep.runtime_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// KS distance of a sample of normalized errors against the standard normal.
inline double normality_test(const std::vector<double>& samples) {
  if (samples.size() < 1000)
    throw config_error("normality_test: needs at least 1000 samples");
  return ks_statistic_normal(samples);
}

enum class BiasEstimator {
  Plain,       // empirical mean error of the chain estimates
  Controlled,  // (-1)^k B^{k+1} f measured by the controlled difference
};

struct SweepPointSpec {
  double sigma = 0.0;  // axis value recorded for the log-sigma fits
  ExperimentConfig cfg;
  long ctrl_n_mc = 200000;  // replicates for the controlled bias estimate
};

struct SweepRow {
  double sigma = 0.0;
  int d = 0;
  int k = 0;
  double nu = 0.0;
  double f_theta = 0.0;
  double bias = 0.0, bias_se = 0.0;
  double variance = 0.0;
  double mse = 0.0, mse_se = 0.0;
  double sigma_f_xi = 0.0;
  double efficiency_ratio = 0.0;
  double ks_statistic = 0.0;
  bool bias_resolved = false;  // |bias| > 2 * bias_se
};

struct SweepResult {
  std::vector<SweepRow> rows;
  SlopeFit bias_vs_nu;
  SlopeFit bias_vs_sigma;
  SlopeFit mse_vs_sigma;
  bool bias_slope_reliable = false;
  std::string bias_estimator;
};

// Scaling sweep: one experiment per point, log-log slope fits of |bias|
// against nu and sigma (points with |bias| > 2 SE only; the slope is flagged
// unreliable when more than half the points fail that filter) and of the MSE
// against sigma (all points).
inline SweepResult sweep_scaling(const std::vector<SweepPointSpec>& points,
                                 BiasEstimator mode = BiasEstimator::Plain) {
  if (points.size() < 4) throw config_error("sweep: needs at least 4 axis points");
  SweepResult out;
  out.bias_estimator = mode == BiasEstimator::Plain ? "plain" : "controlled";
  for (const auto& p : points) {
    ExperimentReport rep = run_experiment(p.cfg, /*keep_normalized=*/false);
    if (rep.truncated)
      throw capability_error("sweep: point outside the truncation-passing regime");
    SweepRow row;
    row.sigma = p.sigma;
    row.d = p.cfg.model.dim();
    row.k = p.cfg.chain.k;
    row.nu = rep.nu;
    row.f_theta = rep.f_theta;
    row.variance = rep.variance;
    row.mse = rep.mse;
    row.mse_se = rep.mse_se;
    row.sigma_f_xi = rep.sigma_f_xi;
    row.efficiency_ratio = rep.efficiency_ratio;
    row.ks_statistic = rep.ks_statistic;
    if (mode == BiasEstimator::Plain) {
      row.bias = rep.bias;
      row.bias_se = rep.bias_se;
    } else {
      RngStream root = RngStream::from_seed(p.cfg.chain.seed);
      const ChainEstimate b = bop_apply_controlled(
          p.cfg.f, p.cfg.theta, p.cfg.chain.k + 1, p.cfg.model, p.ctrl_n_mc,
          root.fork(0x5eed));
      const double sign = p.cfg.chain.k % 2 == 0 ? 1.0 : -1.0;
      row.bias = sign * b.value;
      row.bias_se = b.inner_se;
    }
    row.bias_resolved = std::abs(row.bias) > 2.0 * row.bias_se;
    out.rows.push_back(row);
  }

  std::vector<double> nus, sigmas, biases, all_sigmas, mses;
  for (const auto& r : out.rows) {
    all_sigmas.push_back(r.sigma);
    mses.push_back(r.mse);
    if (r.bias_resolved) {
      nus.push_back(r.nu);
      sigmas.push_back(r.sigma);
      biases.push_back(std::abs(r.bias));
    }
  }
  out.bias_vs_nu = fit_loglog(nus, biases);
  out.bias_vs_sigma = fit_loglog(sigmas, biases);
  out.mse_vs_sigma = fit_loglog(all_sigmas, mses);
  out.bias_slope_reliable =
      biases.size() * 2 >= out.rows.size() && biases.size() >= 2;
  out.bias_vs_nu.reliable = out.bias_vs_nu.reliable && out.bias_slope_reliable;
  out.bias_vs_sigma.reliable = out.bias_vs_sigma.reliable && out.bias_slope_reliable;
  return out;
}

}  // namespace shiftfunc
