#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "shiftfunc/covariance.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/functional.hpp"
#include "shiftfunc/parallel.hpp"
#include "shiftfunc/point.hpp"
#include "shiftfunc/rng.hpp"

namespace shiftfunc {

inline constexpr int kMaxChainOrder = 12;  // 2^k evaluations per replicate

struct ChainConfig {
  int k = 0;
  long n_mc = 1;
  SeedSpec seed;
  bool truncate = true;
  // Coupling policy is fixed: shared draws (one xi_1..xi_k per replicate
  // feeds every order j <= k, the j-th difference using the first j draws).

  void validate() const {
    if (k < 0) throw capability_error("chain: order must be >= 0");
    if (k > kMaxChainOrder) throw capability_error("chain order exceeds cap");
    if (n_mc < 1) throw config_error("chain: n_mc must be >= 1");
  }
};

struct ChainEstimate {
  double value = 0.0;
  double inner_se = 0.0;
  long n_evals = 0;
};

namespace detail {

// Per-thread reusable buffers for the Monte Carlo kernels.
struct ChainScratch {
  std::vector<Point> xi;
  std::vector<Point> partial;
  std::vector<Point> args;
  std::vector<int> t;
};

inline ChainScratch& chain_scratch() {
  thread_local ChainScratch s;
  return s;
}

inline void ensure_points(std::vector<Point>& v, std::size_t n,
                          const CovarianceModel& m) {
  if (v.size() < n) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point& p = v[i];
    if (p.coords.size() != m.storage_dim()) p.coords.resize(m.storage_dim());
    p.matrix_view = m.matrix_view();
    p.matrix_dim = m.matrix_view() ? m.dim() : 0;
  }
}

inline ChainEstimate reduce_in_order(const std::vector<double>& values, long evals) {
  const long n = static_cast<long>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se =
      n > 1 ? std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1))) : 0.0;
  return {mean, se, evals};
}

// Alternating sum over {0,1}^j in lexicographic order (t_1 branches first,
// 0 before 1): sum_t (-1)^(j - |t|) f(x + sum_i t_i xi_i). Partial sums are
// shared along the recursion; ws must hold j+1 points and t j slots.
inline double alternating_difference(const Functional& f, const Point& x, int j,
                                     const std::vector<Point>& xi,
                                     std::vector<Point>& ws, std::vector<int>& t) {
  if (j == 0) return f.eval(x);
  ws[0].coords = x.coords;
  double acc = 0.0;
  for (int i = 0; i < j; ++i) t[static_cast<std::size_t>(i)] = -1;
  int depth = 0;
  while (depth >= 0) {
    if (depth == j) {
      int ones = 0;
      for (int i = 0; i < j; ++i) ones += t[static_cast<std::size_t>(i)];
      acc += ((j - ones) % 2 == 0 ? 1.0 : -1.0) * f.eval(ws[static_cast<std::size_t>(j)]);
      --depth;
      continue;
    }
    int& ti = t[static_cast<std::size_t>(depth)];
    if (ti == 1) {
      ti = -1;
      --depth;
      continue;
    }
    ++ti;
    if (ti == 1) {
      ws[static_cast<std::size_t>(depth + 1)].coords =
          ws[static_cast<std::size_t>(depth)].coords +
          xi[static_cast<std::size_t>(depth)].coords;
    } else {
      ws[static_cast<std::size_t>(depth + 1)].coords =
          ws[static_cast<std::size_t>(depth)].coords;
    }
    ++depth;
  }
  return acc;
}

}  // namespace detail

// Monte Carlo estimate of B^j f(x), the expected j-th order difference of f
// along the bootstrap chain started at x. Fresh draws per replicate;
// replicate r uses substream r of the given stream.
inline ChainEstimate bop_apply(const Functional& f, const Point& x, int j,
                               const CovarianceModel& model, long n_mc,
                               const RngStream& stream) {
  if (j < 0) throw capability_error("bop_apply: order must be >= 0");
  if (j > kMaxChainOrder) throw capability_error("chain order exceeds cap");
  if (j == 0) return {f.eval(x), 0.0, 1};
  if (n_mc < 1) throw config_error("bop_apply: n_mc must be >= 1");
  std::vector<double> values(static_cast<std::size_t>(n_mc));
  parallel_for(n_mc, [&](std::int64_t r) {
    RngStream sub = stream.fork(static_cast<std::uint64_t>(r));
    detail::ChainScratch& sc = detail::chain_scratch();
    detail::ensure_points(sc.xi, static_cast<std::size_t>(j), model);
    detail::ensure_points(sc.partial, static_cast<std::size_t>(j + 1), model);
    if (sc.t.size() < static_cast<std::size_t>(j)) sc.t.resize(static_cast<std::size_t>(j));
    for (int i = 0; i < j; ++i)
      model.sample_noise_into(sc.xi[static_cast<std::size_t>(i)], sub);
    values[static_cast<std::size_t>(r)] =
        detail::alternating_difference(f, x, j, sc.xi, sc.partial, sc.t);
  });
  return detail::reduce_in_order(values, n_mc * (1L << j));
}

// Internal core of the chain estimator with an explicit stream; replicate r
// uses substream r, draws xi_1..xi_k once, and evaluates
// sum_{j<=k} (-1)^j D_j with D_j the j-th alternating difference over the
// first j draws.
inline ChainEstimate estimate_fk_stream(const Functional& f, const Point& x, int k,
                                        long n_mc, const CovarianceModel& model,
                                        const RngStream& stream) {
  if (k < 0) throw capability_error("chain: order must be >= 0");
  if (k > kMaxChainOrder) throw capability_error("chain order exceeds cap");
  if (n_mc < 1) throw config_error("chain: n_mc must be >= 1");
  if (k == 0) return {f.eval(x), 0.0, n_mc};  // plug-in; every replicate is f(x)
  std::vector<double> values(static_cast<std::size_t>(n_mc));
  parallel_for(n_mc, [&](std::int64_t r) {
    RngStream sub = stream.fork(static_cast<std::uint64_t>(r));
    detail::ChainScratch& sc = detail::chain_scratch();
    detail::ensure_points(sc.xi, static_cast<std::size_t>(k), model);
    detail::ensure_points(sc.partial, static_cast<std::size_t>(k + 1), model);
    if (sc.t.size() < static_cast<std::size_t>(k)) sc.t.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      model.sample_noise_into(sc.xi[static_cast<std::size_t>(i)], sub);
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) {
      const double dj = detail::alternating_difference(f, x, j, sc.xi, sc.partial, sc.t);
      acc += (j % 2 == 0 ? 1.0 : -1.0) * dj;
    }
    values[static_cast<std::size_t>(r)] = acc;
  });
  return detail::reduce_in_order(values, n_mc * ((1L << (k + 1)) - 1));
}

// f_k(x) = sum_{j=0}^k (-1)^j B^j f(x), estimated with shared-draws coupling.
inline ChainEstimate estimate_fk(const Functional& f, const Point& x,
                                 const ChainConfig& cfg, const CovarianceModel& model) {
  cfg.validate();
  return estimate_fk_stream(f, x, cfg.k, cfg.n_mc, model, RngStream::from_seed(cfg.seed));
}

// Truncated estimator: f_k(x) when sqrt(E||xi||^2) <= 1/2 (inclusive),
// exactly 0 otherwise.
inline ChainEstimate estimate_Tk(const Functional& f, const Point& x,
                                 const ChainConfig& cfg, const CovarianceModel& model,
                                 double strong_var) {
  cfg.validate();
  if (std::sqrt(std::max(0.0, strong_var)) <= 0.5) return estimate_fk(f, x, cfg, model);
  return {0.0, 0.0, 0};
}

// Independent representation of B^k f(theta) as
// E f^(k)(theta + sum_j tau_j xi_j)(xi_1,...,xi_k), tau_j ~ U[0,1] i.i.d.
// independent of the draws. Per replicate the k noise draws come first, then
// the k uniforms.
inline ChainEstimate oracle_bk_derivative(const Functional& f, const Point& theta, int k,
                                          const CovarianceModel& model, long n_mc,
                                          const RngStream& stream) {
  if (k < 0) throw capability_error("oracle: order must be >= 0");
  if (k == 0) return {f.eval(theta), 0.0, 1};
  if (!f.has_kth_form())
    throw capability_error("oracle: functional '" + f.name + "' has no derivative forms");
  if (n_mc < 1) throw config_error("oracle: n_mc must be >= 1");
  std::vector<double> values(static_cast<std::size_t>(n_mc));
  parallel_for(n_mc, [&](std::int64_t r) {
    RngStream sub = stream.fork(static_cast<std::uint64_t>(r));
    detail::ChainScratch& sc = detail::chain_scratch();
    detail::ensure_points(sc.xi, static_cast<std::size_t>(k), model);
    detail::ensure_points(sc.partial, 1, model);
    for (int i = 0; i < k; ++i)
      model.sample_noise_into(sc.xi[static_cast<std::size_t>(i)], sub);
    Point& base = sc.partial[0];
    base.coords = theta.coords;
    for (int i = 0; i < k; ++i)
      base.coords += sub.uniform01() * sc.xi[static_cast<std::size_t>(i)].coords;
    values[static_cast<std::size_t>(r)] =
        f.form(k, base, std::span<const Point>(sc.xi.data(), static_cast<std::size_t>(k)));
  });
  return detail::reduce_in_order(values, n_mc);
}

// Variance-reduced estimate of B^j f(x): the alternating difference minus its
// leading Taylor multilinear terms at x,
//   f^(j)(x)(xi_1..xi_j)  and, for j >= 2,
//   (1/2) sum_a f^(j+1)(x)(xi_a, xi_a, others),
// each of which has exactly zero mean under centered independent draws (each
// includes some draw an odd number of times; for j = 1 the second term would
// contain xi_1 twice and is therefore not subtracted). Same expectation as
// bop_apply, residual fluctuation O(nu^{j+2}) (O(nu^2) at j = 1) instead of
// O(nu^j). Needs derivative forms of orders j and j+1.
inline ChainEstimate bop_apply_controlled(const Functional& f, const Point& x, int j,
                                          const CovarianceModel& model, long n_mc,
                                          const RngStream& stream) {
  if (j < 0) throw capability_error("bop_apply: order must be >= 0");
  if (j > kMaxChainOrder) throw capability_error("chain order exceeds cap");
  if (j == 0) return {f.eval(x), 0.0, 1};
  if (!f.has_kth_form())
    throw capability_error("controlled bop: functional '" + f.name +
                           "' has no derivative forms");
  if (n_mc < 1) throw config_error("bop_apply: n_mc must be >= 1");
  std::vector<double> values(static_cast<std::size_t>(n_mc));
  parallel_for(n_mc, [&](std::int64_t r) {
    RngStream sub = stream.fork(static_cast<std::uint64_t>(r));
    detail::ChainScratch& sc = detail::chain_scratch();
    detail::ensure_points(sc.xi, static_cast<std::size_t>(j), model);
    detail::ensure_points(sc.partial, static_cast<std::size_t>(j + 1), model);
    detail::ensure_points(sc.args, static_cast<std::size_t>(j + 1), model);
    if (sc.t.size() < static_cast<std::size_t>(j)) sc.t.resize(static_cast<std::size_t>(j));
    for (int i = 0; i < j; ++i)
      model.sample_noise_into(sc.xi[static_cast<std::size_t>(i)], sub);
    double v = detail::alternating_difference(f, x, j, sc.xi, sc.partial, sc.t);
    v -= f.form(j, x, std::span<const Point>(sc.xi.data(), static_cast<std::size_t>(j)));
    if (j >= 2) {
      for (int a = 0; a < j; ++a) {
        sc.args[0].coords = sc.xi[static_cast<std::size_t>(a)].coords;
        sc.args[1].coords = sc.xi[static_cast<std::size_t>(a)].coords;
        std::size_t pos = 2;
        for (int i = 0; i < j; ++i)
          if (i != a) sc.args[pos++].coords = sc.xi[static_cast<std::size_t>(i)].coords;
        v -= 0.5 * f.form(j + 1, x,
                          std::span<const Point>(sc.args.data(),
                                                 static_cast<std::size_t>(j + 1)));
      }
    }
    values[static_cast<std::size_t>(r)] = v;
  });
  return detail::reduce_in_order(values, n_mc * (1L << j));
}

}  // namespace shiftfunc
