#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "shiftfunc/chain.hpp"
#include "shiftfunc/covariance.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/functional.hpp"
#include "shiftfunc/parallel.hpp"
#include "shiftfunc/rng.hpp"

namespace shiftfunc {

// A set of +-1 codewords with certified pairwise Hamming separation.
struct Packing {
  int d = 0;
  std::vector<std::vector<int>> codewords;  // entries in {-1, +1}
  int min_distance = 0;

  static int hamming(const std::vector<int>& a, const std::vector<int>& b) {
    int h = 0;
    for (std::size_t i = 0; i < a.size(); ++i) h += a[i] != b[i];
    return h;
  }

  // Exhaustive pairwise certificate; recomputes the minimum distance.
  void certify(int required_distance, std::size_t required_count) {
    if (codewords.size() < required_count)
      throw numerical_error("packing: target count not reached");
    min_distance = d;
    for (std::size_t i = 0; i < codewords.size(); ++i)
      for (std::size_t j = i + 1; j < codewords.size(); ++j)
        min_distance = std::min(min_distance, hamming(codewords[i], codewords[j]));
    if (codewords.size() > 1 && min_distance < required_distance)
      throw numerical_error("packing: separation certificate failed");
  }
};

namespace detail {

inline std::vector<int> word_from_bits(std::uint64_t bits, int d) {
  std::vector<int> w(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) w[static_cast<std::size_t>(l)] = (bits >> l) & 1 ? 1 : -1;
  return w;
}

}  // namespace detail

// Greedy binary packing: card >= 2^floor(d/8) words with pairwise Hamming
// distance >= d/8. Candidates are visited in binary-reflected Gray-code order
// (exhaustive for d <= 24; for larger d the same sequence is XOR-masked and
// offset by seed-derived words, capped at 10^7 candidates with up to three
// automatic re-seeds). The invariants are certified exhaustively post hoc.
inline Packing vg_packing(int d, SeedSpec seed = {}) {
  if (d < 8 || d > 64) throw config_error("packing: d must be in [8, 64]");
  const int required = (d + 7) / 8;  // smallest integer >= d/8
  const std::size_t target = std::size_t{1} << (d / 8);

  for (std::uint64_t attempt = 0; attempt < 3; ++attempt) {
    Packing p;
    p.d = d;
    std::uint64_t offset = 0, mask = 0;
    std::uint64_t total = d <= 24 ? (std::uint64_t{1} << d) : std::uint64_t{10'000'000};
    if (d > 24) {
      RngStream s = RngStream(seed.substream(attempt));
      offset = s.next_u64();
      mask = s.next_u64() & ((d == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << d) - 1));
    }
    for (std::uint64_t t = 0; t < total && p.codewords.size() < target; ++t) {
      const std::uint64_t m = d < 64 ? ((offset + t) & ((std::uint64_t{1} << d) - 1))
                                     : offset + t;
      const std::uint64_t gray = (m ^ (m >> 1)) ^ mask;
      std::vector<int> w = detail::word_from_bits(gray, d);
      bool ok = true;
      for (const auto& kept : p.codewords)
        if (Packing::hamming(kept, w) < required) {
          ok = false;
          break;
        }
      if (ok) p.codewords.push_back(std::move(w));
    }
    if (p.codewords.size() >= target) {
      p.certify(required, target);
      return p;
    }
  }
  throw numerical_error("packing: construction failed after re-seeding");
}

inline std::string packing_to_text(const Packing& p) {
  std::ostringstream os;
  for (const auto& w : p.codewords) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (i) os << ' ';
      os << (w[i] > 0 ? "+1" : "-1");
    }
    os << '\n';
  }
  return os.str();
}

// The hypercube parameter set theta_w = (8 eps / sqrt(d)) w together with the
// coordinate functionals f_l(theta) = sum_w w_l eps^s phi(||(theta-theta_w)/eps||^2).
// The per-w bumps have pairwise disjoint supports (centers are >= 2 eps apart).
struct BumpFamily {
  Packing packing;
  double epsilon = 0.0;
  double s = 2.0;
  std::vector<Point> thetas;

  int dim() const { return packing.d; }
  std::size_t count() const { return packing.codewords.size(); }

  static BumpFamily build(Packing p, double epsilon, double s) {
    if (!(epsilon > 0.0 && epsilon < 0.125))
      throw config_error("bump family: epsilon must lie in (0, 1/8)");
    if (!(s > 0.0)) throw config_error("bump family: s must be > 0");
    BumpFamily fam;
    fam.packing = std::move(p);
    fam.epsilon = epsilon;
    fam.s = s;
    const int d = fam.packing.d;
    const double scale = 8.0 * epsilon / std::sqrt(static_cast<double>(d));
    for (const auto& w : fam.packing.codewords) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v[i] = scale * w[static_cast<std::size_t>(i)];
      fam.thetas.push_back(Point::vec(std::move(v)));
      const double norm = fam.thetas.back().coords.norm();
      if (std::abs(norm - 8.0 * epsilon) > 1e-12 * 8.0 * epsilon)
        throw numerical_error("bump family: ||theta_w|| != 8 eps");
    }
    for (std::size_t i = 0; i < fam.thetas.size(); ++i)
      for (std::size_t j = i + 1; j < fam.thetas.size(); ++j)
        if ((fam.thetas[i].coords - fam.thetas[j].coords).norm() < 2.0 * epsilon)
          throw numerical_error("bump family: centers closer than 2 eps");
    return fam;
  }

  double eval_fl(int l, const Point& theta) const {
    const double eps2 = epsilon * epsilon;
    const double scale = std::pow(epsilon, s);
    double acc = 0.0;
    for (std::size_t w = 0; w < thetas.size(); ++w) {
      const double r2 = (theta.coords - thetas[w].coords).squaredNorm() / eps2;
      if (r2 >= 1.0) continue;
      acc += packing.codewords[w][static_cast<std::size_t>(l)] * scale *
             detail::mollifier(r2);
    }
    return acc;
  }

  // The returned functional holds a reference to this family; keep the
  // family alive while using it.
  Functional functional_l(int l) const {
    Functional f;
    f.name = "bump_family_f" + std::to_string(l);
    f.meta = SmoothnessMeta{s, 0.0, 1.0};
    const BumpFamily* self = this;
    f.eval = [self, l](const Point& x) { return self->eval_fl(l, x); };
    f.grad = [self, l](const Point& x) {
      Point g = x;
      g.coords.setZero();
      const double eps2 = self->epsilon * self->epsilon;
      const double scale = std::pow(self->epsilon, self->s);
      for (std::size_t w = 0; w < self->thetas.size(); ++w) {
        Eigen::VectorXd diff = x.coords - self->thetas[w].coords;
        const double r2 = diff.squaredNorm() / eps2;
        if (r2 >= 1.0) continue;
        g.coords += self->packing.codewords[w][static_cast<std::size_t>(l)] * scale *
                    detail::mollifier_deriv(r2) * (2.0 / eps2) * diff;
      }
      return g;
    };
    return f;
  }
};

// tau(theta, theta') = sqrt((1/d) sum_l (f_l(theta) - f_l(theta'))^2), with
// the f_l evaluated exactly. wi/wj index codewords of the packing.
inline double tau_distance(const BumpFamily& fam, std::size_t wi, std::size_t wj) {
  if (wi >= fam.count() || wj >= fam.count())
    throw config_error("tau_distance: codeword index out of range");
  const int d = fam.dim();
  double acc = 0.0;
  for (int l = 0; l < d; ++l) {
    const double delta = fam.eval_fl(l, fam.thetas[wi]) - fam.eval_fl(l, fam.thetas[wj]);
    acc += delta * delta;
  }
  return std::sqrt(acc / static_cast<double>(d));
}

struct RecoveryRule {
  enum class Kind { PlugIn, Chain };
  Kind kind = Kind::PlugIn;
  int k = 1;
  long n_mc = 64;
};

struct RecoveryResult {
  double mean_sq_theta_error = 0.0;    // E||theta_tilde - theta||^2 over all runs
  double max_functional_risk = 0.0;    // max_l E(T_tilde_l - f_l(theta))^2
  double exact_recovery_rate = 0.0;    // fraction of runs with theta_tilde == theta
  double identity_max_rel = 0.0;       // worst per-realization violation of the
                                       // tau-based error identity
  bool regime_flag = false;            // eps^2 <= min(sigma^2 d, 1) held
  std::vector<double> per_word_risk;   // E||theta_tilde - theta||^2 per true w
};

// Sign-recovery experiment: simulate X = theta_w + xi, estimate every f_l,
// quantize T_tilde_l = +- eps^s phi(0) by the sign (>= 0 maps to +), decode
// the sign vector directly (theta_tilde = theta_{w_tilde} on the full
// hypercube; optionally snap to the nearest kept codeword first).
inline RecoveryResult recovery_experiment(const BumpFamily& fam,
                                          const CovarianceModel& model,
                                          const RecoveryRule& rule, long n_rep,
                                          SeedSpec seed,
                                          bool nearest_codeword = false) {
  if (model.matrix_view() || model.dim() != fam.dim())
    throw config_error("recovery: model must be a vector model of the packing dimension");
  if (n_rep < 1) throw config_error("recovery: n_rep must be >= 1");
  const int d = fam.dim();
  const std::size_t n_words = fam.count();
  const double phi0 = kBumpProfileAtZero;
  const double quant = std::pow(fam.epsilon, fam.s) * phi0;
  const double id_scale =
      64.0 / (phi0 * phi0 * std::pow(fam.epsilon, 2.0 * (fam.s - 1.0)));
  const double center_scale = 8.0 * fam.epsilon / std::sqrt(static_cast<double>(d));

  const MeanSE strong = model.strong_variance(2000, RngStream(seed.substream(0)).fork(0));
  RecoveryResult out;
  out.regime_flag = fam.epsilon * fam.epsilon <= std::min(strong.value, 1.0);

  const std::int64_t total = static_cast<std::int64_t>(n_words) * n_rep;
  std::vector<double> sq_theta(static_cast<std::size_t>(total));
  std::vector<double> id_rel(static_cast<std::size_t>(total));
  std::vector<char> exact(static_cast<std::size_t>(total));
  std::vector<double> fl_sq(static_cast<std::size_t>(total) * static_cast<std::size_t>(d));

  RngStream root(seed.master_seed);
  parallel_for(total, [&](std::int64_t idx) {
    const std::size_t w = static_cast<std::size_t>(idx) / static_cast<std::size_t>(n_rep);
    RngStream rs = root.fork(static_cast<std::uint64_t>(idx) + 1);
    RngStream noise = rs.fork(0);
    const Point& theta = fam.thetas[w];
    const Point x = theta + model.sample_noise(noise);

    std::vector<int> w_hat(static_cast<std::size_t>(d));
    double sum_fl_sq = 0.0;
    for (int l = 0; l < d; ++l) {
      double t_l;
      if (rule.kind == RecoveryRule::Kind::PlugIn) {
        t_l = fam.eval_fl(l, x);
      } else {
        RngStream inner = rs.fork(static_cast<std::uint64_t>(l) + 1);
        t_l = estimate_fk_stream(fam.functional_l(l), x, rule.k, rule.n_mc, model, inner)
                  .value;
      }
      const int sign = t_l >= 0.0 ? 1 : -1;
      w_hat[static_cast<std::size_t>(l)] = sign;
      const double t_quant = sign * quant;
      const double fl_true = fam.packing.codewords[w][static_cast<std::size_t>(l)] * quant;
      const double delta = t_quant - fl_true;
      fl_sq[static_cast<std::size_t>(idx) * static_cast<std::size_t>(d) +
            static_cast<std::size_t>(l)] = delta * delta;
      sum_fl_sq += delta * delta;
    }

    if (nearest_codeword) {
      int best = d + 1;
      std::size_t best_w = 0;
      for (std::size_t c = 0; c < n_words; ++c) {
        const int h = Packing::hamming(fam.packing.codewords[c], w_hat);
        if (h < best) {
          best = h;
          best_w = c;
        }
      }
      w_hat = fam.packing.codewords[best_w];
    }

    double sq = 0.0;
    bool all_equal = true;
    for (int l = 0; l < d; ++l) {
      const double dl = center_scale * (w_hat[static_cast<std::size_t>(l)] -
                                        fam.packing.codewords[w][static_cast<std::size_t>(l)]);
      sq += dl * dl;
      all_equal = all_equal &&
                  w_hat[static_cast<std::size_t>(l)] ==
                      fam.packing.codewords[w][static_cast<std::size_t>(l)];
    }
    sq_theta[static_cast<std::size_t>(idx)] = sq;
    exact[static_cast<std::size_t>(idx)] = all_equal ? 1 : 0;

    // Per-realization identity (sign quantization only, no snapping):
    // ||theta_tilde - theta||^2 = (8/(phi(0) eps^{s-1}))^2 (1/d) sum_l (T~_l - f_l)^2.
    if (!nearest_codeword) {
      const double rhs = id_scale * sum_fl_sq / static_cast<double>(d);
      const double denom = std::max({std::abs(sq), std::abs(rhs), 1e-300});
      id_rel[static_cast<std::size_t>(idx)] = std::abs(sq - rhs) / denom;
    }
  });

  out.per_word_risk.assign(n_words, 0.0);
  double total_sq = 0.0, exact_count = 0.0, worst_id = 0.0;
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const std::size_t w = static_cast<std::size_t>(idx) / static_cast<std::size_t>(n_rep);
    out.per_word_risk[w] += sq_theta[static_cast<std::size_t>(idx)];
    total_sq += sq_theta[static_cast<std::size_t>(idx)];
    exact_count += exact[static_cast<std::size_t>(idx)];
    worst_id = std::max(worst_id, id_rel[static_cast<std::size_t>(idx)]);
  }
  for (auto& v : out.per_word_risk) v /= static_cast<double>(n_rep);
  out.mean_sq_theta_error = total_sq / static_cast<double>(total);
  out.exact_recovery_rate = exact_count / static_cast<double>(total);
  out.identity_max_rel = worst_id;
  for (int l = 0; l < d; ++l) {
    double acc = 0.0;
    for (std::int64_t idx = 0; idx < total; ++idx)
      acc += fl_sq[static_cast<std::size_t>(idx) * static_cast<std::size_t>(d) +
                   static_cast<std::size_t>(l)];
    out.max_functional_risk =
        std::max(out.max_functional_risk, acc / static_cast<double>(total));
  }
  return out;
}

// Default scale for the separated parameter set: eps = min(sqrt(sigma^2 d),
// sqrt(0.9)/8), strictly inside (0, 1/8).
inline double default_epsilon(double sigma2_d) {
  return std::min(std::sqrt(std::max(0.0, sigma2_d)), std::sqrt(0.9) / 8.0);
}

}  // namespace shiftfunc
