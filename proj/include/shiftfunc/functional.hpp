#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shiftfunc/covariance.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/point.hpp"

namespace shiftfunc {

// Declared smoothness metadata. Never computed by the library; consumers are
// diagnostics and the K ratio only.
struct SmoothnessMeta {
  double s = 3.0;           // Holder smoothness, s = k + 1 + rho
  double gamma = 0.0;       // growth exponent
  double holder_norm = 1.0; // declared bound on the Holder norm

  void validate() const {
    if (!(s > 0.0)) throw config_error("meta: s must be > 0");
    if (!(gamma >= 0.0)) throw config_error("meta: gamma must be >= 0");
    if (!(holder_norm > 0.0)) throw config_error("meta: holder_norm must be > 0");
  }
};

// A smooth functional f: E -> R. Evaluation is required; the gradient and the
// order-j multilinear derivative forms are optional capabilities.
struct Functional {
  std::string name;
  SmoothnessMeta meta;
  std::function<double(const Point&)> eval;
  std::function<Point(const Point&)> grad;
  // f^(j)(base)(h_1,...,h_j) as a symmetric j-linear form.
  std::function<double(int, const Point&, std::span<const Point>)> kth_form;

  bool has_grad() const { return static_cast<bool>(grad); }
  bool has_kth_form() const { return static_cast<bool>(kth_form); }

  Point gradient(const Point& x) const {
    if (!has_grad()) throw capability_error("functional '" + name + "': no gradient");
    return grad(x);
  }

  double form(int order, const Point& base, std::span<const Point> dirs) const {
    if (!has_kth_form())
      throw capability_error("functional '" + name + "': no derivative forms");
    return kth_form(order, base, dirs);
  }
};

namespace detail {

// Smooth compactly supported profile: phi(x) = exp(1 - 1/(1 - x^2)) on
// |x| < 1, zero outside; phi(0) = 1.
inline double mollifier(double x) {
  const double x2 = x * x;
  if (x2 >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - x2));
}

inline double mollifier_deriv(double x) {
  const double x2 = x * x;
  if (x2 >= 1.0) return 0.0;
  const double om = 1.0 - x2;
  return mollifier(x) * (-2.0 * x / (om * om));
}

inline double falling_factorial(int p, int j) {
  double acc = 1.0;
  for (int i = 0; i < j; ++i) acc *= static_cast<double>(p - i);
  return acc;
}

}  // namespace detail

inline constexpr double kBumpProfileAtZero = 1.0;  // mollifier(0)

// f(theta) = <theta, u>.
inline Functional make_linear(Point u, SmoothnessMeta meta = {}) {
  u.validate();
  if (meta.holder_norm == 1.0 && !u.matrix_view) meta.holder_norm = u.coords.norm();
  Functional f;
  f.name = "linear";
  f.meta = meta;
  auto shared = std::make_shared<Point>(std::move(u));
  f.eval = [shared](const Point& x) { return pairing(x, *shared); };
  f.grad = [shared](const Point&) { return *shared; };
  f.kth_form = [shared](int order, const Point&, std::span<const Point> h) {
    if (order == 0) throw capability_error("kth_form: order must be >= 1");
    if (order == 1) return pairing(h[0], *shared);
    return 0.0;
  };
  return f;
}

// f(theta) = ||theta||^2 (vector view).
inline Functional make_squared_norm(SmoothnessMeta meta = {2.5, 2.0, 1.0}) {
  Functional f;
  f.name = "squared_norm";
  f.meta = meta;
  f.eval = [](const Point& x) { return x.coords.squaredNorm(); };
  f.grad = [](const Point& x) { return 2.0 * x; };
  f.kth_form = [](int order, const Point& base, std::span<const Point> h) {
    if (order == 1) return 2.0 * base.coords.dot(h[0].coords);
    if (order == 2) return 2.0 * h[0].coords.dot(h[1].coords);
    return 0.0;
  };
  return f;
}

// f(theta) = <theta, u>^p.
inline Functional make_poly_power(Point u, int p, SmoothnessMeta meta = {}) {
  if (p < 1) throw config_error("poly_power: p must be >= 1");
  u.validate();
  meta.gamma = std::max(meta.gamma, static_cast<double>(p));
  Functional f;
  f.name = "poly_power";
  f.meta = meta;
  auto shared = std::make_shared<Point>(std::move(u));
  f.eval = [shared, p](const Point& x) { return std::pow(pairing(x, *shared), p); };
  f.grad = [shared, p](const Point& x) {
    const double z = pairing(x, *shared);
    return (static_cast<double>(p) * std::pow(z, p - 1)) * (*shared);
  };
  f.kth_form = [shared, p](int order, const Point& base, std::span<const Point> h) {
    if (order > p) return 0.0;
    double acc = detail::falling_factorial(p, order) *
                 std::pow(pairing(base, *shared), p - order);
    for (const Point& dir : h) acc *= pairing(dir, *shared);
    return acc;
  };
  return f;
}

// f(theta) = exp(<theta, u>).
inline Functional make_exp_linear(Point u, SmoothnessMeta meta = {3.0, 1.0, 2.5}) {
  u.validate();
  Functional f;
  f.name = "exp_linear";
  f.meta = meta;
  auto shared = std::make_shared<Point>(std::move(u));
  f.eval = [shared](const Point& x) { return std::exp(pairing(x, *shared)); };
  f.grad = [shared](const Point& x) {
    return std::exp(pairing(x, *shared)) * (*shared);
  };
  f.kth_form = [shared](int, const Point& base, std::span<const Point> h) {
    double acc = std::exp(pairing(base, *shared));
    for (const Point& dir : h) acc *= pairing(dir, *shared);
    return acc;
  };
  return f;
}

// f(theta) = eps^s * phi(||(theta - center)/eps||^2); vanishes outside the
// ball of radius eps around the center. holder_norm is a declared constant.
inline Functional make_bump(Point center, double eps, double s) {
  if (!(eps > 0.0)) throw config_error("bump: eps must be > 0");
  if (!(s > 0.0)) throw config_error("bump: s must be > 0");
  center.validate();
  Functional f;
  f.name = "bump";
  f.meta = SmoothnessMeta{s, 0.0, 1.0};
  auto c = std::make_shared<Point>(std::move(center));
  const double scale = std::pow(eps, s);
  f.eval = [c, eps, scale](const Point& x) {
    const double r2 = (x.coords - c->coords).squaredNorm() / (eps * eps);
    return scale * detail::mollifier(r2);
  };
  f.grad = [c, eps, scale](const Point& x) {
    Point g = x;
    g.coords = x.coords - c->coords;
    const double r2 = g.coords.squaredNorm() / (eps * eps);
    const double w = scale * detail::mollifier_deriv(r2) * 2.0 / (eps * eps);
    g.coords *= w;
    return g;
  };
  return f;
}

// Scalar functions usable inside spectral_bilinear.
struct ScalarFunction {
  std::string name;
  std::function<double(double)> h;
  std::function<double(double)> dh;
};

inline ScalarFunction scalar_function(const std::string& name) {
  if (name == "identity")
    return {name, [](double t) { return t; }, [](double) { return 1.0; }};
  if (name == "square")
    return {name, [](double t) { return t * t; }, [](double t) { return 2.0 * t; }};
  if (name == "exp")
    return {name, [](double t) { return std::exp(t); },
            [](double t) { return std::exp(t); }};
  if (name == "log")
    return {name,
            [](double t) {
              if (t <= 0.0) throw numerical_error("spectral: log needs positive spectrum");
              return std::log(t);
            },
            [](double t) {
              if (t <= 0.0) throw numerical_error("spectral: log needs positive spectrum");
              return 1.0 / t;
            }};
  if (name == "sqrt")
    return {name,
            [](double t) {
              if (t < 0.0) throw numerical_error("spectral: sqrt needs nonnegative spectrum");
              return std::sqrt(t);
            },
            [](double t) {
              if (t <= 0.0) throw numerical_error("spectral: sqrt derivative needs positive spectrum");
              return 0.5 / std::sqrt(t);
            }};
  if (name == "inverse")
    return {name,
            [](double t) {
              if (t == 0.0) throw numerical_error("spectral: inverse needs nonzero spectrum");
              return 1.0 / t;
            },
            [](double t) {
              if (t == 0.0) throw numerical_error("spectral: inverse needs nonzero spectrum");
              return -1.0 / (t * t);
            }};
  throw config_error("spectral: unknown scalar function '" + name + "'");
}

// f(theta) = <h(theta) u, v> for symmetric-matrix theta, via the
// eigendecomposition theta = Q diag(lambda) Q^T. The gradient uses the
// first-divided-difference matrix Gamma_ij = (h(l_i)-h(l_j))/(l_i-l_j) with
// h'((l_i+l_j)/2) substituted when |l_i - l_j| < 1e-8.
inline Functional make_spectral_bilinear(ScalarFunction hfun, Eigen::VectorXd u,
                                         Eigen::VectorXd v,
                                         SmoothnessMeta meta = {3.0, 2.0, 1.0}) {
  if (u.size() != v.size()) throw config_error("spectral: u and v sizes differ");
  Functional f;
  f.name = "spectral_bilinear";
  f.meta = meta;
  struct Ctx {
    ScalarFunction hf;
    Eigen::VectorXd u, v;
  };
  auto ctx = std::make_shared<Ctx>(Ctx{std::move(hfun), std::move(u), std::move(v)});
  f.eval = [ctx](const Point& x) {
    if (!x.matrix_view) throw capability_error("spectral: needs the matrix view");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.to_matrix());
    const Eigen::VectorXd lam = es.eigenvalues();
    Eigen::VectorXd hl(lam.size());
    for (int i = 0; i < lam.size(); ++i) hl[i] = ctx->hf.h(lam[i]);
    const Eigen::VectorXd a = es.eigenvectors().transpose() * ctx->u;
    const Eigen::VectorXd b = es.eigenvectors().transpose() * ctx->v;
    return (a.array() * b.array() * hl.array()).sum();
  };
  f.grad = [ctx](const Point& x) {
    if (!x.matrix_view) throw capability_error("spectral: needs the matrix view");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.to_matrix());
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::MatrixXd& q = es.eigenvectors();
    const int d = static_cast<int>(lam.size());
    Eigen::MatrixXd gamma(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double di = lam[i] - lam[j];
        gamma(i, j) = std::abs(di) < 1e-8
                          ? ctx->hf.dh(0.5 * (lam[i] + lam[j]))
                          : (ctx->hf.h(lam[i]) - ctx->hf.h(lam[j])) / di;
      }
    }
    const Eigen::VectorXd a = q.transpose() * ctx->u;
    const Eigen::VectorXd b = q.transpose() * ctx->v;
    Eigen::MatrixXd w(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        w(i, j) = gamma(i, j) * 0.5 * (a[i] * b[j] + a[j] * b[i]);
    return Point::sym(q * w * q.transpose());
  };
  return f;
}

// f(theta) = amplitude * (1/d) sum_i cos(omega * (theta_i - center_i)).
// Closed-form derivative forms of every order; under isotropic noise the
// smoothing operator acts on it as multiplication by exp(-omega^2 sigma^2 / 2).
inline Functional make_cosine_mean(double omega, double amplitude, Point center,
                                   SmoothnessMeta meta = {3.0, 0.0, 1.0}) {
  center.validate();
  if (center.matrix_view) throw config_error("cosine_mean: vector view only");
  Functional f;
  f.name = "cosine_mean";
  f.meta = meta;
  auto c = std::make_shared<Point>(std::move(center));
  f.eval = [c, omega, amplitude](const Point& x) {
    const int d = x.storage_dim();
    double acc = 0.0;
    for (int i = 0; i < d; ++i) acc += std::cos(omega * (x.coords[i] - c->coords[i]));
    return amplitude * acc / static_cast<double>(d);
  };
  f.grad = [c, omega, amplitude](const Point& x) {
    const int d = x.storage_dim();
    Point g = x;
    for (int i = 0; i < d; ++i)
      g.coords[i] = -amplitude * omega / static_cast<double>(d) *
                    std::sin(omega * (x.coords[i] - c->coords[i]));
    return g;
  };
  f.kth_form = [c, omega, amplitude](int order, const Point& base,
                                     std::span<const Point> h) {
    const int d = base.storage_dim();
    const double half_pi = 1.5707963267948966;
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
      double term = std::cos(omega * (base.coords[i] - c->coords[i]) +
                             static_cast<double>(order) * half_pi);
      for (const Point& dir : h) term *= dir.coords[i];
      acc += term;
    }
    return amplitude * std::pow(omega, order) * acc / static_cast<double>(d);
  };
  return f;
}

// sigma_{f,xi}(theta) = sqrt(<Sigma f'(theta), f'(theta)>), the exact
// standard deviation of the linearized estimator.
inline double sigma_f_xi(const Functional& f, const CovarianceModel& model,
                         const Point& theta) {
  const Point g = f.gradient(theta);
  return std::sqrt(std::max(0.0, model.quad_form(g)));
}

// K ratio: declared_holder_norm * (1 v ||theta||)^gamma * ||Sigma||^(1/2)
// divided by sigma_{f,xi}(theta). Scale-free in Sigma.
inline double K_functional(const Functional& f, const CovarianceModel& model,
                           const Point& theta) {
  const double sig = sigma_f_xi(f, model, theta);
  if (!(sig > 0.0))
    throw capability_error("K_functional: degenerate functional (zero variance)");
  const double tnorm = std::max(1.0, point_norm(theta, model.norm()));
  return f.meta.holder_norm * std::pow(tnorm, f.meta.gamma) *
         std::sqrt(model.weak_variance()) / sig;
}

struct GradientCheckReport {
  double max_rel_discrepancy = 0.0;
  bool pass = false;
};

// 5-point central differences along every storage coordinate against the
// analytic gradient. On the matrix view the off-diagonal storage coordinate
// moves both (i,j) and (j,i), so the expected directional derivative is
// 2 G_ij there and G_ii on the diagonal.
inline GradientCheckReport gradient_check(const Functional& f,
                                          const std::vector<Point>& points,
                                          double tol, double step = 1e-3) {
  GradientCheckReport rep;
  for (const Point& x : points) {
    const Point g = f.gradient(x);
    const double h = step * std::max(1.0, x.coords.cwiseAbs().maxCoeff());
    for (int c = 0; c < x.storage_dim(); ++c) {
      Point xp = x;
      auto eval_at = [&](double offset) {
        xp.coords[c] = x.coords[c] + offset;
        return f.eval(xp);
      };
      const double fd = (-eval_at(2.0 * h) + 8.0 * eval_at(h) - 8.0 * eval_at(-h) +
                         eval_at(-2.0 * h)) /
                        (12.0 * h);
      xp.coords[c] = x.coords[c];
      double expected = g.coords[c];
      if (x.matrix_view) {
        bool diag = false;
        for (int i = 0; i < x.matrix_dim; ++i)
          if (tri_index(i, i, x.matrix_dim) == c) diag = true;
        if (!diag) expected *= 2.0;
      }
      const double rel = std::abs(fd - expected) / std::max(1.0, std::abs(expected));
      rep.max_rel_discrepancy = std::max(rep.max_rel_discrepancy, rel);
    }
  }
  rep.pass = rep.max_rel_discrepancy < tol;
  return rep;
}

}  // namespace shiftfunc
