#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "shiftfunc/errors.hpp"
#include "shiftfunc/point.hpp"
#include "shiftfunc/rng.hpp"

namespace shiftfunc {

struct MeanSE {
  double value = 0.0;
  double se = 0.0;
};

// The noise law of the shift model: a known covariance plus the ambient norm
// it is measured against.
//
// Supported kinds:
//   Isotropic  sigma2 * I_d on R^d
//   Diagonal   diag(lambda_1..lambda_d) on R^d
//   DenseSPD   symmetric PSD matrix on R^d
//   GOE        sigma * Z on symmetric d x d matrices, Z_ij ~ N(0,1) i<j,
//              Z_ii ~ N(0,2), entries independent for i<=j
class CovarianceModel {
 public:
  enum class Kind { Isotropic, Diagonal, DenseSPD, GOE };

  static CovarianceModel isotropic(double sigma2, int d, NormKind norm) {
    if (sigma2 < 0.0) throw config_error("covariance: sigma2 must be >= 0");
    if (d < 1) throw config_error("covariance: d must be >= 1");
    CovarianceModel m;
    m.kind_ = Kind::Isotropic;
    m.norm_ = norm;
    m.sigma2_ = sigma2;
    m.dim_ = d;
    m.check_norm_context();
    return m;
  }

  static CovarianceModel diagonal(Eigen::VectorXd lambdas, NormKind norm) {
    if (lambdas.size() < 1) throw config_error("covariance: empty diagonal");
    if ((lambdas.array() < 0.0).any())
      throw config_error("covariance: diagonal entries must be >= 0");
    CovarianceModel m;
    m.kind_ = Kind::Diagonal;
    m.norm_ = norm;
    m.dim_ = static_cast<int>(lambdas.size());
    m.lambdas_ = std::move(lambdas);
    m.check_norm_context();
    return m;
  }

  static CovarianceModel dense_spd(const Eigen::MatrixXd& sigma, NormKind norm) {
    if (sigma.rows() != sigma.cols() || sigma.rows() < 1)
      throw config_error("covariance: matrix must be square and non-empty");
    const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym >= 1e-12) throw config_error("covariance: matrix not symmetric");
    CovarianceModel m;
    m.kind_ = Kind::DenseSPD;
    m.norm_ = norm;
    m.dim_ = static_cast<int>(sigma.rows());
    m.sigma_mat_ = 0.5 * (sigma + sigma.transpose());
    m.factorize();
    m.check_norm_context();
    return m;
  }

  static CovarianceModel goe(double sigma, int d) {
    if (sigma < 0.0) throw config_error("covariance: sigma must be >= 0");
    if (d < 1) throw config_error("covariance: d must be >= 1");
    CovarianceModel m;
    m.kind_ = Kind::GOE;
    m.norm_ = NormKind::MatrixOperatorNorm;
    m.goe_sigma_ = sigma;
    m.dim_ = d;
    return m;
  }

  Kind kind() const { return kind_; }
  NormKind norm() const { return norm_; }
  int dim() const { return dim_; }
  bool matrix_view() const { return kind_ == Kind::GOE; }
  int storage_dim() const { return matrix_view() ? tri_size(dim_) : dim_; }
  double iso_sigma2() const { return sigma2_; }
  double goe_sigma() const { return goe_sigma_; }
  const Eigen::VectorXd& lambdas() const { return lambdas_; }
  const Eigen::MatrixXd& dense_matrix() const { return sigma_mat_; }

  Point zero_point() const {
    return Point::zeros_like_dim(storage_dim(), matrix_view(), matrix_view() ? dim_ : 0);
  }

  // Model with covariance scaled by c (noise scaled by sqrt(c)).
  CovarianceModel scaled(double c) const {
    if (c < 0.0) throw config_error("covariance: scale must be >= 0");
    switch (kind_) {
      case Kind::Isotropic: return isotropic(c * sigma2_, dim_, norm_);
      case Kind::Diagonal: return diagonal(c * lambdas_, norm_);
      case Kind::DenseSPD: return dense_spd(c * sigma_mat_, norm_);
      case Kind::GOE: return goe(std::sqrt(c) * goe_sigma_, dim_);
    }
    throw config_error("covariance: unknown kind");
  }

  // One draw of the noise. The stream is consumed sequentially; draw order is
  // fixed: coordinates 0..d-1 for vector kinds, upper-triangle storage order
  // for the GOE.
  Point sample_noise(RngStream& stream) const {
    Point p = zero_point();
    sample_noise_into(p, stream);
    return p;
  }

  // Allocation-free variant for hot loops; out must match the storage shape.
  void sample_noise_into(Point& p, RngStream& stream) const {
    switch (kind_) {
      case Kind::Isotropic: {
        const double s = std::sqrt(sigma2_);
        for (int i = 0; i < dim_; ++i) p.coords[i] = s * stream.normal();
        break;
      }
      case Kind::Diagonal: {
        for (int i = 0; i < dim_; ++i)
          p.coords[i] = std::sqrt(lambdas_[i]) * stream.normal();
        break;
      }
      case Kind::DenseSPD: {
        Eigen::VectorXd g(dim_);
        for (int i = 0; i < dim_; ++i) g[i] = stream.normal();
        p.coords.noalias() = factor_ * g;
        break;
      }
      case Kind::GOE: {
        const double diag_sd = std::sqrt(2.0) * goe_sigma_;
        for (int i = 0; i < dim_; ++i)
          for (int j = i; j < dim_; ++j)
            p.coords[tri_index(i, j, dim_)] =
                (i == j ? diag_sd : goe_sigma_) * stream.normal();
        break;
      }
    }
  }

  // ||Sigma||: supremum of E<xi,u>^2 over the dual unit ball.
  //  - Euclidean: top eigenvalue of Sigma.
  //  - Sup norm: the dual ball is the l1 ball, whose extreme points are the
  //    signed coordinate functionals, so the supremum is the max diagonal.
  //  - GOE with operator norm: the dual ball is the nuclear-norm ball with
  //    extreme points +-vv^T, and Var(v^T xi v) = 2 sigma^2 for every unit v,
  //    so the value is exactly 2 sigma^2.
  double weak_variance() const {
    switch (kind_) {
      case Kind::Isotropic: return sigma2_;
      case Kind::Diagonal: return lambdas_.maxCoeff();
      case Kind::DenseSPD:
        if (norm_ == NormKind::SupNorm) return sigma_mat_.diagonal().maxCoeff();
        return top_eigenvalue();
      case Kind::GOE: return 2.0 * goe_sigma_ * goe_sigma_;
    }
    throw config_error("covariance: unknown kind");
  }

  // E||xi||^2. Exact trace for the Euclidean norm (SE 0), Monte Carlo with a
  // standard error otherwise.
  MeanSE strong_variance(long n_mc, RngStream stream) const {
    if (n_mc < 1) throw config_error("strong_variance: n_mc must be >= 1");
    if (norm_ == NormKind::Euclidean) {
      switch (kind_) {
        case Kind::Isotropic: return {sigma2_ * dim_, 0.0};
        case Kind::Diagonal: return {lambdas_.sum(), 0.0};
        case Kind::DenseSPD: return {sigma_mat_.trace(), 0.0};
        default: break;
      }
    }
    double sum = 0.0, sumsq = 0.0;
    for (long r = 0; r < n_mc; ++r) {
      RngStream sub = stream.fork(static_cast<std::uint64_t>(r));
      const Point xi = sample_noise(sub);
      const double n = point_norm(xi, norm_);
      const double v = n * n;
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(n_mc);
    double se = 0.0;
    if (n_mc > 1) {
      const double var =
          std::max(0.0, (sumsq - static_cast<double>(n_mc) * mean * mean) /
                            static_cast<double>(n_mc - 1));
      se = std::sqrt(var / static_cast<double>(n_mc));
    }
    return {mean, se};
  }

  // r(Sigma) = E||xi||^2 / ||Sigma||. Analytic short-circuits where the ratio
  // is exact: isotropic Euclidean (= d) and rank-one diagonals (= 1).
  MeanSE effective_rank(long n_mc, RngStream stream) const {
    const double weak = weak_variance();
    if (weak <= 0.0) throw numerical_error("effective_rank: zero covariance");
    if (norm_ == NormKind::Euclidean) {
      if (kind_ == Kind::Isotropic) return {static_cast<double>(dim_), 0.0};
      if (kind_ == Kind::Diagonal) {
        const double lmax = lambdas_.maxCoeff();
        double r = 0.0;
        for (int i = 0; i < dim_; ++i) r += lambdas_[i] / lmax;
        return {r, 0.0};
      }
    }
    const MeanSE strong = strong_variance(n_mc, stream);
    return {strong.value / weak, strong.se / weak};
  }

  // <Sigma g, g> for a dual direction g: the variance of <xi, g>. For the GOE
  // it is computed from the independent entry variances of the pairing
  // tr(xi G) = sum_i xi_ii G_ii + 2 sum_{i<j} xi_ij G_ij.
  double quad_form(const Point& g) const {
    switch (kind_) {
      case Kind::Isotropic: return sigma2_ * g.coords.squaredNorm();
      case Kind::Diagonal: return (lambdas_.array() * g.coords.array().square()).sum();
      case Kind::DenseSPD: return g.coords.dot(sigma_mat_ * g.coords);
      case Kind::GOE: {
        const double s2 = goe_sigma_ * goe_sigma_;
        double acc = 0.0;
        for (int i = 0; i < dim_; ++i) {
          const double gii = g.coords[tri_index(i, i, dim_)];
          acc += 2.0 * s2 * gii * gii;
          for (int j = i + 1; j < dim_; ++j) {
            const double gij = g.coords[tri_index(i, j, dim_)];
            acc += 4.0 * s2 * gij * gij;
          }
        }
        return acc;
      }
    }
    throw config_error("covariance: unknown kind");
  }

  // Dense Sigma for the vector kinds (used by exact Gaussian moments).
  Eigen::MatrixXd dense_sigma() const {
    switch (kind_) {
      case Kind::Isotropic:
        return sigma2_ * Eigen::MatrixXd::Identity(dim_, dim_);
      case Kind::Diagonal: {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
        m.diagonal() = lambdas_;
        return m;
      }
      case Kind::DenseSPD: return sigma_mat_;
      case Kind::GOE:
        throw capability_error("covariance: no vector-space Sigma for the GOE kind");
    }
    throw config_error("covariance: unknown kind");
  }

  bool diagonal_structure() const {
    return kind_ == Kind::Isotropic || kind_ == Kind::Diagonal;
  }

  double diagonal_lambda(int i) const {
    return kind_ == Kind::Isotropic ? sigma2_ : lambdas_[i];
  }

 private:
  void check_norm_context() const {
    if (norm_ == NormKind::MatrixOperatorNorm && kind_ != Kind::GOE)
      throw config_error("covariance: matrix operator norm requires the GOE kind");
    if (kind_ == Kind::GOE && norm_ != NormKind::MatrixOperatorNorm)
      throw config_error("covariance: GOE requires the matrix operator norm");
  }

  void factorize() {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_mat_);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      return;
    }
    // Near-singular input: eigendecomposition with eigenvalues clamped at 0.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_mat_);
    if (es.info() != Eigen::Success)
      throw config_error("covariance: invalid covariance (factorization failed)");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(std::abs(ev.maxCoeff()), std::abs(ev.minCoeff()));
    if (ev.minCoeff() < -1e-10 * scale)
      throw config_error("covariance: invalid covariance (negative eigenvalue)");
    factor_ = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  double top_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_mat_, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  }

  Kind kind_ = Kind::Isotropic;
  NormKind norm_ = NormKind::Euclidean;
  int dim_ = 0;
  double sigma2_ = 0.0;
  double goe_sigma_ = 0.0;
  Eigen::VectorXd lambdas_;
  Eigen::MatrixXd sigma_mat_;
  Eigen::MatrixXd factor_;
};

}  // namespace shiftfunc
