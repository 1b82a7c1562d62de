#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "shiftfunc/errors.hpp"

namespace shiftfunc {

enum class NormKind { Euclidean, SupNorm, MatrixOperatorNorm };

inline std::string norm_kind_name(NormKind k) {
  switch (k) {
    case NormKind::Euclidean: return "euclidean";
    case NormKind::SupNorm: return "sup";
    case NormKind::MatrixOperatorNorm: return "matrix_operator";
  }
  return "?";
}

inline int tri_size(int d) { return d * (d + 1) / 2; }

// Row-major upper-triangle storage: (0,0),(0,1),...,(0,d-1),(1,1),...,(d-1,d-1).
inline int tri_index(int i, int j, int d) {
  return i * d - i * (i - 1) / 2 + (j - i);
}

// A point of the ambient space. Either a plain vector in R^d, or a symmetric
// d x d matrix stored as its vectorized upper triangle (matrix_view = true,
// coords length d(d+1)/2).
struct Point {
  Eigen::VectorXd coords;
  bool matrix_view = false;
  int matrix_dim = 0;

  static Point vec(Eigen::VectorXd v) {
    Point p;
    p.coords = std::move(v);
    return p;
  }

  static Point zeros_like_dim(int storage_dim, bool matrix, int mat_dim) {
    Point p;
    p.coords = Eigen::VectorXd::Zero(storage_dim);
    p.matrix_view = matrix;
    p.matrix_dim = mat_dim;
    return p;
  }

  static Point sym(const Eigen::MatrixXd& m) {
    const int d = static_cast<int>(m.rows());
    Point p;
    p.matrix_view = true;
    p.matrix_dim = d;
    p.coords.resize(tri_size(d));
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) p.coords[tri_index(i, j, d)] = m(i, j);
    return p;
  }

  int storage_dim() const { return static_cast<int>(coords.size()); }

  Eigen::MatrixXd to_matrix() const {
    if (!matrix_view) throw capability_error("point: to_matrix requires the matrix view");
    Eigen::MatrixXd m(matrix_dim, matrix_dim);
    for (int i = 0; i < matrix_dim; ++i)
      for (int j = i; j < matrix_dim; ++j)
        m(i, j) = m(j, i) = coords[tri_index(i, j, matrix_dim)];
    return m;
  }

  void validate() const {
    if (!coords.allFinite()) throw config_error("point: non-finite coordinates");
    if (matrix_view && storage_dim() != tri_size(matrix_dim))
      throw config_error("point: matrix view requires length d(d+1)/2");
  }

  Point& operator+=(const Point& o) {
    coords += o.coords;
    return *this;
  }
  friend Point operator+(Point a, const Point& b) {
    a += b;
    return a;
  }
  friend Point operator-(Point a, const Point& b) {
    a.coords -= b.coords;
    return a;
  }
  friend Point operator*(double c, Point p) {
    p.coords *= c;
    return p;
  }
};

// Duality pairing: dot product for vectors, tr(AB) for symmetric matrices
// (diagonal entries once, off-diagonal twice).
inline double pairing(const Point& a, const Point& b) {
  if (!a.matrix_view) return a.coords.dot(b.coords);
  const int d = a.matrix_dim;
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    acc += a.coords[tri_index(i, i, d)] * b.coords[tri_index(i, i, d)];
    for (int j = i + 1; j < d; ++j)
      acc += 2.0 * a.coords[tri_index(i, j, d)] * b.coords[tri_index(i, j, d)];
  }
  return acc;
}

inline double operator_norm_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

// Norm of a point in the given context. Euclidean on the matrix view means
// the Frobenius norm of the symmetric matrix.
inline double point_norm(const Point& p, NormKind kind) {
  switch (kind) {
    case NormKind::Euclidean:
      if (!p.matrix_view) return p.coords.norm();
      return std::sqrt(pairing(p, p));
    case NormKind::SupNorm:
      if (p.matrix_view)
        throw capability_error("norm: sup norm is not defined on the matrix view");
      return p.coords.cwiseAbs().maxCoeff();
    case NormKind::MatrixOperatorNorm:
      if (!p.matrix_view)
        throw capability_error("norm: matrix operator norm requires the matrix view");
      return operator_norm_sym(p.to_matrix());
  }
  throw config_error("norm: unknown kind");
}

}  // namespace shiftfunc
