#pragma once

// Shape-checked vector/matrix helpers. Storage and dense products are
// Eigen (64-bit floats, row-major batches); every entry point validates
// shapes and throws instead of broadcasting.

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "oneflow/rng.hpp"

namespace oneflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  require(a.cols() == x.size(), "matvec: inner dimensions differ");
  return a * x;
}

inline void axpy(double alpha, const Vector& x, Vector& y) {
  require(x.size() == y.size(), "axpy: lengths differ");
  y += alpha * x;
}

inline Vector hadamard(const Vector& a, const Vector& b) {
  require(a.size() == b.size(), "hadamard: lengths differ");
  return a.cwiseProduct(b);
}

inline double l2_norm(const Vector& x) { return x.norm(); }

// Column means of a sample matrix (rows = samples).
inline Vector sample_mean(const Matrix& x) {
  require(x.rows() >= 1, "sample_mean: empty sample");
  return x.colwise().mean();
}

// Unbiased sample covariance (rows = samples).
inline Matrix sample_cov(const Matrix& x) {
  require(x.rows() >= 2, "sample_cov: need at least 2 samples");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / double(x.rows() - 1);
}

inline Vector normal_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace oneflow
