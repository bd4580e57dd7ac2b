#pragma once

#include <cstddef>
#include <vector>

#include "embedrul/common.hpp"

namespace embedrul {

using Vec = std::vector<double>;

/// Dense matrix of 64-bit floats stored row-major.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // rows * cols entries, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  std::size_t size() const { return data.size(); }
  void set_zero() { data.assign(data.size(), 0.0); }
};

bool all_finite(const Vec& v);
bool all_finite(const Matrix& m);

/// y = W x. Requires x.size() == W.cols; y is resized to W.rows.
void matvec(const Matrix& w, const Vec& x, Vec& y);

/// y += Wᵀ x. Requires x.size() == W.rows and y.size() == W.cols.
void matvec_transpose_add(const Matrix& w, const Vec& x, Vec& y);

/// W += scale · x yᵀ. Requires x.size() == W.rows and y.size() == W.cols.
void outer_add(Matrix& w, const Vec& x, const Vec& y, double scale = 1.0);

double dot(const Vec& a, const Vec& b);
double squared_norm(const Vec& v);

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// A must be square; a vanishing pivot raises numerical_error.
Vec solve_linear(Matrix a, Vec b);

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues (descending) and matching unit-length eigenvectors
/// as columns of `vectors`. Deterministic: no pivot search randomness.
struct SymmetricEigen {
  Vec values;
  Matrix vectors;  // n × n, column k pairs with values[k]
};
SymmetricEigen symmetric_eigen(Matrix a);

}  // namespace embedrul
