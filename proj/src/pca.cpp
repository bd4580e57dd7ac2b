#include "embedrul/pca.hpp"

#include <cmath>

namespace embedrul {

PcaModel fit_pca(const std::vector<Vec>& rows, std::size_t p) {
  if (rows.size() < 2)
    fail(ErrorKind::insufficient_data, "fit_pca: need at least 2 rows");
  const std::size_t n = rows[0].size();
  if (n == 0) fail(ErrorKind::invalid_argument, "fit_pca: zero-width rows");
  if (p < 1 || p > n)
    fail(ErrorKind::invalid_argument, "fit_pca: p out of range [1, n]");
  for (const Vec& r : rows) {
    if (r.size() != n) fail(ErrorKind::invalid_argument, "fit_pca: ragged rows");
    if (!all_finite(r)) fail(ErrorKind::invalid_argument, "fit_pca: non-finite entry");
  }

  PcaModel model;
  model.mean.assign(n, 0.0);
  for (const Vec& r : rows)
    for (std::size_t j = 0; j < n; ++j) model.mean[j] += r[j];
  for (double& m : model.mean) m /= double(rows.size());

  Matrix cov(n, n, 0.0);
  for (const Vec& r : rows) {
    for (std::size_t i = 0; i < n; ++i) {
      const double di = r[i] - model.mean[i];
      if (di == 0.0) continue;
      for (std::size_t j = i; j < n; ++j)
        cov(i, j) += di * (r[j] - model.mean[j]);
    }
  }
  const double inv_n = 1.0 / double(rows.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      cov(i, j) *= inv_n;
      cov(j, i) = cov(i, j);
    }

  SymmetricEigen eig = symmetric_eigen(cov);

  model.basis = Matrix(n, p, 0.0);
  model.explained_variance.assign(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    // Covariance eigenvalues are non-negative up to rounding; clamp.
    model.explained_variance[k] = eig.values[k] > 0.0 ? eig.values[k] : 0.0;

    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double mag = std::abs(eig.vectors(i, k));
      if (mag > best) {
        best = mag;
        arg = i;
      }
    }
    if (!(best > 0.0))
      fail(ErrorKind::numerical_error, "fit_pca: zero eigenvector");
    const double sign = eig.vectors(arg, k) >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < n; ++i)
      model.basis(i, k) = sign * eig.vectors(i, k);
  }
  return model;
}

Vec apply_pca(const PcaModel& model, const Vec& x) {
  const std::size_t n = model.input_dim();
  if (x.size() != n)
    fail(ErrorKind::invalid_argument, "apply_pca: dimension mismatch");
  Vec y(model.components(), 0.0);
  for (std::size_t k = 0; k < model.components(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += model.basis(i, k) * (x[i] - model.mean[i]);
    y[k] = acc;
  }
  return y;
}

}  // namespace embedrul
