#include "embedrul/matrix.hpp"

#include <cmath>
#include <cstdlib>

namespace embedrul {

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.data); }

void matvec(const Matrix& w, const Vec& x, Vec& y) {
  if (x.size() != w.cols) fail(ErrorKind::invalid_argument, "matvec: size mismatch");
  y.assign(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wr = w.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += wr[j] * x[j];
    y[i] = acc;
  }
}

void matvec_transpose_add(const Matrix& w, const Vec& x, Vec& y) {
  if (x.size() != w.rows || y.size() != w.cols)
    fail(ErrorKind::invalid_argument, "matvec_transpose_add: size mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wr = w.row(i);
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * wr[j];
  }
}

void outer_add(Matrix& w, const Vec& x, const Vec& y, double scale) {
  if (x.size() != w.rows || y.size() != w.cols)
    fail(ErrorKind::invalid_argument, "outer_add: size mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = scale * x[i];
    if (xi == 0.0) continue;
    double* wr = w.row(i);
    for (std::size_t j = 0; j < w.cols; ++j) wr[j] += xi * y[j];
  }
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "dot: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const Vec& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

Vec solve_linear(Matrix a, Vec b) {
  if (a.rows != a.cols || b.size() != a.rows)
    fail(ErrorKind::invalid_argument, "solve_linear: shape mismatch");
  const std::size_t n = a.rows;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a(perm[col], col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double mag = std::abs(a(perm[r], col));
      if (mag > best) {
        best = mag;
        piv = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best))
      fail(ErrorKind::numerical_error, "solve_linear: singular system");
    std::swap(perm[col], perm[piv]);

    const std::size_t prow = perm[col];
    const double diag = a(prow, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const std::size_t row = perm[r];
      const double f = a(row, col) / diag;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(row, c) -= f * a(prow, c);
      b[row] -= f * b[prow];
    }
  }

  Vec x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const std::size_t row = perm[i];
    double acc = b[row];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a(row, c) * x[c];
    x[i] = acc / a(row, i);
  }
  return x;
}

SymmetricEigen symmetric_eigen(Matrix a) {
  if (a.rows != a.cols) fail(ErrorKind::invalid_argument, "symmetric_eigen: not square");
  const std::size_t n = a.rows;
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto off_diag = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return s;
  };

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale += a(i, j) * a(i, j);
  const double tol = 1e-24 * (scale > 0.0 ? scale : 1.0);

  for (int sweep = 0; sweep < 128 && off_diag() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = a(i, i);

  // Sort eigenpairs by descending eigenvalue; stable index order on ties.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < n; ++j)
      if (out.values[order[j]] > out.values[order[best]]) best = j;
    std::swap(order[i], order[best]);
  }

  SymmetricEigen sorted;
  sorted.values.resize(n);
  sorted.vectors = Matrix(n, n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    sorted.values[k] = out.values[order[k]];
    for (std::size_t i = 0; i < n; ++i) sorted.vectors(i, k) = v(i, order[k]);
  }
  return sorted;
}

}  // namespace embedrul
