#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>

#include "embedrul/matrix.hpp"
#include "embedrul/pca.hpp"
#include "embedrul/rng.hpp"

using namespace embedrul;

TEST_CASE("matrix shape and access") {
  Matrix m(2, 3, 1.5);
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  m(1, 2) = -4.0;
  CHECK(m(1, 2) == -4.0);
  CHECK(m(0, 0) == 1.5);
  CHECK(m.data.size() == 6);

  Matrix z(2, 3);
  CHECK(z(1, 1) == 0.0);
  CHECK(m.same_shape(z));
  CHECK_FALSE(m.same_shape(Matrix(3, 2)));
}

TEST_CASE("matvec and transpose accumulate") {
  Matrix w(2, 3);
  // [[1,2,3],[4,5,6]]
  for (std::size_t i = 0; i < 6; ++i) w.data[i] = double(i + 1);
  Vec x = {1.0, 0.0, -1.0};
  Vec y;
  matvec(w, x, y);
  CHECK(y[0] == doctest::Approx(-2.0));
  CHECK(y[1] == doctest::Approx(-2.0));

  Vec back(3, 0.0);
  matvec_transpose_add(w, {1.0, 1.0}, back);  // columns summed
  CHECK(back[0] == doctest::Approx(5.0));
  CHECK(back[1] == doctest::Approx(7.0));
  CHECK(back[2] == doctest::Approx(9.0));
}

TEST_CASE("outer_add accumulates scaled outer product") {
  Matrix w(2, 2, 1.0);
  outer_add(w, {1.0, 2.0}, {3.0, 4.0}, 0.5);
  CHECK(w(0, 0) == doctest::Approx(1.0 + 0.5 * 3.0));
  CHECK(w(0, 1) == doctest::Approx(1.0 + 0.5 * 4.0));
  CHECK(w(1, 0) == doctest::Approx(1.0 + 0.5 * 6.0));
  CHECK(w(1, 1) == doctest::Approx(1.0 + 0.5 * 8.0));
}

TEST_CASE("dot and squared_norm") {
  CHECK(dot({1.0, 2.0, 3.0}, {4.0, -5.0, 6.0}) == doctest::Approx(12.0));
  CHECK(squared_norm({3.0, 4.0}) == doctest::Approx(25.0));
}

TEST_CASE("solve_linear solves and rejects singular systems") {
  Matrix a(2, 2);
  a(0, 0) = 2.0; a(0, 1) = 1.0;
  a(1, 0) = 1.0; a(1, 1) = 3.0;
  Vec x = solve_linear(a, {5.0, 10.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(3.0));

  Matrix s(2, 2);
  s(0, 0) = 1.0; s(0, 1) = 2.0;
  s(1, 0) = 2.0; s(1, 1) = 4.0;
  CHECK_THROWS_AS((void)solve_linear(s, {1.0, 1.0}), Error);
}

TEST_CASE("symmetric eigendecomposition: known 2x2") {
  Matrix a(2, 2);
  a(0, 0) = 1.25; a(0, 1) = 1.25;
  a(1, 0) = 1.25; a(1, 1) = 1.25;
  SymmetricEigen eig = symmetric_eigen(a);
  CHECK(eig.values[0] == doctest::Approx(2.5));
  CHECK(eig.values[1] == doctest::Approx(0.0).epsilon(1e-12));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(eig.vectors(0, 0)) == doctest::Approx(inv_sqrt2));
  CHECK(std::abs(eig.vectors(1, 0)) == doctest::Approx(inv_sqrt2));
}

TEST_CASE("symmetric eigendecomposition: reconstruction property") {
  Rng rng(5);
  const std::size_t n = 6;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      a(i, j) = a(j, i) = rng.uniform(-1.0, 1.0);
  SymmetricEigen eig = symmetric_eigen(a);

  // Descending eigenvalues, orthonormal vectors, A v = lambda v.
  for (std::size_t k = 1; k < n; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
  for (std::size_t p = 0; p < n; ++p) {
    Vec vp(n), avp(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) vp[i] = eig.vectors(i, p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) avp[i] += a(i, j) * vp[j];
    for (std::size_t i = 0; i < n; ++i)
      CHECK(avp[i] == doctest::Approx(eig.values[p] * vp[i]).epsilon(1e-9));
    for (std::size_t q = 0; q < n; ++q) {
      Vec vq(n);
      for (std::size_t i = 0; i < n; ++i) vq[i] = eig.vectors(i, q);
      CHECK(dot(vp, vq) == doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("pca recovers the diagonal cloud direction") {
  const std::vector<Vec> rows = {{1, 1}, {2, 2}, {3, 3}, {0, 0}};
  PcaModel m = fit_pca(rows, 1);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(m.mean[0] == doctest::Approx(1.5));
  CHECK(m.mean[1] == doctest::Approx(1.5));
  CHECK(m.basis(0, 0) == doctest::Approx(inv_sqrt2));  // sign fixed positive
  CHECK(m.basis(1, 0) == doctest::Approx(inv_sqrt2));
  CHECK(m.explained_variance[0] == doctest::Approx(2.5));
}

TEST_CASE("pca projection oracle") {
  PcaModel m;
  m.mean = {0.0, 0.0};
  m.basis = Matrix(2, 1);
  m.basis(0, 0) = 1.0 / std::sqrt(2.0);
  m.basis(1, 0) = 1.0 / std::sqrt(2.0);
  m.explained_variance = {1.0};
  Vec y = apply_pca(m, {3.0, 1.0});
  CHECK(y.size() == 1);
  CHECK(y[0] == doctest::Approx(2.8284271247461898).epsilon(1e-14));
}

TEST_CASE("pca basis is orthonormal and captures descending variance") {
  Rng rng(11);
  std::vector<Vec> rows;
  for (int i = 0; i < 200; ++i) {
    Vec r(5);
    const double a = rng.normal(), b = rng.normal();
    r[0] = 3.0 * a;
    r[1] = 2.0 * b + 0.1 * rng.normal();
    r[2] = a - b;
    r[3] = 0.5 * rng.normal();
    r[4] = 0.1 * rng.normal();
    rows.push_back(r);
  }
  PcaModel m = fit_pca(rows, 3);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t q = 0; q < 3; ++q) {
      double d = 0.0;
      for (std::size_t i = 0; i < 5; ++i) d += m.basis(i, p) * m.basis(i, q);
      CHECK(d == doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-10));
    }
  CHECK(m.explained_variance[0] >= m.explained_variance[1]);
  CHECK(m.explained_variance[1] >= m.explained_variance[2]);
  CHECK(m.explained_variance[2] >= 0.0);

  // Projected population variance along component p equals its eigenvalue.
  Vec proj0;
  for (const Vec& r : rows) proj0.push_back(apply_pca(m, r)[0]);
  double mean = 0.0;
  for (double v : proj0) mean += v;
  mean /= double(proj0.size());
  double var = 0.0;
  for (double v : proj0) var += (v - mean) * (v - mean);
  var /= double(proj0.size());
  CHECK(var == doctest::Approx(m.explained_variance[0]).epsilon(1e-9));
}

TEST_CASE("pca input validation") {
  CHECK_THROWS_AS((void)fit_pca({{1.0, 2.0}}, 1), Error);            // < 2 rows
  CHECK_THROWS_AS((void)fit_pca({{1.0, 2.0}, {2.0, 1.0}}, 3), Error);  // p > n
  CHECK_THROWS_AS((void)fit_pca({{1.0, 2.0}, {2.0, 1.0}}, 0), Error);
}

TEST_CASE("rng reproduces the reference stream") {
  Rng r(1);
  CHECK(r.next_u64() == 12966619160104079557ULL);
  CHECK(r.next_u64() == 9600361134598540522ULL);
  CHECK(r.next_u64() == 10590380919521690900ULL);

  Rng r2(1);
  CHECK(r2.uniform() == doctest::Approx(0.70292183315885048).epsilon(1e-15));
  CHECK(r2.uniform() == doctest::Approx(0.52043661993885693).epsilon(1e-15));

  CHECK(Rng::derive(42, 0) == 14216130040228855828ULL);
  CHECK(Rng::derive(42, 1) == 14820483933399919426ULL);

  Rng r3(7);
  CHECK(r3.normal() == doctest::Approx(-0.27902399102519809).epsilon(1e-12));
}

TEST_CASE("rng uniform and below stay in range") {
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const std::uint64_t k = r.below(7);
    CHECK(k < 7);
  }
  CHECK_THROWS_AS((void)r.below(0), Error);
  CHECK_THROWS_AS((void)r.uniform(1.0, 0.0), Error);
}

TEST_CASE("rng normal sample std matches sigma") {
  Rng r(17);
  const double sigma = 0.2;
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = r.normal(0.0, sigma);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sum_sq / n - mean * mean);
  CHECK(std >= 0.19);
  CHECK(std <= 0.21);
}

TEST_CASE("equal seeds give equal streams; different seeds differ") {
  Rng a(1234), b(1234), c(1235);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}
