#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "embedrul/dataio.hpp"
#include "embedrul/series.hpp"

using namespace embedrul;

namespace {

std::string cmapss_row(int unit, int cycle, double base) {
  std::ostringstream out;
  out << unit << " " << cycle;
  for (int s = 0; s < 24; ++s) out << " " << base + s;
  out << "\n";
  return out.str();
}

MultivariateSeries tiny_series(std::size_t t, std::size_t n, double scale) {
  MultivariateSeries s;
  s.instance_id = "tiny";
  s.values = Matrix(t, n);
  s.present = Matrix(t, n, 1.0);
  for (std::size_t i = 0; i < t; ++i) {
    s.timestamps.push_back(double(i));
    for (std::size_t j = 0; j < n; ++j)
      s.values(i, j) = scale * double(i + 1) + double(j);
  }
  return s;
}

}  // namespace

TEST_CASE("cmapss parsing: interleaved units keep first-appearance order") {
  std::string text = cmapss_row(3, 1, 0.0) + cmapss_row(8, 1, 10.0) +
                     cmapss_row(3, 2, 1.0) + cmapss_row(8, 2, 11.0) +
                     cmapss_row(3, 3, 2.0);
  std::istringstream in(text);
  auto series = parse_cmapss(in);
  REQUIRE(series.size() == 2);
  CHECK(series[0].instance_id == "3");
  CHECK(series[1].instance_id == "8");
  CHECK(series[0].length() == 3);
  CHECK(series[1].length() == 2);
  CHECK(series[0].dims() == 24);
  CHECK(series[0].timestamps[0] == 0.0);
  CHECK(series[0].timestamps[2] == 2.0);
  CHECK(series[0].values(1, 0) == 1.0);
  CHECK(series[1].values(0, 23) == 33.0);
}

TEST_CASE("cmapss parsing rejects malformed input") {
  {
    std::istringstream in(cmapss_row(1, 2, 0.0));  // first cycle must be 1
    CHECK_THROWS_AS((void)parse_cmapss(in), Error);
  }
  {
    std::istringstream in(cmapss_row(1, 1, 0.0) + cmapss_row(1, 1, 1.0));
    CHECK_THROWS_AS((void)parse_cmapss(in), Error);  // cycles not ascending
  }
  {
    std::istringstream in("1 1 2.0 3.0\n");  // wrong column count
    CHECK_THROWS_AS((void)parse_cmapss(in), Error);
  }
  {
    std::istringstream in("");
    CHECK_THROWS_AS((void)parse_cmapss(in), Error);  // no instances
  }
}

TEST_CASE("rul file parsing") {
  std::istringstream in("112\n98\n0\n");
  auto rul = parse_rul_file(in);
  REQUIRE(rul.size() == 3);
  CHECK(rul[0] == 112);
  CHECK(rul[2] == 0);

  std::istringstream bad("5\n-3\n");
  CHECK_THROWS_AS((void)parse_rul_file(bad), Error);
}

TEST_CASE("csv round-trip preserves values and missingness") {
  MultivariateSeries s = tiny_series(4, 2, 0.125);
  s.present(2, 1) = 0.0;
  s.values(2, 1) = 0.0;  // missing entries hold 0
  s.values(1, 0) = 1.0 / 3.0;

  std::ostringstream out;
  write_csv(out, {s});
  std::istringstream in(out.str());
  auto back = parse_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].instance_id == "tiny");
  CHECK(back[0].length() == 4);
  CHECK(back[0].dims() == 2);
  CHECK(back[0].present(2, 1) == 0.0);
  CHECK(back[0].values(2, 1) == 0.0);
  CHECK(back[0].values(1, 0) == s.values(1, 0));  // bitwise via %.17g
  CHECK(back[0].timestamps == s.timestamps);
}

TEST_CASE("csv timestamps are shifted to start at zero") {
  std::istringstream in(
      "instance,timestamp,a\n"
      "u,100,1.0\n"
      "u,101.5,2.0\n");
  auto series = parse_csv(in);
  REQUIRE(series.size() == 1);
  CHECK(series[0].timestamps[0] == 0.0);
  CHECK(series[0].timestamps[1] == 1.5);
}

TEST_CASE("csv rejects malformed input") {
  {
    std::istringstream in("wrong,header\n");
    CHECK_THROWS_AS((void)parse_csv(in), Error);
  }
  {
    std::istringstream in("instance,timestamp,a\nu,0,1.0\nu,0,2.0\n");
    CHECK_THROWS_AS((void)parse_csv(in), Error);  // non-increasing timestamps
  }
  {
    std::istringstream in("instance,timestamp,a\nu,0,abc\n");
    CHECK_THROWS_AS((void)parse_csv(in), Error);
  }
}

TEST_CASE("normalizer: population convention and constant dropping") {
  MultivariateSeries s;
  s.instance_id = "n";
  s.timestamps = {0, 1};
  s.values = Matrix(2, 3);
  s.present = Matrix(2, 3, 1.0);
  s.values(0, 0) = 0.0; s.values(1, 0) = 2.0;   // mean 1, population std 1
  s.values(0, 1) = 5.0; s.values(1, 1) = 5.0;   // constant: dropped
  s.values(0, 2) = 1.0; s.values(1, 2) = 3.0;

  Normalizer norm = fit_normalizer({s}, 1e-8);
  REQUIRE(norm.kept.size() == 2);
  CHECK(norm.kept[0] == 0);
  CHECK(norm.kept[1] == 2);
  CHECK(norm.mean[0] == doctest::Approx(1.0));
  CHECK(norm.stddev[0] == doctest::Approx(1.0));

  MultivariateSeries z = norm.apply(s);
  CHECK(z.dims() == 2);
  CHECK(z.values(0, 0) == doctest::Approx(-1.0));
  CHECK(z.values(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("normalizer skips missing readings and can degenerate") {
  MultivariateSeries s;
  s.instance_id = "m";
  s.timestamps = {0, 1, 2};
  s.values = Matrix(3, 1);
  s.present = Matrix(3, 1, 1.0);
  s.values(0, 0) = 0.0;
  s.values(1, 0) = 100.0;  // missing: must not affect the fit
  s.present(1, 0) = 0.0;
  s.values(2, 0) = 2.0;
  Normalizer norm = fit_normalizer({s}, 1e-8);
  CHECK(norm.mean[0] == doctest::Approx(1.0));
  CHECK(norm.stddev[0] == doctest::Approx(1.0));

  MultivariateSeries c;  // all dimensions constant -> nothing kept
  c.instance_id = "c";
  c.timestamps = {0, 1};
  c.values = Matrix(2, 1, 7.0);
  c.present = Matrix(2, 1, 1.0);
  CHECK_THROWS_AS((void)fit_normalizer({c}, 1e-8), Error);
}

TEST_CASE("mask and delta channels") {
  MultivariateSeries s;
  s.instance_id = "d";
  s.timestamps = {0, 1, 2};
  s.values = Matrix(3, 2, 1.0);
  s.present = Matrix(3, 2, 1.0);
  s.present(1, 1) = 0.0;  // sensor 2 missing at t=2 (row index 1)

  auto [mask, delta] = build_mask_delta(s);
  CHECK(mask(1, 1) == 0.0);
  CHECK(mask(0, 1) == 1.0);

  // All-present column: delta = {0, gap, gap}.
  CHECK(delta(0, 0) == 0.0);
  CHECK(delta(1, 0) == 1.0);
  CHECK(delta(2, 0) == 1.0);
  // Missing at t=2 accumulates into t=3: 1 + 1 = 2.
  CHECK(delta(1, 1) == 1.0);
  CHECK(delta(2, 1) == 2.0);
}

TEST_CASE("windowing counts and stride") {
  MultivariateSeries s = tiny_series(100, 1, 0.01);
  auto windows = make_windows(s, 30, 1);
  CHECK(windows.size() == 71);  // T - w + 1
  CHECK(windows.front().end_index == 30);
  CHECK(windows.back().end_index == 100);

  MultivariateSeries s36 = tiny_series(36, 1, 0.01);
  auto strided = make_windows(s36, 30, 3);
  REQUIRE(strided.size() == 3);
  CHECK(strided[0].end_index == 30);
  CHECK(strided[1].end_index == 33);
  CHECK(strided[2].end_index == 36);

  CHECK(make_windows(tiny_series(5, 1, 1.0), 30, 1).empty());
}

TEST_CASE("windows zero-fill missing values and carry mask and delta") {
  MultivariateSeries s = tiny_series(4, 1, 1.0);
  s.present(2, 0) = 0.0;
  s.values(2, 0) = 99.0;  // parser would store 0; windowing must not leak it
  auto windows = make_windows(s, 3, 1);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].values(2, 0) == 0.0);
  CHECK(windows[0].mask(2, 0) == 0.0);
  CHECK(windows[1].values(1, 0) == 0.0);
  CHECK(windows[1].delta(2, 0) == 2.0);  // gap bridged the missing row
}

TEST_CASE("bucket downsampling emits 4 statistics per sensor") {
  MultivariateSeries s;
  s.instance_id = "b";
  s.timestamps = {0.0, 0.5, 1.0, 1.5};
  s.values = Matrix(4, 1);
  s.present = Matrix(4, 1, 1.0);
  s.values(0, 0) = 1.0;
  s.values(1, 0) = 3.0;   // bucket 0: {1, 3}
  s.values(2, 0) = 5.0;
  s.present(3, 0) = 0.0;  // bucket 1: {5}

  MultivariateSeries d = downsample_daily(s, 1.0);
  CHECK(d.dims() == 4);  // min, max, mean, std per original sensor
  CHECK(d.length() == 2);
  CHECK(d.timestamps[0] == 0.0);
  CHECK(d.timestamps[1] == 1.0);
  CHECK(d.values(0, 0) == doctest::Approx(1.0));  // min
  CHECK(d.values(0, 1) == doctest::Approx(3.0));  // max
  CHECK(d.values(0, 2) == doctest::Approx(2.0));  // mean
  CHECK(d.values(0, 3) == doctest::Approx(1.0));  // population std
  CHECK(d.values(1, 3) == doctest::Approx(0.0));  // singleton bucket
  CHECK(d.present(1, 0) == 1.0);
}

TEST_CASE("downsampling marks empty buckets missing") {
  MultivariateSeries s;
  s.instance_id = "e";
  s.timestamps = {0.0, 2.5};
  s.values = Matrix(2, 1, 1.0);
  s.present = Matrix(2, 1);
  s.present(0, 0) = 1.0;
  s.present(1, 0) = 0.0;  // bucket 2's only reading is absent

  MultivariateSeries d = downsample_daily(s, 1.0);
  REQUIRE(d.length() == 3);  // gapless buckets 0..2
  for (std::size_t q = 0; q < 4; ++q) {
    CHECK(d.present(1, q) == 0.0);  // bucket with no rows at all
    CHECK(d.present(2, q) == 0.0);  // bucket whose readings are all missing
    CHECK(d.values(1, q) == 0.0);
  }
  CHECK(d.present(0, 0) == 1.0);
}

TEST_CASE("truncate_at keeps a prefix") {
  MultivariateSeries s = tiny_series(192, 2, 1.0);
  MultivariateSeries t = truncate_at(s, 150);
  CHECK(t.length() == 150);
  CHECK(t.values(149, 0) == s.values(149, 0));
  CHECK_THROWS_AS((void)truncate_at(s, 0), Error);
  CHECK_THROWS_AS((void)truncate_at(s, 193), Error);
}

TEST_CASE("gaussian noise skips missing entries and is seed-deterministic") {
  MultivariateSeries s = tiny_series(10, 2, 1.0);
  s.present(4, 1) = 0.0;
  s.values(4, 1) = 0.0;

  Rng r1(99), r2(99);
  MultivariateSeries a = add_gaussian_noise(s, 0.3, r1);
  MultivariateSeries b = add_gaussian_noise(s, 0.3, r2);
  CHECK(a.values.data == b.values.data);       // bitwise
  CHECK(a.values(4, 1) == 0.0);                // missing untouched
  CHECK(a.values(0, 0) != s.values(0, 0));

  Rng r3(99);
  CHECK(add_gaussian_noise(s, 0.0, r3).values.data == s.values.data);
  Rng r4(99);
  CHECK_THROWS_AS((void)add_gaussian_noise(s, -0.1, r4), Error);
}
