#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "embedrul/matrix.hpp"
#include "embedrul/rng.hpp"

namespace embedrul {

/// One instance's multivariate sensor record. Time indices are 1-based in
/// the API (t = 1..T); storage rows are 0-based. Timestamps are elapsed
/// time: strictly increasing with timestamps[0] == 0. `present(i, j)` is 1
/// when sensor j was observed at row i, 0 when missing; missing entries of
/// `values` hold 0.
struct MultivariateSeries {
  std::string instance_id;
  Vec timestamps;   // T entries
  Matrix values;    // T × n
  Matrix present;   // T × n, entries 0 or 1

  std::size_t length() const { return timestamps.size(); }
  std::size_t dims() const { return values.cols; }

  /// Checks the structural invariants above; throws format_error on
  /// violation. Parsers and generators call this before returning.
  void validate() const;
};

/// Adds independent N(0, sigma²) noise to every present reading; missing
/// entries are untouched and consume no draws. Draw order is row-major
/// (time outer, sensor inner), so equal (seed, sigma, series) give
/// bitwise-equal output. sigma == 0 returns the input unchanged.
MultivariateSeries add_gaussian_noise(const MultivariateSeries& s, double sigma,
                                      Rng& rng);

/// Keeps the first t rows (1 <= t <= T).
MultivariateSeries truncate_at(const MultivariateSeries& s, std::size_t t);

}  // namespace embedrul
