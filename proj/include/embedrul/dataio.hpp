#pragma once

#include <iosfwd>
#include <utility>

#include "embedrul/series.hpp"

namespace embedrul {

/// Parses turbofan-style run-to-failure text: whitespace-separated rows of
/// unit id, cycle index, then exactly 24 sensor readings. Rows may be
/// grouped or interleaved by unit; each unit's cycles must start at 1 and
/// ascend. Returned series are ordered by first appearance, with
/// timestamps = cycle − 1 and all readings present.
std::vector<MultivariateSeries> parse_cmapss(std::istream& in);

/// Parses a ground-truth file: one non-negative integer per line, aligned
/// with test-instance order.
std::vector<long long> parse_rul_file(std::istream& in);

/// Generic CSV: header "instance,timestamp,<sensor names...>"; an empty
/// cell is a missing reading. Timestamps are shifted per instance so the
/// first row sits at 0.
std::vector<MultivariateSeries> parse_csv(std::istream& in);

/// Inverse of parse_csv; missing readings become empty cells. Numbers are
/// printed with round-trip precision.
void write_csv(std::ostream& out, const std::vector<MultivariateSeries>& list);

/// Per-dimension z-scoring fitted on pooled present readings. Dimensions
/// whose population (1/N) standard deviation is <= constant_tol, or that
/// have no present readings at all, are dropped. `kept` maps output
/// dimension -> original index.
struct Normalizer {
  Vec mean;                       // per original dimension
  Vec stddev;                     // per original dimension
  std::vector<std::size_t> kept;  // retained original indices, ascending

  MultivariateSeries apply(const MultivariateSeries& s) const;
};

Normalizer fit_normalizer(const std::vector<MultivariateSeries>& list,
                          double constant_tol);

/// Presence mask and missing-bridging time deltas for a series, both T × n.
/// delta(0, j) = 0; for later rows delta carries the elapsed time since
/// sensor j was last observed: it resets to the step gap after a present
/// reading and accumulates across missing ones.
std::pair<Matrix, Matrix> build_mask_delta(const MultivariateSeries& s);

/// Fixed-length window of model input: values (missing entries filled with
/// 0), presence mask, and deltas, each w × k. end_index is the 1-based time
/// index of the last row.
struct AugmentedWindow {
  Matrix values;
  Matrix mask;
  Matrix delta;
  std::size_t end_index = 0;
};

/// All windows of length w with ends at t = w, w+stride, ... <= T.
/// Returns an empty vector when T < w (short series are unestimable, not
/// an error).
std::vector<AugmentedWindow> make_windows(const MultivariateSeries& s,
                                          std::size_t w, std::size_t stride);

/// Buckets rows by floor(timestamp / bucket) and emits, per bucket and per
/// original sensor, the min / max / mean / population-std of its present
/// readings (4n output dimensions, grouped per sensor). A bucket with no
/// present reading for a sensor yields 4 missing entries. Output
/// timestamps are the bucket indices 0, 1, 2, ...
MultivariateSeries downsample_daily(const MultivariateSeries& s, double bucket);

}  // namespace embedrul
