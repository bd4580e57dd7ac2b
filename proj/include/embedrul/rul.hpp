#pragma once

#include <optional>

#include "embedrul/health.hpp"

namespace embedrul {

/// A run-to-failure health curve from the training fleet together with the
/// instance's total life T (curve end time == T for full lives).
struct LibraryCurve {
  HiCurve curve;
  std::size_t total_life = 0;
};

struct CurveLibrary {
  std::vector<LibraryCurve> curves;
};

struct MatchConfig {
  std::size_t max_lag = 30;  // tau: lags 1..tau are searched
  double lambda = 0.005;     // similarity bandwidth
  double alpha = 0.95;       // admission threshold relative to the best pair
  double r_max = 120.0;      // estimate ceiling
  // Divide the summed squared difference by the test instance's elapsed
  // life T* instead of the number of summed terms.
  bool literal_norm = false;
};

/// Similarity of the test curve laid over the train curve at lag `lag`:
/// exp(−(1/M) Σ_k (test_k − train_{k+lag})² / lambda), summed over the
/// test curve's full time range [start, T*]. M is the term count (or T*
/// under literal_norm). Returns nullopt when the lagged test curve does
/// not fit inside the train curve (no-candidate, not an error). Both
/// curves must have stride 1.
std::optional<double> curve_similarity(const HiCurve& test,
                                       const LibraryCurve& train,
                                       std::size_t lag, double lambda,
                                       bool literal_norm);

/// Candidate estimate for a valid (train, lag) pair: T − T* − lag, the
/// train instance's remaining life past the aligned test end. nullopt when
/// the alignment is invalid.
std::optional<double> candidate_rul(const HiCurve& test,
                                    const LibraryCurve& train,
                                    std::size_t lag);

struct RulCandidate {
  std::string instance;
  std::size_t lag = 0;
  double similarity = 0.0;      // may underflow to 0 in reports
  double log_similarity = 0.0;  // exact exponent, used for weighting
  double rul = 0.0;
};

struct RulEstimate {
  double value = 0.0;
  std::vector<RulCandidate> admitted;
  bool fallback_used = false;
};

/// Similarity-weighted average of the candidates whose similarity is
/// >= alpha times the best one. Weighting runs in log space, so uniform
/// rescaling of the similarities cannot change the result. Returns the
/// admitted subset through `admitted`.
double admit_and_average(const std::vector<RulCandidate>& candidates,
                         double alpha, std::vector<RulCandidate>& admitted);

/// Full estimate: searches every (train curve, lag in 1..tau) pair,
/// averages the admitted candidates, and clips to [0, r_max]. When no pair
/// aligns (test already longer than the fleet), retries with the test
/// curve's recent portion re-indexed to the longest fitting span; if even
/// that fails, falls back to the library's median terminal health-state
/// RUL, which is 0 for run-to-failure curves. Both retries set
/// fallback_used.
RulEstimate estimate_rul(const HiCurve& test, const CurveLibrary& library,
                         const MatchConfig& config);

}  // namespace embedrul
