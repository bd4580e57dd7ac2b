#include "embedrul/rul.hpp"

#include <algorithm>
#include <cmath>

namespace embedrul {

namespace {

void check_match_inputs(const HiCurve& test, const LibraryCurve& train,
                        std::size_t lag) {
  if (test.stride != 1 || train.curve.stride != 1)
    fail(ErrorKind::invalid_argument, "curve matching requires stride 1");
  if (test.values.empty() || train.curve.values.empty())
    fail(ErrorKind::invalid_argument, "curve matching requires non-empty curves");
  if (lag == 0) fail(ErrorKind::invalid_argument, "lag must be >= 1");
}

// Summed squared difference over the test curve's time range laid on the
// train curve at `lag`, or nullopt when the overlap is not total.
std::optional<double> lagged_ssd(const HiCurve& test, const LibraryCurve& train,
                                 std::size_t lag, std::size_t* terms) {
  const std::size_t t_star = test.end_time();
  if (lag + t_star > train.total_life) return std::nullopt;
  if (test.start + lag < train.curve.start) return std::nullopt;

  double acc = 0.0;
  for (std::size_t j = 0; j < test.values.size(); ++j) {
    const std::size_t k = test.start + j;              // absolute test time
    const std::size_t pos = k + lag - train.curve.start;  // train array index
    if (pos >= train.curve.values.size())
      fail(ErrorKind::invalid_state, "curve matching: train curve shorter than life");
    const double d = test.values[j] - train.curve.values[pos];
    acc += d * d;
  }
  *terms = test.values.size();
  return acc;
}

}  // namespace

std::optional<double> curve_similarity(const HiCurve& test,
                                       const LibraryCurve& train,
                                       std::size_t lag, double lambda,
                                       bool literal_norm) {
  check_match_inputs(test, train, lag);
  if (!(lambda > 0.0)) fail(ErrorKind::invalid_argument, "lambda must be > 0");
  std::size_t terms = 0;
  const std::optional<double> ssd = lagged_ssd(test, train, lag, &terms);
  if (!ssd) return std::nullopt;
  const double norm = literal_norm ? double(test.end_time()) : double(terms);
  return std::exp(-(*ssd / norm) / lambda);
}

std::optional<double> candidate_rul(const HiCurve& test,
                                    const LibraryCurve& train,
                                    std::size_t lag) {
  check_match_inputs(test, train, lag);
  const std::size_t t_star = test.end_time();
  if (lag + t_star > train.total_life) return std::nullopt;
  return double(train.total_life - t_star - lag);
}

double admit_and_average(const std::vector<RulCandidate>& candidates,
                         double alpha, std::vector<RulCandidate>& admitted) {
  if (candidates.empty())
    fail(ErrorKind::invalid_argument, "admit_and_average: no candidates");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    fail(ErrorKind::invalid_argument, "admit_and_average: alpha outside [0, 1]");

  double best = candidates[0].log_similarity;
  for (const RulCandidate& c : candidates) best = std::max(best, c.log_similarity);

  // s >= alpha * s_max  <=>  log s >= log s_max + log alpha. Working with
  // exponents keeps the test meaningful when every s underflows to 0.
  const double cutoff = best + std::log(alpha);  // alpha == 0 -> -inf, admit all

  admitted.clear();
  double weight_sum = 0.0;
  double value_sum = 0.0;
  for (const RulCandidate& c : candidates) {
    if (!(c.log_similarity >= cutoff)) continue;
    admitted.push_back(c);
    const double weight = std::exp(c.log_similarity - best);  // in (0, 1]
    weight_sum += weight;
    value_sum += weight * c.rul;
  }
  return value_sum / weight_sum;
}

namespace {

std::vector<RulCandidate> collect_candidates(const HiCurve& test,
                                             const CurveLibrary& library,
                                             const MatchConfig& config) {
  std::vector<RulCandidate> out;
  for (const LibraryCurve& train : library.curves) {
    for (std::size_t lag = 1; lag <= config.max_lag; ++lag) {
      std::size_t terms = 0;
      const std::optional<double> ssd = lagged_ssd(test, train, lag, &terms);
      if (!ssd) continue;
      const double norm =
          config.literal_norm ? double(test.end_time()) : double(terms);
      RulCandidate c;
      c.instance = train.curve.instance_id;
      c.lag = lag;
      c.log_similarity = -(*ssd / norm) / config.lambda;
      c.similarity = std::exp(c.log_similarity);
      c.rul = double(train.total_life - test.end_time() - lag);
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace

RulEstimate estimate_rul(const HiCurve& test, const CurveLibrary& library,
                         const MatchConfig& config) {
  if (library.curves.empty())
    fail(ErrorKind::invalid_state, "estimate_rul: empty curve library");
  if (config.max_lag == 0)
    fail(ErrorKind::invalid_argument, "estimate_rul: tau must be >= 1");
  if (!(config.lambda > 0.0))
    fail(ErrorKind::invalid_argument, "estimate_rul: lambda must be > 0");
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0))
    fail(ErrorKind::invalid_argument, "estimate_rul: alpha outside [0, 1]");
  if (config.r_max < 0.0)
    fail(ErrorKind::invalid_argument, "estimate_rul: negative r_max");
  if (test.values.empty())
    fail(ErrorKind::invalid_argument, "estimate_rul: empty test curve");

  RulEstimate result;
  std::vector<RulCandidate> candidates = collect_candidates(test, library, config);

  if (candidates.empty()) {
    // The test curve has outlived every train curve at every lag. Re-index
    // its most recent portion as if it were a fresh instance of the
    // longest span that can still fit, and match that.
    result.fallback_used = true;
    std::size_t longest = 0;
    for (const LibraryCurve& train : library.curves)
      longest = std::max(longest, train.total_life);
    if (longest >= test.start + 1) {
      const std::size_t span = longest - test.start;  // values that fit at lag 1
      if (span >= 1 && span < test.values.size()) {
        HiCurve recent = test;
        recent.values.assign(test.values.end() - span, test.values.end());
        candidates = collect_candidates(recent, library, config);
      }
    }
    if (candidates.empty()) {
      // Median terminal remaining life across full run-to-failure curves.
      result.value = 0.0;
      return result;
    }
  }

  result.value = admit_and_average(candidates, config.alpha, result.admitted);
  result.value = std::clamp(result.value, 0.0, config.r_max);
  return result;
}

}  // namespace embedrul
