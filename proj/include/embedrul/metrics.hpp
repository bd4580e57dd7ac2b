#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "embedrul/matrix.hpp"

namespace embedrul {

/// Error-window bounds, in the same time unit as the estimates. An error
/// Δ = estimate − actual counts as on-time when −tau1 <= Δ <= tau2; early
/// errors (Δ < 0) are penalized more gently than late ones.
struct MetricConfig {
  double tau1 = 13.0;
  double tau2 = 10.0;
};

struct MetricsReport {
  double timeliness = 0.0;     // S: sum of exp(|Δ|/tau) − 1 penalties
  double accuracy_pct = 0.0;   // share of Δ inside [−tau1, tau2]
  double mae = 0.0;
  double mse = 0.0;
  double mape_pct = 0.0;       // zero-actual instances excluded
  double fpr_pct = 0.0;        // Δ < −tau1 (too early), strict
  double fnr_pct = 0.0;        // Δ > tau2 (too late), strict
  std::size_t n = 0;
  std::size_t mape_excluded = 0;
};

/// S = Σ exp(gamma |Δ|) − 1 with gamma = 1/tau1 for early errors and
/// 1/tau2 for late ones (Δ = 0 uses the late branch; its term is 0).
double timeliness_score(const Vec& deltas, const MetricConfig& config);

/// Percentage of errors inside the closed window [−tau1, tau2].
double accuracy(const Vec& deltas, const MetricConfig& config);

struct ErrorStats {
  double mae = 0.0;
  double mse = 0.0;
  double mape_pct = 0.0;
  std::size_t mape_excluded = 0;
};

/// MAE, MSE, and MAPE of the errors; MAPE divides |Δ| by the actual value
/// and skips (counts) instances whose actual is 0.
ErrorStats error_stats(const Vec& deltas, const Vec& actuals);

/// (FPR%, FNR%): shares of strictly-too-early and strictly-too-late
/// errors. Together with accuracy these partition every instance, so
/// accuracy + FPR + FNR == 100.
std::pair<double, double> classification_rates(const Vec& deltas,
                                               const MetricConfig& config);

/// All metrics of estimates vs actuals (equal non-empty lengths).
MetricsReport compute_metrics(const Vec& estimates, const Vec& actuals,
                              const MetricConfig& config);

std::string format_metrics_table(const MetricsReport& report);
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

}  // namespace embedrul
