#include "embedrul/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace embedrul {

namespace {

void check_config(const MetricConfig& config) {
  if (!(config.tau1 > 0.0) || !(config.tau2 > 0.0))
    fail(ErrorKind::invalid_argument, "metrics: tau1 and tau2 must be > 0");
}

void check_nonempty(const Vec& deltas) {
  if (deltas.empty()) fail(ErrorKind::invalid_argument, "metrics: no instances");
}

}  // namespace

double timeliness_score(const Vec& deltas, const MetricConfig& config) {
  check_config(config);
  check_nonempty(deltas);
  double s = 0.0;
  for (double d : deltas) {
    const double gamma = d < 0.0 ? 1.0 / config.tau1 : 1.0 / config.tau2;
    s += std::exp(gamma * std::abs(d)) - 1.0;
  }
  return s;
}

double accuracy(const Vec& deltas, const MetricConfig& config) {
  check_config(config);
  check_nonempty(deltas);
  std::size_t on_time = 0;
  for (double d : deltas)
    if (d >= -config.tau1 && d <= config.tau2) ++on_time;
  return 100.0 * double(on_time) / double(deltas.size());
}

ErrorStats error_stats(const Vec& deltas, const Vec& actuals) {
  check_nonempty(deltas);
  if (deltas.size() != actuals.size())
    fail(ErrorKind::invalid_argument, "error_stats: size mismatch");
  ErrorStats stats;
  double ape_sum = 0.0;
  std::size_t ape_n = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    stats.mae += std::abs(deltas[i]);
    stats.mse += deltas[i] * deltas[i];
    if (actuals[i] == 0.0) {
      ++stats.mape_excluded;
    } else {
      ape_sum += std::abs(deltas[i]) / std::abs(actuals[i]);
      ++ape_n;
    }
  }
  stats.mae /= double(deltas.size());
  stats.mse /= double(deltas.size());
  stats.mape_pct = ape_n > 0 ? 100.0 * ape_sum / double(ape_n) : 0.0;
  return stats;
}

std::pair<double, double> classification_rates(const Vec& deltas,
                                               const MetricConfig& config) {
  check_config(config);
  check_nonempty(deltas);
  std::size_t early = 0, late = 0;
  for (double d : deltas) {
    if (d < -config.tau1)
      ++early;
    else if (d > config.tau2)
      ++late;
  }
  const double n = double(deltas.size());
  return {100.0 * double(early) / n, 100.0 * double(late) / n};
}

MetricsReport compute_metrics(const Vec& estimates, const Vec& actuals,
                              const MetricConfig& config) {
  if (estimates.size() != actuals.size())
    fail(ErrorKind::invalid_argument, "compute_metrics: size mismatch");
  check_nonempty(estimates);
  Vec deltas(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i)
    deltas[i] = estimates[i] - actuals[i];

  MetricsReport report;
  report.n = deltas.size();
  report.timeliness = timeliness_score(deltas, config);
  report.accuracy_pct = accuracy(deltas, config);
  const ErrorStats stats = error_stats(deltas, actuals);
  report.mae = stats.mae;
  report.mse = stats.mse;
  report.mape_pct = stats.mape_pct;
  report.mape_excluded = stats.mape_excluded;
  const auto [fpr, fnr] = classification_rates(deltas, config);
  report.fpr_pct = fpr;
  report.fnr_pct = fnr;
  return report;
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  const std::pair<std::string, std::string> rows[] = {
      {"S", fixed2(report.timeliness)},
      {"A (%)", fixed2(report.accuracy_pct)},
      {"MAE", fixed2(report.mae)},
      {"MSE", fixed2(report.mse)},
      {"MAPE (%)", fixed2(report.mape_pct)},
      {"FPR (%)", fixed2(report.fpr_pct)},
      {"FNR (%)", fixed2(report.fnr_pct)},
      {"N", std::to_string(report.n)},
      {"MAPE excluded", std::to_string(report.mape_excluded)},
  };
  std::size_t width = 0;
  for (const auto& [name, value] : rows) width = std::max(width, name.size());
  for (const auto& [name, value] : rows)
    out << name << std::string(width - name.size() + 2, ' ') << value << "\n";
  return out.str();
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "s,accuracy_pct,mae,mse,mape_pct,fpr_pct,fnr_pct,n,mape_excluded\n"
      << full(report.timeliness) << "," << full(report.accuracy_pct) << ","
      << full(report.mae) << "," << full(report.mse) << ","
      << full(report.mape_pct) << "," << full(report.fpr_pct) << ","
      << full(report.fnr_pct) << "," << report.n << "," << report.mape_excluded
      << "\n";
}

}  // namespace embedrul
