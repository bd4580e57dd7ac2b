// Acceptance gate: every release-blocking behavior of the estimator gets
// one PASS/FAIL line, checked at its stated tolerance. The process exits
// nonzero when any gating check fails. The final check (benchmark engine
// data) is informative: it runs only when EMBEDRUL_CMAPSS_DIR points at
// the dataset and never affects the exit code.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "embedrul/pipeline.hpp"
#include "embedrul/synth.hpp"
#include "metric_reference.h"

using namespace embedrul;

namespace {

int failures = 0;

void report(int index, bool pass, const std::string& detail) {
  std::printf("[%d] %s — %s\n", index, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass) ++failures;
}

void report_error(int index, const std::exception& e) {
  report(index, false, std::string("unexpected error: ") + e.what());
}

AugmentedWindow random_window(std::size_t w, std::size_t k, Rng& rng,
                              double gap_prob) {
  AugmentedWindow win;
  win.values = Matrix(w, k);
  win.mask = Matrix(w, k, 1.0);
  win.delta = Matrix(w, k, 1.0);
  for (std::size_t t = 0; t < w; ++t)
    for (std::size_t j = 0; j < k; ++j) {
      win.values(t, j) = rng.uniform(-1.5, 1.5);
      if (rng.uniform(0.0, 1.0) < gap_prob) {
        win.mask(t, j) = 0.0;
        win.values(t, j) = 0.0;
        win.delta(t, j) = 2.0;
      }
    }
  win.end_index = w;
  return win;
}

// --- [1] analytic gradients vs central differences --------------------

void check_gradients() {
  const int seeds = 20;
  double worst = 0.0;
  for (int s = 1; s <= seeds; ++s) {
    Seq2SeqModel model =
        init_model(5, 2, true, {4}, 0.0, true, std::uint64_t(s));
    Rng rng(std::uint64_t(1000 + s));
    AugmentedWindow win = random_window(5, 2, rng, 0.25);
    worst = std::max(worst, grad_check(model, win, 1e-5));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "gradient check: worst rel err %.3g over %d seeds "
                "(w=5, k=2 with mask/delta channels, tol 1e-4)",
                worst, seeds);
  report(1, worst < 1e-4, buf);
}

// --- [2] masked positions are bitwise invisible ------------------------

void check_mask_exactness() {
  int exact = 0;
  const int cases = 10;
  for (int s = 1; s <= cases; ++s) {
    Seq2SeqModel model =
        init_model(6, 2, true, {4}, 0.0, s % 2 == 0, std::uint64_t(40 + s));
    Rng rng(std::uint64_t(500 + s));
    AugmentedWindow clean = random_window(6, 2, rng, 0.3);
    AugmentedWindow garbage = clean;
    for (std::size_t i = 0; i < garbage.values.data.size(); ++i)
      if (garbage.mask.data[i] == 0.0)
        garbage.values.data[i] = rng.uniform(-1e6, 1e6);

    const bool loss_same =
        window_loss(model, clean, true) == window_loss(model, garbage, true) &&
        window_loss(model, clean, false) == window_loss(model, garbage, false);
    Gradients ga = make_gradients(model);
    Gradients gb = make_gradients(model);
    compute_gradients(model, {clean}, true, ga);
    compute_gradients(model, {garbage}, true, gb);
    if (loss_same && max_rel_error(ga, gb) == 0.0) ++exact;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "masked-value invisibility: %d/%d cases bitwise identical in "
                "loss and gradients",
                exact, cases);
  report(2, exact == cases, buf);
}

// --- [3] training drives the loss down --------------------------------

void check_training() {
  Rng rng(314);
  std::vector<AugmentedWindow> windows;
  for (int m = 0; m < 50; ++m) {
    AugmentedWindow win;
    win.values = Matrix(16, 1);
    win.mask = Matrix(16, 1, 1.0);
    win.delta = Matrix(16, 1, 1.0);
    const double amp = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 6.28318530717958648);
    for (std::size_t t = 0; t < 16; ++t)
      win.values(t, 0) = amp * std::sin(0.4 * double(t) + phase);
    win.end_index = 16;
    windows.push_back(std::move(win));
  }
  Seq2SeqModel model = init_model(16, 1, false, {16}, 0.0, true, 7);
  TrainConfig tc;
  tc.epochs = 200;
  std::vector<double> history = train(model, windows, tc);
  const double ratio = history.back() / history.front();
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "training on 50 clean windows (w=16, k=1, c=16, 200 epochs): "
                "final/initial loss %.4f (required <= 0.10)",
                ratio);
  report(3, ratio <= 0.10, buf);
}

// --- [4] exact slices are recovered integer-exactly --------------------

void check_matching() {
  CurveLibrary library;
  const std::size_t lives[5] = {60, 72, 81, 90, 100};
  for (int i = 0; i < 5; ++i) {
    LibraryCurve lc;
    lc.total_life = lives[i];
    lc.curve.instance_id = "lib-" + std::to_string(i);
    lc.curve.start = 1;
    lc.curve.stride = 1;
    Rng jitter(std::uint64_t(9000 + i));
    for (std::size_t t = 1; t <= lives[i]; ++t)
      lc.curve.values.push_back(std::sin((0.3 + 0.07 * i) * double(t)) +
                                0.001 * jitter.uniform(-1.0, 1.0));
    library.curves.push_back(std::move(lc));
  }

  MatchConfig mc;
  mc.max_lag = 30;
  mc.alpha = 1.0;  // admit only exact-best matches
  mc.lambda = 0.005;
  mc.r_max = 1e9;

  int cases = 0, exact = 0;
  for (int i = 0; i < 5; ++i) {
    for (std::size_t lag : {std::size_t(1), std::size_t(4), std::size_t(9)}) {
      const std::size_t total = lives[std::size_t(i)];
      const std::size_t target = 10 + 3 * std::size_t(i);  // wanted RUL
      const std::size_t t_star = total - lag - target;
      HiCurve test;
      test.instance_id = "probe";
      test.start = 1;
      test.stride = 1;
      const HiCurve& src = library.curves[std::size_t(i)].curve;
      test.values.assign(src.values.begin() + std::ptrdiff_t(lag),
                         src.values.begin() + std::ptrdiff_t(lag + t_star));
      RulEstimate est = estimate_rul(test, library, mc);
      ++cases;
      if (!est.fallback_used && est.value == double(target)) ++exact;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "lag-slice recovery at alpha=1: %d/%d estimates integer-exact "
                "across 5 library curves x 3 lags",
                exact, cases);
  report(4, exact == cases, buf);
}

// --- [5] error metrics against independently computed values -----------

void check_metrics() {
  using namespace metric_reference;
  Vec deltas(kDeltas, kDeltas + kCount);
  Vec actuals(kActuals, kActuals + kCount);
  const MetricConfig mc{kTau1, kTau2};

  const double s = timeliness_score(deltas, mc);
  const double a = accuracy(deltas, mc);
  const ErrorStats es = error_stats(deltas, actuals);
  const auto [fpr, fnr] = classification_rates(deltas, mc);

  const double tol = 1e-9;
  double worst = 0.0;
  auto gap = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
  };
  gap(s, kTimeliness);
  gap(a, kAccuracyPct);
  gap(es.mae, kMae);
  gap(es.mse, kMse);
  gap(es.mape_pct, kMapePct);
  gap(fpr, kFprPct);
  gap(fnr, kFnrPct);
  const bool values_ok =
      worst <= tol && es.mape_excluded == std::size_t(kMapeExcluded);
  const bool trichotomy_exact = a + fpr + fnr == 100.0;

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "metrics vs independent reference (100 errors): worst gap "
                "%.3g (tol 1e-9); on-time + early + late == 100 exactly: %s",
                worst, trichotomy_exact ? "yes" : "NO");
  report(5, values_ok && trichotomy_exact, buf);
}

// --- [6][7] shared fleet checkpoint ------------------------------------

struct FleetSetup {
  RunConfig cfg;
  std::vector<MultivariateSeries> train;
  std::vector<MultivariateSeries> held_out;  // full run-to-failure
  Checkpoint ckpt;
};

FleetSetup train_fleet() {
  FleetSetup f;
  f.cfg.format = "csv";
  f.cfg.p = 0;
  f.cfg.c = {30};
  f.cfg.d = 0.2;
  f.cfg.w = 20;
  f.cfg.epochs = 20;
  f.cfg.seed = 42;
  f.cfg.stride = 2;
  f.cfg.r_max = 130.0;
  f.cfg.synth.instances = 30;
  f.cfg.synth.onset_fraction = 0.7;
  f.cfg.synth.noise_sigma = 0.1;
  f.cfg.synth.seed = 77;

  std::vector<MultivariateSeries> fleet = generate_fleet(f.cfg.synth);
  f.train.assign(fleet.begin(), fleet.begin() + 20);
  f.held_out.assign(fleet.begin() + 20, fleet.end());
  f.ckpt = train_pipeline(f.train, f.cfg, nullptr);
  return f;
}

void check_health_separation(const FleetSetup& f) {
  int ordered = 0, scored = 0;
  for (const MultivariateSeries& s : f.held_out) {
    std::optional<HiCurve> curve = score_curve(f.ckpt, ScorerKind::embed, s);
    if (!curve) continue;
    ++scored;
    const std::size_t life = s.length();
    const std::size_t q = life / 4;
    double early_sum = 0.0, late_sum = 0.0;
    std::size_t early_n = 0, late_n = 0;
    for (std::size_t j = 0; j < curve->values.size(); ++j) {
      const std::size_t t = curve->start + j * curve->stride;
      if (t <= q) {
        early_sum += curve->values[j];
        ++early_n;
      }
      if (t > life - q) {
        late_sum += curve->values[j];
        ++late_n;
      }
    }
    if (early_n > 0 && late_n > 0 &&
        late_sum / double(late_n) > early_sum / double(early_n))
      ++ordered;
  }
  char buf[160];
  std::snprintf(
      buf, sizeof buf,
      "health ordering on %d held-out instances: %d have mean end-of-life "
      "index above the early-life mean (required >= 90%%)",
      scored, ordered);
  report(6, scored == 10 && ordered * 10 >= scored * 9, buf);
}

void check_noise_robustness(const FleetSetup& f) {
  std::vector<MultivariateSeries> truncated;
  std::vector<long long> rul;
  for (std::size_t i = 0; i < f.held_out.size(); ++i) {
    const MultivariateSeries& s = f.held_out[i];
    Rng rng(Rng::derive(424242, i));
    const std::size_t t =
        s.length() / 3 + std::size_t(rng.below(std::uint64_t(
                             (9 * s.length()) / 10 - s.length() / 3 + 1)));
    truncated.push_back(truncate_at(s, t));
    rul.push_back(static_cast<long long>(s.length() - t));
  }
  const std::vector<double> sigmas = {0.0, 0.1, 0.2, 0.3, 0.4};
  NoiseSweep embed = noise_sweep(f.ckpt, f.cfg, ScorerKind::embed, truncated,
                                 rul, sigmas, 99);
  NoiseSweep recon = noise_sweep(f.ckpt, f.cfg, ScorerKind::recon, truncated,
                                 rul, sigmas, 99);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "noise sweep sigma 0..0.4 on one checkpoint: MSE spread "
                "embedding %.4g vs reconstruction %.4g "
                "(embedding must not exceed reconstruction)",
                embed.mse_std, recon.mse_std);
  report(7, embed.mse_std <= recon.mse_std, buf);
}

// --- [8] informative benchmark run -------------------------------------

void check_benchmark() {
  const char* dir = std::getenv("EMBEDRUL_CMAPSS_DIR");
  if (dir == nullptr || *dir == '\0') {
    std::printf(
        "[8] SKIP — benchmark engine dataset not configured "
        "(set EMBEDRUL_CMAPSS_DIR to run; informative only)\n");
    return;
  }
  try {
    RunConfig cfg;  // defaults are the tuned engine-fleet values
    cfg.format = "cmapss";
    cfg.train_path = std::string(dir) + "/train_FD001.txt";
    cfg.test_path = std::string(dir) + "/test_FD001.txt";
    cfg.rul_path = std::string(dir) + "/RUL_FD001.txt";
    const LoadedData data = load_data(cfg, true, true);
    const Checkpoint ckpt = train_pipeline(data.train, cfg, nullptr);
    const std::vector<ReportRow> rows =
        estimate_batch(ckpt, cfg, data.test, &data.rul);
    const MetricsReport rep =
        report_metrics(rows, MetricConfig{cfg.tau1, cfg.tau2}, nullptr);
    const bool ok = rep.timeliness <= 450.0 && rep.mse <= 300.0;
    std::printf(
        "[8] %s — benchmark engines: S %.2f (<= 450), MSE %.2f (<= 300) "
        "(informative only)\n",
        ok ? "PASS" : "FAIL", rep.timeliness, rep.mse);
  } catch (const std::exception& e) {
    std::printf("[8] SKIP — benchmark run failed: %s (informative only)\n",
                e.what());
  }
}

}  // namespace

int main() {
  try {
    check_gradients();
  } catch (const std::exception& e) {
    report_error(1, e);
  }
  try {
    check_mask_exactness();
  } catch (const std::exception& e) {
    report_error(2, e);
  }
  try {
    check_training();
  } catch (const std::exception& e) {
    report_error(3, e);
  }
  try {
    check_matching();
  } catch (const std::exception& e) {
    report_error(4, e);
  }
  try {
    check_metrics();
  } catch (const std::exception& e) {
    report_error(5, e);
  }
  try {
    const FleetSetup fleet = train_fleet();
    try {
      check_health_separation(fleet);
    } catch (const std::exception& e) {
      report_error(6, e);
    }
    try {
      check_noise_robustness(fleet);
    } catch (const std::exception& e) {
      report_error(7, e);
    }
  } catch (const std::exception& e) {
    report_error(6, e);
    report_error(7, e);
  }
  check_benchmark();

  if (failures == 0) {
    std::printf("acceptance: all gating checks passed\n");
    return 0;
  }
  std::printf("acceptance: %d gating check(s) FAILED\n", failures);
  return 1;
}
