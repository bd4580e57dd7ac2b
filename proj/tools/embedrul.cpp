// Command-line front end: train, estimate, evaluate, noise-sweep,
// grid-search, export, synth. Every run resolves defaults -> config file
// -> --set overrides, and every file-producing command echoes the resolved
// config next to its primary output so the run can be reproduced bit for
// bit.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "embedrul/pipeline.hpp"
#include "embedrul/synth.hpp"

namespace {

using namespace embedrul;

std::string trim_copy(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  std::size_t e = s.find_last_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

RunConfig resolve_config(const std::string& path,
                         const std::vector<std::string>& sets) {
  IniFile ini;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config_error, "cannot open config '" + path + "'");
    ini = parse_ini(in);
  }
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config_error, "--set expects section.key=value, got '" + kv + "'");
    apply_override(ini, trim_copy(kv.substr(0, eq)), trim_copy(kv.substr(eq + 1)));
  }
  return config_from_ini(ini);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::config_error, "cannot write '" + path + "'");
  return out;
}

void echo_config(const std::string& primary_out, const RunConfig& cfg) {
  save_config_file(primary_out + ".config.ini", cfg);
}

std::vector<double> parse_sigma_list(const std::string& text) {
  std::vector<double> sigmas;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t pos = 0;
      sigmas.push_back(std::stod(trim_copy(cell), &pos));
      if (pos != trim_copy(cell).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorKind::config_error, "bad sigma value '" + cell + "'");
    }
  }
  if (sigmas.empty()) fail(ErrorKind::config_error, "--sigmas list is empty");
  return sigmas;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config_error:
      return 2;
    case ErrorKind::parse_error:
    case ErrorKind::format_error:
    case ErrorKind::insufficient_data:
    case ErrorKind::degenerate_data:
      return 3;
    case ErrorKind::numerical_error:
    case ErrorKind::training_diverged:
      return 4;
    default:
      return 1;
  }
}

void run_train(const RunConfig& cfg, const std::string& out_path,
               const std::string& history_path) {
  const LoadedData data = load_data(cfg, true, false);
  std::vector<double> history;
  const Checkpoint ckpt = train_pipeline(data.train, cfg, &history);
  save_checkpoint(out_path, ckpt);
  echo_config(out_path, cfg);
  if (!history_path.empty()) {
    std::ofstream out = open_out(history_path);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", history[e]);
      out << (e + 1) << "," << buf << "\n";
    }
  }
  std::printf("trained on %zu instances; epochs %zu; final mean loss %.6g\n",
              data.train.size(), history.size(),
              history.empty() ? 0.0 : history.back());
  std::printf(
      "artifacts: %zu normal embeddings, %zu library curves, %zu short "
      "instances skipped\n",
      ckpt.artifacts.normal.embeddings.size(),
      ckpt.artifacts.embed_library.curves.size(),
      ckpt.artifacts.skipped_short);
  std::printf("checkpoint written to %s\n", out_path.c_str());
}

void run_estimate(const RunConfig& cfg, const std::string& ckpt_path,
                  const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LoadedData data = load_data(cfg, false, true);
  const std::vector<long long>* actuals =
      data.rul.empty() ? nullptr : &data.rul;
  const std::vector<ReportRow> rows =
      estimate_batch(ckpt, cfg, data.test, actuals);

  std::size_t estimable = 0, fallbacks = 0;
  for (const ReportRow& row : rows) {
    if (row.estimate) ++estimable;
    if (row.fallback_used) ++fallbacks;
  }
  if (out_path.empty()) {
    write_report_csv(std::cout, rows);
  } else {
    std::ofstream out = open_out(out_path);
    write_report_csv(out, rows);
    echo_config(out_path, cfg);
    std::printf("report written to %s\n", out_path.c_str());
  }
  std::fprintf(stderr,
               "%zu instances, %zu rows (%zu estimable, %zu via fallback)\n",
               data.test.size(), rows.size(), estimable, fallbacks);
}

void run_evaluate(const RunConfig& cfg, const std::string& report_path,
                  const std::string& ckpt_path, const std::string& out_path) {
  std::vector<ReportRow> rows;
  if (!report_path.empty()) {
    std::ifstream in(report_path);
    if (!in)
      fail(ErrorKind::config_error, "cannot open report '" + report_path + "'");
    rows = parse_report_csv(in);
  } else {
    if (ckpt_path.empty())
      fail(ErrorKind::config_error, "evaluate needs --report or --checkpoint");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const LoadedData data = load_data(cfg, false, true);
    if (data.rul.empty())
      fail(ErrorKind::config_error, "evaluate needs data.rul ground truth");
    rows = estimate_batch(ckpt, cfg, data.test, &data.rul);
  }
  std::size_t skipped = 0;
  const MetricsReport report =
      report_metrics(rows, MetricConfig{cfg.tau1, cfg.tau2}, &skipped);
  std::cout << format_metrics_table(report);
  if (skipped > 0)
    std::printf("(%zu rows without estimate and ground truth excluded)\n",
                skipped);
  if (!out_path.empty()) {
    std::ofstream out = open_out(out_path);
    write_metrics_csv(out, report);
    echo_config(out_path, cfg);
    std::printf("metrics written to %s\n", out_path.c_str());
  }
}

void run_noise_sweep(const RunConfig& cfg, const std::string& ckpt_path,
                     const std::string& scorer, const std::string& sigma_text,
                     long long sweep_seed, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LoadedData data = load_data(cfg, false, true);
  if (data.rul.empty())
    fail(ErrorKind::config_error, "noise-sweep needs data.rul ground truth");
  const ScorerKind kind = scorer.empty() ? cfg.scorer : parse_scorer(scorer);
  const std::vector<double> sigmas = parse_sigma_list(sigma_text);
  const std::uint64_t seed =
      sweep_seed < 0 ? cfg.seed : std::uint64_t(sweep_seed);

  const NoiseSweep sweep =
      noise_sweep(ckpt, cfg, kind, data.test, data.rul, sigmas, seed);
  if (out_path.empty()) {
    write_noise_sweep_csv(std::cout, sweep);
  } else {
    std::ofstream out = open_out(out_path);
    write_noise_sweep_csv(out, sweep);
    echo_config(out_path, cfg);
    std::printf("sweep written to %s\n", out_path.c_str());
  }
  std::fprintf(stderr, "scorer %s: mse %.6g +/- %.6g, s %.6g +/- %.6g\n",
               scorer_name(kind), sweep.mse_mean, sweep.mse_std,
               sweep.timeliness_mean, sweep.timeliness_std);
}

void run_grid_search(const RunConfig& cfg, const std::string& out_path,
                     const std::string& cells_path) {
  const LoadedData data = load_data(cfg, true, false);
  const GridSearchResult result = grid_search(data.train, cfg);
  save_config_file(out_path, result.best);
  echo_config(out_path, cfg);
  if (!cells_path.empty()) {
    std::ofstream out = open_out(cells_path);
    write_grid_csv(out, result);
  }
  const GridCell& best = result.cells[result.best_index];
  std::printf("%zu cells; best #%zu (objective %.6g):\n", result.cells.size(),
              result.best_index + 1, best.objective);
  for (const auto& [key, value] : best.assignment)
    std::printf("  %s = %s\n", key.c_str(), value.c_str());
  std::printf("winning config written to %s\n", out_path.c_str());
}

void run_export(const RunConfig& cfg, const std::string& ckpt_path,
                const std::string& what, const std::string& split,
                const std::string& scorer, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const bool use_train = split == "train";
  const LoadedData data = load_data(cfg, use_train, !use_train);
  const std::vector<MultivariateSeries>& series =
      use_train ? data.train : data.test;

  std::ofstream out = open_out(out_path);
  if (what == "embeddings") {
    export_embeddings_csv(out, ckpt, series);
  } else if (what == "hi") {
    const ScorerKind kind = scorer.empty() ? cfg.scorer : parse_scorer(scorer);
    export_hi_curves_csv(out, ckpt, kind, series);
  } else {
    export_reconstructions_csv(out, ckpt, series);
  }
  echo_config(out_path, cfg);
  std::printf("%s of %zu %s instances written to %s\n", what.c_str(),
              series.size(), split.c_str(), out_path.c_str());
}

void run_synth(const RunConfig& cfg, const std::string& train_path,
               const std::string& test_path, const std::string& rul_path) {
  SynthConfig fleet_cfg = cfg.synth;
  fleet_cfg.instances = cfg.synth.instances + cfg.synth_test_instances;
  const std::vector<MultivariateSeries> all = generate_fleet(fleet_cfg);

  const std::vector<MultivariateSeries> train(
      all.begin(), all.begin() + std::ptrdiff_t(cfg.synth.instances));
  {
    std::ofstream out = open_out(train_path);
    write_csv(out, train);
    echo_config(train_path, cfg);
  }
  std::printf("%zu training instances written to %s\n", train.size(),
              train_path.c_str());

  if (test_path.empty()) return;
  std::vector<MultivariateSeries> test;
  std::vector<long long> rul;
  for (std::size_t i = 0; i < cfg.synth_test_instances; ++i) {
    const MultivariateSeries& s = all[cfg.synth.instances + i];
    Rng rng(Rng::derive(fleet_cfg.seed, 900000ULL + i));
    const std::size_t lo = std::min(cfg.w, s.length());
    const std::size_t t = lo + std::size_t(rng.below(s.length() - lo + 1));
    test.push_back(truncate_at(s, t));
    rul.push_back((long long)(s.length() - t));
  }
  {
    std::ofstream out = open_out(test_path);
    write_csv(out, test);
  }
  std::printf("%zu truncated test instances written to %s\n", test.size(),
              test_path.c_str());
  if (!rul_path.empty()) {
    std::ofstream out = open_out(rul_path);
    for (long long r : rul) out << r << "\n";
    std::printf("ground truth written to %s\n", rul_path.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Machine-health and remaining-useful-life estimation from "
               "multivariate sensor series"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "INI config file");
    sub->add_option("--set", sets,
                    "Override one config entry (section.key=value); repeatable");
  };

  std::string out_path, history_path, ckpt_path, report_path;
  std::string scorer, what = "embeddings", split = "test";
  std::string sigma_text = "0,0.1,0.2,0.3,0.4", cells_path;
  std::string train_out, test_out, rul_out;
  long long sweep_seed = -1;

  CLI::App* train_cmd = app.add_subcommand("train", "Fit the model and scoring artifacts");
  add_common(train_cmd);
  train_cmd->add_option("-o,--out", out_path, "Checkpoint path")->required();
  train_cmd->add_option("--history", history_path, "Per-epoch loss CSV");

  CLI::App* est_cmd = app.add_subcommand("estimate", "Estimate remaining life of test instances");
  add_common(est_cmd);
  est_cmd->add_option("-k,--checkpoint", ckpt_path, "Trained checkpoint")->required();
  est_cmd->add_option("-o,--out", out_path, "Report CSV (stdout when omitted)");

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a report (or fresh estimates) against ground truth");
  add_common(eval_cmd);
  eval_cmd->add_option("-r,--report", report_path, "Existing report CSV");
  eval_cmd->add_option("-k,--checkpoint", ckpt_path, "Checkpoint for fresh estimates");
  eval_cmd->add_option("-o,--out", out_path, "Metrics CSV");

  CLI::App* sweep_cmd = app.add_subcommand("noise-sweep", "Estimate under added sensor noise across sigma levels");
  add_common(sweep_cmd);
  sweep_cmd->add_option("-k,--checkpoint", ckpt_path, "Trained checkpoint")->required();
  sweep_cmd->add_option("--scorer", scorer, "Scorer (default: config health.scorer)");
  sweep_cmd->add_option("--sigmas", sigma_text, "Comma-separated noise levels");
  sweep_cmd->add_option("--sweep-seed", sweep_seed, "Noise seed (default: train.seed)");
  sweep_cmd->add_option("-o,--out", out_path, "Sweep CSV (stdout when omitted)");

  CLI::App* grid_cmd = app.add_subcommand("grid-search", "Exhaustive search over the [grid] lists");
  add_common(grid_cmd);
  grid_cmd->add_option("-o,--out", out_path, "Winning config path")->required();
  grid_cmd->add_option("--cells", cells_path, "Per-cell results CSV");

  CLI::App* export_cmd = app.add_subcommand("export", "Dump embeddings, health curves, or reconstructions");
  add_common(export_cmd);
  export_cmd->add_option("-k,--checkpoint", ckpt_path, "Trained checkpoint")->required();
  export_cmd->add_option("--what", what, "embeddings | hi | recon")
      ->check(CLI::IsMember({"embeddings", "hi", "recon"}));
  export_cmd->add_option("--data", split, "train | test")
      ->check(CLI::IsMember({"train", "test"}));
  export_cmd->add_option("--scorer", scorer, "Scorer for --what hi");
  export_cmd->add_option("-o,--out", out_path, "Output CSV")->required();

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic degradation fleet");
  add_common(synth_cmd);
  synth_cmd->add_option("--out-train", train_out, "Training CSV")->required();
  synth_cmd->add_option("--out-test", test_out, "Truncated test CSV");
  synth_cmd->add_option("--out-rul", rul_out, "Ground-truth file for the test CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve_config(config_path, sets);
    if (train_cmd->parsed()) {
      run_train(cfg, out_path, history_path);
    } else if (est_cmd->parsed()) {
      run_estimate(cfg, ckpt_path, out_path);
    } else if (eval_cmd->parsed()) {
      run_evaluate(cfg, report_path, ckpt_path, out_path);
    } else if (sweep_cmd->parsed()) {
      run_noise_sweep(cfg, ckpt_path, scorer, sigma_text, sweep_seed, out_path);
    } else if (grid_cmd->parsed()) {
      run_grid_search(cfg, out_path, cells_path);
    } else if (export_cmd->parsed()) {
      run_export(cfg, ckpt_path, what, split, scorer, out_path);
    } else if (synth_cmd->parsed()) {
      run_synth(cfg, train_out, test_out, rul_out);
    }
    return 0;
  } catch (const embedrul::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", error_kind_name(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
