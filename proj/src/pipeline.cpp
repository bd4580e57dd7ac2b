#include "embedrul/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace embedrul {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool series_has_gaps(const std::vector<MultivariateSeries>& list) {
  for (const MultivariateSeries& s : list)
    for (double p : s.present.data)
      if (p == 0.0) return true;
  return false;
}

}  // namespace

MultivariateSeries Preprocessor::normalize_stage(const MultivariateSeries& s) const {
  const MultivariateSeries* cur = &s;
  MultivariateSeries bucketed;
  if (downsample_bucket > 0.0) {
    bucketed = downsample_daily(s, downsample_bucket);
    cur = &bucketed;
  }
  return normalizer.apply(*cur);
}

MultivariateSeries Preprocessor::apply(const MultivariateSeries& s) const {
  MultivariateSeries normalized = normalize_stage(s);
  if (!has_pca) return normalized;

  for (double p : normalized.present.data)
    if (p == 0.0)
      fail(ErrorKind::format_error,
           normalized.instance_id +
               ": principal-component pipeline cannot score series with "
               "missing readings");

  MultivariateSeries out;
  out.instance_id = normalized.instance_id;
  out.timestamps = normalized.timestamps;
  const std::size_t t = normalized.length();
  out.values = Matrix(t, pca.components());
  out.present = Matrix(t, pca.components(), 1.0);
  Vec row(normalized.dims());
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < normalized.dims(); ++j) row[j] = normalized.values(i, j);
    const Vec projected = apply_pca(pca, row);
    for (std::size_t j = 0; j < projected.size(); ++j) out.values(i, j) = projected[j];
  }
  return out;
}

namespace {

Preprocessor fit_preprocessor(const std::vector<MultivariateSeries>& raw_train,
                              const RunConfig& config) {
  if (raw_train.empty())
    fail(ErrorKind::insufficient_data, "no training instances");

  Preprocessor prep;
  prep.downsample_bucket = config.downsample_bucket;
  prep.standardize = config.standardize;

  std::vector<MultivariateSeries> staged;
  staged.reserve(raw_train.size());
  for (const MultivariateSeries& s : raw_train)
    staged.push_back(config.downsample_bucket > 0.0
                         ? downsample_daily(s, config.downsample_bucket)
                         : s);

  const std::size_t n = staged[0].dims();
  if (config.standardize) {
    prep.normalizer = fit_normalizer(staged, config.constant_tol);
  } else {
    prep.normalizer.mean.assign(n, 0.0);
    prep.normalizer.stddev.assign(n, 1.0);
    prep.normalizer.kept.resize(n);
    for (std::size_t j = 0; j < n; ++j) prep.normalizer.kept[j] = j;
  }

  const bool gaps = series_has_gaps(staged);
  prep.mask_delta = config.mask_delta == -1 ? gaps : config.mask_delta == 1;
  if (config.p > 0 && gaps)
    fail(ErrorKind::config_error,
         "model.p > 0 requires fully-present training data (set model.p = 0)");
  if (config.p > 0) {
    if (config.p > prep.normalizer.kept.size())
      fail(ErrorKind::config_error,
           "model.p exceeds the number of retained sensors");
    std::vector<Vec> rows;
    for (const MultivariateSeries& s : staged) {
      const MultivariateSeries normalized = prep.normalizer.apply(s);
      for (std::size_t i = 0; i < normalized.length(); ++i)
        rows.emplace_back(normalized.values.row(i),
                          normalized.values.row(i) + normalized.dims());
    }
    prep.pca = fit_pca(rows, config.p);
    prep.has_pca = true;
  }
  return prep;
}

TrainConfig train_config(const RunConfig& config) {
  TrainConfig tc;
  tc.optimizer = config.optimizer == "sgd" ? TrainConfig::Optimizer::sgd
                                           : TrainConfig::Optimizer::adam;
  tc.learning_rate = config.lr;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch;
  tc.grad_clip = config.clip;
  tc.seed = config.seed;
  tc.squared_loss = config.squared_loss;
  return tc;
}

std::vector<Embedding> embed_windows(const Seq2SeqModel& model,
                                     const std::vector<AugmentedWindow>& windows,
                                     const std::string& instance_id) {
  std::vector<Embedding> out;
  out.reserve(windows.size());
  for (const AugmentedWindow& w : windows) {
    Embedding e = encode(model, w);
    e.instance_id = instance_id;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Checkpoint train_pipeline(const std::vector<MultivariateSeries>& raw_train,
                          const RunConfig& config,
                          std::vector<double>* loss_history) {
  config.validate();
  Checkpoint ckpt;
  ckpt.prep = fit_preprocessor(raw_train, config);

  std::vector<MultivariateSeries> features;
  features.reserve(raw_train.size());
  for (const MultivariateSeries& s : raw_train)
    features.push_back(ckpt.prep.apply(s));
  const std::size_t k = features[0].dims();

  std::vector<AugmentedWindow> training_windows;
  for (const MultivariateSeries& f : features) {
    std::vector<AugmentedWindow> ws = make_windows(f, config.w, config.stride);
    for (AugmentedWindow& w : ws) training_windows.push_back(std::move(w));
  }
  if (training_windows.empty())
    fail(ErrorKind::insufficient_data,
         "no training windows: every instance is shorter than w");

  ckpt.model = init_model(config.w, k, ckpt.prep.mask_delta,
                          config.layer_sizes(), config.d,
                          config.reverse_decode, config.seed);
  const std::vector<double> history =
      train(ckpt.model, training_windows, train_config(config));
  if (loss_history) *loss_history = history;

  // Scoring artifacts: everything below uses stride-1 windows.
  Artifacts& art = ckpt.artifacts;
  art.lr_on_reduced = config.lr_on_reduced;

  std::vector<std::size_t> usable;  // feature indices with >= 1 window
  std::vector<std::vector<AugmentedWindow>> windows1(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    windows1[i] = make_windows(features[i], config.w, 1);
    if (windows1[i].empty())
      ++art.skipped_short;
    else
      usable.push_back(i);
  }
  if (usable.empty())
    fail(ErrorKind::degenerate_data, "every training instance is shorter than w");

  std::vector<std::vector<Embedding>> embeddings;
  std::vector<std::size_t> lengths;
  for (std::size_t i : usable) {
    embeddings.push_back(
        embed_windows(ckpt.model, windows1[i], features[i].instance_id));
    lengths.push_back(features[i].length());
  }
  art.normal = build_normal_set(embeddings, lengths, config.beta);

  std::vector<HiCurve> embed_raw, recon_raw;
  for (std::size_t u = 0; u < usable.size(); ++u) {
    const std::size_t i = usable[u];
    embed_raw.push_back(embedding_hi_curve(embeddings[u], art.normal,
                                           features[i].instance_id));
    recon_raw.push_back(
        recon_hi_curve(ckpt.model, windows1[i], features[i].instance_id));
  }
  art.embed_scale = fit_curve_scale(embed_raw);
  art.recon_scale = fit_curve_scale(recon_raw);
  for (std::size_t u = 0; u < usable.size(); ++u) {
    const std::size_t t_total = features[usable[u]].length();
    art.embed_library.curves.push_back(
        {apply_curve_scale(embed_raw[u], art.embed_scale), t_total});
    art.recon_library.curves.push_back(
        {apply_curve_scale(recon_raw[u], art.recon_scale), t_total});
  }

  // Pointwise linear scorers: features at t paired with the scaled curve
  // value at t, pooled across usable instances.
  std::vector<Vec> lr_rows;
  Vec target_embed, target_recon;
  std::vector<MultivariateSeries> lr_series(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    lr_series[i] = config.lr_on_reduced ? features[i]
                                        : ckpt.prep.normalize_stage(raw_train[i]);
  for (std::size_t u = 0; u < usable.size(); ++u) {
    const std::size_t i = usable[u];
    const HiCurve& ec = art.embed_library.curves[u].curve;
    const HiCurve& rc = art.recon_library.curves[u].curve;
    for (std::size_t j = 0; j < ec.values.size(); ++j) {
      const std::size_t t = ec.start + j;  // 1-based
      lr_rows.emplace_back(lr_series[i].values.row(t - 1),
                           lr_series[i].values.row(t - 1) + lr_series[i].dims());
      target_embed.push_back(ec.values[j]);
      target_recon.push_back(rc.values[j]);
    }
  }
  Vec target_embed_sq = target_embed, target_recon_sq = target_recon;
  for (double& y : target_embed_sq) y *= y;
  for (double& y : target_recon_sq) y *= y;

  art.embed_lr1.model = fit_linear_hi(lr_rows, target_embed, false);
  art.embed_lr2.model = fit_linear_hi(lr_rows, target_embed_sq, true);
  art.recon_lr1.model = fit_linear_hi(lr_rows, target_recon, false);
  art.recon_lr2.model = fit_linear_hi(lr_rows, target_recon_sq, true);

  // Regression scorers match against their own predictions on the training
  // fleet, defined from t = 1.
  auto lr_library = [&](const LinearHiModel& model) {
    CurveLibrary lib;
    for (std::size_t i = 0; i < features.size(); ++i) {
      HiCurve curve;
      curve.instance_id = features[i].instance_id;
      curve.start = 1;
      curve.values.reserve(lr_series[i].length());
      Vec row(lr_series[i].dims());
      for (std::size_t r = 0; r < lr_series[i].length(); ++r) {
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = lr_series[i].values(r, j);
        curve.values.push_back(predict_linear_hi(model, row));
      }
      lib.curves.push_back({std::move(curve), features[i].length()});
    }
    return lib;
  };
  art.embed_lr1.library = lr_library(art.embed_lr1.model);
  art.embed_lr2.library = lr_library(art.embed_lr2.model);
  art.recon_lr1.library = lr_library(art.recon_lr1.model);
  art.recon_lr2.library = lr_library(art.recon_lr2.model);

  return ckpt;
}

const CurveLibrary& scorer_library(const Checkpoint& ckpt, ScorerKind kind) {
  switch (kind) {
    case ScorerKind::embed: return ckpt.artifacts.embed_library;
    case ScorerKind::recon: return ckpt.artifacts.recon_library;
    case ScorerKind::embed_lr1: return ckpt.artifacts.embed_lr1.library;
    case ScorerKind::embed_lr2: return ckpt.artifacts.embed_lr2.library;
    case ScorerKind::recon_lr1: return ckpt.artifacts.recon_lr1.library;
    case ScorerKind::recon_lr2: return ckpt.artifacts.recon_lr2.library;
  }
  fail(ErrorKind::invalid_argument, "unknown scorer");
}

MatchConfig match_config(const RunConfig& config) {
  MatchConfig mc;
  mc.max_lag = config.tau;
  mc.lambda = config.lambda;
  mc.alpha = config.alpha;
  mc.r_max = config.r_max;
  mc.literal_norm = config.literal_norm;
  return mc;
}

namespace {

struct Scored {
  HiCurve curve;  // values empty when the series is too short to score
  std::size_t feature_len = 0;
};

Scored score_series(const Checkpoint& ckpt, ScorerKind kind,
                    const MultivariateSeries& raw) {
  Scored scored;
  if (kind == ScorerKind::embed || kind == ScorerKind::recon) {
    const MultivariateSeries feat = ckpt.prep.apply(raw);
    scored.feature_len = feat.length();
    const std::vector<AugmentedWindow> windows =
        make_windows(feat, ckpt.model.window_len, 1);
    if (windows.empty()) return scored;
    if (kind == ScorerKind::embed) {
      const std::vector<Embedding> embs =
          embed_windows(ckpt.model, windows, feat.instance_id);
      const HiCurve curve =
          embedding_hi_curve(embs, ckpt.artifacts.normal, feat.instance_id);
      scored.curve = apply_curve_scale(curve, ckpt.artifacts.embed_scale);
    } else {
      const HiCurve curve =
          recon_hi_curve(ckpt.model, windows, feat.instance_id);
      scored.curve = apply_curve_scale(curve, ckpt.artifacts.recon_scale);
    }
    return scored;
  }

  const MultivariateSeries feat = ckpt.artifacts.lr_on_reduced
                                      ? ckpt.prep.apply(raw)
                                      : ckpt.prep.normalize_stage(raw);
  scored.feature_len = feat.length();
  const LinearHiModel* model = nullptr;
  switch (kind) {
    case ScorerKind::embed_lr1: model = &ckpt.artifacts.embed_lr1.model; break;
    case ScorerKind::embed_lr2: model = &ckpt.artifacts.embed_lr2.model; break;
    case ScorerKind::recon_lr1: model = &ckpt.artifacts.recon_lr1.model; break;
    case ScorerKind::recon_lr2: model = &ckpt.artifacts.recon_lr2.model; break;
    default: fail(ErrorKind::invalid_argument, "unknown scorer");
  }
  scored.curve.instance_id = feat.instance_id;
  scored.curve.start = 1;
  Vec row(feat.dims());
  scored.curve.values.reserve(feat.length());
  for (std::size_t r = 0; r < feat.length(); ++r) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = feat.values(r, j);
    scored.curve.values.push_back(predict_linear_hi(*model, row));
  }
  return scored;
}

HiCurve curve_prefix(const HiCurve& curve, std::size_t t) {
  HiCurve out = curve;
  const std::size_t count = t - curve.start + 1;  // stride 1
  out.values.assign(curve.values.begin(), curve.values.begin() + count);
  return out;
}

}  // namespace

std::optional<HiCurve> score_curve(const Checkpoint& ckpt, ScorerKind kind,
                                   const MultivariateSeries& raw) {
  Scored scored = score_series(ckpt, kind, raw);
  if (scored.curve.values.empty()) return std::nullopt;
  return std::move(scored.curve);
}

std::vector<ReportRow> estimate_batch(
    const Checkpoint& ckpt, const RunConfig& config,
    const std::vector<MultivariateSeries>& raw_test,
    const std::vector<long long>* actuals) {
  if (actuals && actuals->size() != raw_test.size())
    fail(ErrorKind::format_error,
         "ground-truth count does not match test instance count");
  const MatchConfig mc = match_config(config);

  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < raw_test.size(); ++i) {
    const Scored scored = score_series(ckpt, config.scorer, raw_test[i]);
    if (scored.curve.values.empty()) {
      ReportRow row;
      row.instance = raw_test[i].instance_id;
      row.t = scored.feature_len;
      if (actuals) row.actual = double((*actuals)[i]);
      rows.push_back(std::move(row));
      continue;
    }
    const HiCurve& curve = scored.curve;
    const std::size_t t_end = scored.feature_len;

    std::vector<std::size_t> times;
    if (config.cadence > 0) {
      for (std::size_t t = config.w; t < t_end; t += config.cadence)
        if (t >= curve.start) times.push_back(t);
    }
    if (times.empty() || times.back() != t_end) times.push_back(t_end);

    for (std::size_t t : times) {
      ReportRow row;
      row.instance = raw_test[i].instance_id;
      row.t = t;
      const RulEstimate est = estimate_rul(
          curve_prefix(curve, t), scorer_library(ckpt, config.scorer), mc);
      row.estimate = est.value;
      row.fallback_used = est.fallback_used;
      row.n_candidates = est.admitted.size();
      if (actuals)
        row.actual = double((*actuals)[i]) + double(t_end - t);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "instance,t,estimate,actual,error,fallback_used,n_candidates\n";
  for (const ReportRow& row : rows) {
    out << row.instance << "," << row.t << ",";
    if (row.estimate) out << format_double(*row.estimate);
    out << ",";
    if (row.actual) out << format_double(*row.actual);
    out << ",";
    if (row.estimate && row.actual)
      out << format_double(*row.estimate - *row.actual);
    out << "," << (row.fallback_used ? 1 : 0) << "," << row.n_candidates << "\n";
  }
}

std::vector<ReportRow> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::insufficient_data, "empty report");
  std::size_t line_no = 1;
  if (line.ends_with("\r")) line.pop_back();
  if (line != "instance,t,estimate,actual,error,fallback_used,n_candidates")
    fail(ErrorKind::format_error, "unrecognized report header");

  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : text) {
      if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur.push_back(ch);
      }
    }
    cells.push_back(cur);
    return cells;
  };

  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != 7)
      fail(ErrorKind::parse_error,
           "line " + std::to_string(line_no) + ": expected 7 cells");
    ReportRow row;
    row.instance = cells[0];
    try {
      row.t = std::stoul(cells[1]);
      if (!cells[2].empty()) row.estimate = std::stod(cells[2]);
      if (!cells[3].empty()) row.actual = std::stod(cells[3]);
      row.fallback_used = cells[5] == "1";
      row.n_candidates = std::stoul(cells[6]);
    } catch (const std::exception&) {
      fail(ErrorKind::parse_error,
           "line " + std::to_string(line_no) + ": bad number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricsReport report_metrics(const std::vector<ReportRow>& rows,
                             const MetricConfig& config, std::size_t* skipped) {
  Vec estimates, actuals;
  std::size_t left_out = 0;
  for (const ReportRow& row : rows) {
    if (row.estimate && row.actual) {
      estimates.push_back(*row.estimate);
      actuals.push_back(*row.actual);
    } else {
      ++left_out;
    }
  }
  if (skipped) *skipped = left_out;
  if (estimates.empty())
    fail(ErrorKind::degenerate_data,
         "no rows with both an estimate and ground truth");
  return compute_metrics(estimates, actuals, config);
}

NoiseSweep noise_sweep(const Checkpoint& ckpt, const RunConfig& config,
                       ScorerKind kind,
                       const std::vector<MultivariateSeries>& raw_test,
                       const std::vector<long long>& actuals,
                       const std::vector<double>& sigmas, std::uint64_t seed) {
  if (sigmas.empty())
    fail(ErrorKind::invalid_argument, "noise_sweep: no sigma values");
  if (raw_test.empty())
    fail(ErrorKind::invalid_argument, "noise_sweep: no test instances");

  RunConfig local = config;
  local.scorer = kind;
  local.cadence = 0;

  NoiseSweep sweep;
  const MetricConfig metric_cfg{config.tau1, config.tau2};
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    std::vector<MultivariateSeries> corrupted;
    corrupted.reserve(raw_test.size());
    for (std::size_t i = 0; i < raw_test.size(); ++i) {
      Rng rng(Rng::derive(seed, si * 1000003ULL + i));
      corrupted.push_back(add_gaussian_noise(raw_test[i], sigmas[si], rng));
    }
    const std::vector<ReportRow> rows =
        estimate_batch(ckpt, local, corrupted, &actuals);
    std::size_t skipped = 0;
    const MetricsReport report = report_metrics(rows, metric_cfg, &skipped);
    NoisePoint point;
    point.sigma = sigmas[si];
    point.mse = report.mse;
    point.timeliness = report.timeliness;
    point.estimable = report.n;
    sweep.points.push_back(point);
  }

  const double n = double(sweep.points.size());
  for (const NoisePoint& p : sweep.points) {
    sweep.mse_mean += p.mse;
    sweep.timeliness_mean += p.timeliness;
  }
  sweep.mse_mean /= n;
  sweep.timeliness_mean /= n;
  for (const NoisePoint& p : sweep.points) {
    sweep.mse_std += (p.mse - sweep.mse_mean) * (p.mse - sweep.mse_mean);
    sweep.timeliness_std += (p.timeliness - sweep.timeliness_mean) *
                            (p.timeliness - sweep.timeliness_mean);
  }
  sweep.mse_std = std::sqrt(sweep.mse_std / n);
  sweep.timeliness_std = std::sqrt(sweep.timeliness_std / n);
  return sweep;
}

void write_noise_sweep_csv(std::ostream& out, const NoiseSweep& sweep) {
  out << "sigma,mse,s,estimable\n";
  for (const NoisePoint& p : sweep.points)
    out << format_double(p.sigma) << "," << format_double(p.mse) << ","
        << format_double(p.timeliness) << "," << p.estimable << "\n";
  out << "mean," << format_double(sweep.mse_mean) << ","
      << format_double(sweep.timeliness_mean) << ",\n";
  out << "std," << format_double(sweep.mse_std) << ","
      << format_double(sweep.timeliness_std) << ",\n";
}

GridSearchResult grid_search(const std::vector<MultivariateSeries>& raw_train,
                             const RunConfig& base) {
  base.validate();
  if (base.grid.empty())
    fail(ErrorKind::config_error, "grid search needs [grid] entries");
  if (raw_train.size() < 2)
    fail(ErrorKind::insufficient_data, "grid search needs >= 2 instances");

  // Seeded 80/20-style instance split.
  std::vector<std::size_t> order(raw_train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(base.val_seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[split_rng.below(i)]);
  std::size_t n_val = std::size_t(std::llround(base.val_fraction * double(order.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, order.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  std::vector<MultivariateSeries> fit_set;
  for (std::size_t i : train_idx) fit_set.push_back(raw_train[i]);

  GridSearchResult result;
  result.best_index = 0;
  double best_objective = std::numeric_limits<double>::infinity();
  RunConfig best_cfg = base;
  bool any_valid = false;

  std::vector<std::size_t> counter(base.grid.size(), 0);
  std::map<std::string, Checkpoint> cache;

  while (true) {
    IniFile ini = config_to_ini(base);
    GridCell cell;
    for (std::size_t g = 0; g < base.grid.size(); ++g) {
      const auto& [key, values] = base.grid[g];
      apply_override(ini, key, values[counter[g]]);
      cell.assignment.emplace_back(key, values[counter[g]]);
    }
    RunConfig cfg = config_from_ini(ini);
    cfg.grid.clear();

    // Cells sharing every training-relevant setting reuse the checkpoint.
    std::string fingerprint;
    {
      IniFile resolved = config_to_ini(cfg);
      std::ostringstream fp;
      for (const auto& [name, entries] : resolved.sections) {
        if (name != "data" && name != "model" && name != "train" &&
            name != "health")
          continue;
        for (const auto& [k, v] : entries) fp << name << "." << k << "=" << v << ";";
      }
      fingerprint = fp.str();
    }
    auto it = cache.find(fingerprint);
    if (it == cache.end())
      it = cache.emplace(fingerprint, train_pipeline(fit_set, cfg, nullptr)).first;
    const Checkpoint& ckpt = it->second;

    // Truncated validation instances with known remaining life.
    std::vector<MultivariateSeries> probes;
    std::vector<long long> probe_actuals;
    for (std::size_t vi : val_idx) {
      const MultivariateSeries& s = raw_train[vi];
      Rng rng(Rng::derive(base.val_seed, 100000ULL + vi));
      for (std::size_t rep = 0; rep < base.truncations; ++rep) {
        const std::size_t lo = std::min(cfg.w, s.length());
        const std::size_t t = lo + std::size_t(rng.below(s.length() - lo + 1));
        MultivariateSeries probe = truncate_at(s, t);
        probe.instance_id += "@" + std::to_string(t);
        probes.push_back(std::move(probe));
        probe_actuals.push_back((long long)(s.length() - t));
      }
    }

    const std::vector<ReportRow> rows =
        estimate_batch(ckpt, cfg, probes, &probe_actuals);
    cell.evaluated = rows.size();
    double objective = std::numeric_limits<double>::infinity();
    std::size_t skipped = 0;
    bool have_metrics = false;
    for (const ReportRow& row : rows)
      if (row.estimate) {
        have_metrics = true;
        break;
      }
    if (have_metrics) {
      const MetricsReport report =
          report_metrics(rows, MetricConfig{cfg.tau1, cfg.tau2}, &skipped);
      objective = base.grid_objective == "s" ? report.timeliness : report.mse;
      cell.estimable = report.n;
    }
    cell.objective = objective;
    result.cells.push_back(cell);

    if (objective < best_objective) {
      best_objective = objective;
      best_cfg = cfg;
      result.best_index = result.cells.size() - 1;
      any_valid = true;
    }

    // Odometer: last key fastest.
    bool done = true;
    for (std::size_t g = base.grid.size(); g > 0;) {
      --g;
      if (++counter[g] < base.grid[g].second.size()) {
        done = false;
        break;
      }
      counter[g] = 0;
    }
    if (done) break;
  }

  if (!any_valid)
    fail(ErrorKind::degenerate_data, "grid search: no cell produced estimates");
  result.best = best_cfg;
  return result;
}

void write_grid_csv(std::ostream& out, const GridSearchResult& result) {
  if (result.cells.empty()) fail(ErrorKind::invalid_argument, "empty grid result");
  for (const auto& [key, value] : result.cells[0].assignment)
    out << key << ",";
  out << "objective,estimable,best\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const GridCell& cell = result.cells[i];
    for (const auto& [key, value] : cell.assignment) out << value << ",";
    out << format_double(cell.objective) << "," << cell.estimable << ","
        << (i == result.best_index ? 1 : 0) << "\n";
  }
}

void export_embeddings_csv(std::ostream& out, const Checkpoint& ckpt,
                           const std::vector<MultivariateSeries>& raw) {
  out << "instance,t";
  for (std::size_t j = 0; j < ckpt.model.embedding_dim(); ++j)
    out << ",e" << (j + 1);
  out << "\n";
  for (const MultivariateSeries& s : raw) {
    const MultivariateSeries feat = ckpt.prep.apply(s);
    const std::vector<AugmentedWindow> windows =
        make_windows(feat, ckpt.model.window_len, 1);
    for (const AugmentedWindow& w : windows) {
      const Embedding e = encode(ckpt.model, w);
      out << s.instance_id << "," << w.end_index;
      for (double v : e.values) out << "," << format_double(v);
      out << "\n";
    }
  }
}

void export_hi_curves_csv(std::ostream& out, const Checkpoint& ckpt,
                          ScorerKind kind,
                          const std::vector<MultivariateSeries>& raw) {
  out << "instance,t,hi\n";
  for (const MultivariateSeries& s : raw) {
    const std::optional<HiCurve> curve = score_curve(ckpt, kind, s);
    if (!curve) continue;
    for (std::size_t j = 0; j < curve->values.size(); ++j)
      out << s.instance_id << "," << (curve->start + j * curve->stride) << ","
          << format_double(curve->values[j]) << "\n";
  }
}

void export_reconstructions_csv(std::ostream& out, const Checkpoint& ckpt,
                                const std::vector<MultivariateSeries>& raw) {
  std::vector<MultivariateSeries> recon_list;
  for (const MultivariateSeries& s : raw) {
    const MultivariateSeries feat = ckpt.prep.apply(s);
    const std::size_t t_total = feat.length();
    const std::size_t w = ckpt.model.window_len;
    if (t_total < w) continue;

    MultivariateSeries rec;
    rec.instance_id = feat.instance_id;
    rec.timestamps = feat.timestamps;
    rec.values = Matrix(t_total, feat.dims());
    rec.present = Matrix(t_total, feat.dims(), 1.0);

    const std::vector<AugmentedWindow> windows = make_windows(feat, w, 1);
    auto paste = [&](const AugmentedWindow& win, std::size_t from_row) {
      const Matrix m = decode(ckpt.model, encode(ckpt.model, win).values);
      for (std::size_t r = from_row; r < w; ++r)
        for (std::size_t j = 0; j < feat.dims(); ++j)
          rec.values(win.end_index - w + r, j) = m(r, j);
    };
    std::size_t covered = 0;
    for (std::size_t end = w; end <= t_total; end += w) {
      paste(windows[end - w], 0);
      covered = end;
    }
    if (covered < t_total)
      paste(windows[t_total - w], w - (t_total - covered));
    recon_list.push_back(std::move(rec));
  }
  if (recon_list.empty())
    fail(ErrorKind::degenerate_data, "no instance long enough to reconstruct");
  write_csv(out, recon_list);
}

LoadedData load_data(const RunConfig& config, bool need_train, bool need_test) {
  LoadedData data;
  auto read_series = [&](const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config_error, "cannot open data file '" + path + "'");
    return config.format == "cmapss" ? parse_cmapss(in) : parse_csv(in);
  };
  if (need_train) {
    if (config.train_path.empty())
      fail(ErrorKind::config_error, "data.train is required");
    data.train = read_series(config.train_path);
  }
  if (need_test) {
    if (config.test_path.empty())
      fail(ErrorKind::config_error, "data.test is required");
    data.test = read_series(config.test_path);
  }
  if (!config.rul_path.empty()) {
    std::ifstream in(config.rul_path);
    if (!in)
      fail(ErrorKind::config_error,
           "cannot open ground-truth file '" + config.rul_path + "'");
    data.rul = parse_rul_file(in);
    if (need_test && data.rul.size() != data.test.size())
      fail(ErrorKind::format_error,
           "ground-truth count does not match test instance count");
  }
  return data;
}

namespace {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<Vec>();
  if (m.data.size() != m.rows * m.cols)
    fail(ErrorKind::format_error, "checkpoint: matrix size mismatch");
  return m;
}

json layer_to_json(const GruLayerParams& l) {
  return json{{"input_dim", l.input_dim},
              {"hidden", l.hidden},
              {"w_reset", matrix_to_json(l.w_reset)},
              {"w_update", matrix_to_json(l.w_update)},
              {"w_propose", matrix_to_json(l.w_propose)}};
}

GruLayerParams layer_from_json(const json& j) {
  GruLayerParams l;
  l.input_dim = j.at("input_dim").get<std::size_t>();
  l.hidden = j.at("hidden").get<std::size_t>();
  l.w_reset = matrix_from_json(j.at("w_reset"));
  l.w_update = matrix_from_json(j.at("w_update"));
  l.w_propose = matrix_from_json(j.at("w_propose"));
  return l;
}

json curve_to_json(const HiCurve& c) {
  return json{{"instance", c.instance_id}, {"start", c.start},
              {"stride", c.stride},        {"scaled", c.scaled},
              {"scale_min", c.scale_min},  {"scale_max", c.scale_max},
              {"values", c.values}};
}

HiCurve curve_from_json(const json& j) {
  HiCurve c;
  c.instance_id = j.at("instance").get<std::string>();
  c.start = j.at("start").get<std::size_t>();
  c.stride = j.at("stride").get<std::size_t>();
  c.scaled = j.at("scaled").get<bool>();
  c.scale_min = j.at("scale_min").get<double>();
  c.scale_max = j.at("scale_max").get<double>();
  c.values = j.at("values").get<Vec>();
  return c;
}

json library_to_json(const CurveLibrary& lib) {
  json arr = json::array();
  for (const LibraryCurve& lc : lib.curves) {
    json entry = curve_to_json(lc.curve);
    entry["total_life"] = lc.total_life;
    arr.push_back(std::move(entry));
  }
  return arr;
}

CurveLibrary library_from_json(const json& j) {
  CurveLibrary lib;
  for (const json& entry : j) {
    LibraryCurve lc;
    lc.curve = curve_from_json(entry);
    lc.total_life = entry.at("total_life").get<std::size_t>();
    lib.curves.push_back(std::move(lc));
  }
  return lib;
}

json lr_to_json(const LrScorer& lr) {
  return json{{"theta", lr.model.theta},
              {"theta0", lr.model.theta0},
              {"squared", lr.model.squared},
              {"library", library_to_json(lr.library)}};
}

LrScorer lr_from_json(const json& j) {
  LrScorer lr;
  lr.model.theta = j.at("theta").get<Vec>();
  lr.model.theta0 = j.at("theta0").get<double>();
  lr.model.squared = j.at("squared").get<bool>();
  lr.library = library_from_json(j.at("library"));
  return lr;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json j;
  j["format"] = "embedrul-checkpoint";
  j["version"] = 1;

  json model;
  model["window_len"] = ckpt.model.window_len;
  model["target_dim"] = ckpt.model.target_dim;
  model["mask_delta_inputs"] = ckpt.model.mask_delta_inputs;
  model["dropout"] = ckpt.model.dropout;
  model["reverse_decode"] = ckpt.model.reverse_decode;
  model["encoder"] = json::array();
  for (const GruLayerParams& l : ckpt.model.encoder)
    model["encoder"].push_back(layer_to_json(l));
  model["decoder"] = json::array();
  for (const GruLayerParams& l : ckpt.model.decoder)
    model["decoder"].push_back(layer_to_json(l));
  model["output_map"] = matrix_to_json(ckpt.model.output_map);
  j["model"] = std::move(model);

  json prep;
  prep["downsample_bucket"] = ckpt.prep.downsample_bucket;
  prep["standardize"] = ckpt.prep.standardize;
  prep["mask_delta"] = ckpt.prep.mask_delta;
  prep["normalizer"] = json{{"mean", ckpt.prep.normalizer.mean},
                            {"stddev", ckpt.prep.normalizer.stddev},
                            {"kept", ckpt.prep.normalizer.kept}};
  if (ckpt.prep.has_pca)
    prep["pca"] = json{{"mean", ckpt.prep.pca.mean},
                       {"basis", matrix_to_json(ckpt.prep.pca.basis)},
                       {"explained", ckpt.prep.pca.explained_variance}};
  else
    prep["pca"] = nullptr;
  j["preprocessor"] = std::move(prep);

  json art;
  art["normal"] = json{{"beta", ckpt.artifacts.normal.beta},
                       {"embeddings", ckpt.artifacts.normal.embeddings}};
  json sources = json::array();
  for (const auto& [id, t] : ckpt.artifacts.normal.sources)
    sources.push_back(json::array({id, t}));
  art["normal"]["sources"] = std::move(sources);
  art["embed_library"] = library_to_json(ckpt.artifacts.embed_library);
  art["embed_scale"] = json{{"min", ckpt.artifacts.embed_scale.min},
                            {"max", ckpt.artifacts.embed_scale.max}};
  art["recon_library"] = library_to_json(ckpt.artifacts.recon_library);
  art["recon_scale"] = json{{"min", ckpt.artifacts.recon_scale.min},
                            {"max", ckpt.artifacts.recon_scale.max}};
  art["embed_lr1"] = lr_to_json(ckpt.artifacts.embed_lr1);
  art["embed_lr2"] = lr_to_json(ckpt.artifacts.embed_lr2);
  art["recon_lr1"] = lr_to_json(ckpt.artifacts.recon_lr1);
  art["recon_lr2"] = lr_to_json(ckpt.artifacts.recon_lr2);
  art["lr_on_reduced"] = ckpt.artifacts.lr_on_reduced;
  art["skipped_short"] = ckpt.artifacts.skipped_short;
  j["artifacts"] = std::move(art);

  std::ofstream out(path);
  if (!out) fail(ErrorKind::config_error, "cannot write checkpoint '" + path + "'");
  out << j.dump();
  if (!out.flush())
    fail(ErrorKind::config_error, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config_error, "cannot open checkpoint '" + path + "'");
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded())
    fail(ErrorKind::format_error, "checkpoint is not valid JSON: " + path);

  try {
    if (j.at("format").get<std::string>() != "embedrul-checkpoint")
      fail(ErrorKind::format_error, "not a checkpoint file: " + path);
    if (j.at("version").get<int>() != 1)
      fail(ErrorKind::format_error, "unsupported checkpoint version");

    Checkpoint ckpt;
    const json& model = j.at("model");
    ckpt.model.window_len = model.at("window_len").get<std::size_t>();
    ckpt.model.target_dim = model.at("target_dim").get<std::size_t>();
    ckpt.model.mask_delta_inputs = model.at("mask_delta_inputs").get<bool>();
    ckpt.model.dropout = model.at("dropout").get<double>();
    ckpt.model.reverse_decode = model.at("reverse_decode").get<bool>();
    for (const json& l : model.at("encoder"))
      ckpt.model.encoder.push_back(layer_from_json(l));
    for (const json& l : model.at("decoder"))
      ckpt.model.decoder.push_back(layer_from_json(l));
    ckpt.model.output_map = matrix_from_json(model.at("output_map"));

    const json& prep = j.at("preprocessor");
    ckpt.prep.downsample_bucket = prep.at("downsample_bucket").get<double>();
    ckpt.prep.standardize = prep.at("standardize").get<bool>();
    ckpt.prep.mask_delta = prep.at("mask_delta").get<bool>();
    ckpt.prep.normalizer.mean = prep.at("normalizer").at("mean").get<Vec>();
    ckpt.prep.normalizer.stddev = prep.at("normalizer").at("stddev").get<Vec>();
    ckpt.prep.normalizer.kept =
        prep.at("normalizer").at("kept").get<std::vector<std::size_t>>();
    if (!prep.at("pca").is_null()) {
      ckpt.prep.has_pca = true;
      ckpt.prep.pca.mean = prep.at("pca").at("mean").get<Vec>();
      ckpt.prep.pca.basis = matrix_from_json(prep.at("pca").at("basis"));
      ckpt.prep.pca.explained_variance =
          prep.at("pca").at("explained").get<Vec>();
    }

    const json& art = j.at("artifacts");
    ckpt.artifacts.normal.beta = art.at("normal").at("beta").get<double>();
    ckpt.artifacts.normal.embeddings =
        art.at("normal").at("embeddings").get<std::vector<Vec>>();
    for (const json& src : art.at("normal").at("sources"))
      ckpt.artifacts.normal.sources.emplace_back(
          src.at(0).get<std::string>(), src.at(1).get<std::size_t>());
    ckpt.artifacts.embed_library = library_from_json(art.at("embed_library"));
    ckpt.artifacts.embed_scale = {art.at("embed_scale").at("min").get<double>(),
                                  art.at("embed_scale").at("max").get<double>()};
    ckpt.artifacts.recon_library = library_from_json(art.at("recon_library"));
    ckpt.artifacts.recon_scale = {art.at("recon_scale").at("min").get<double>(),
                                  art.at("recon_scale").at("max").get<double>()};
    ckpt.artifacts.embed_lr1 = lr_from_json(art.at("embed_lr1"));
    ckpt.artifacts.embed_lr2 = lr_from_json(art.at("embed_lr2"));
    ckpt.artifacts.recon_lr1 = lr_from_json(art.at("recon_lr1"));
    ckpt.artifacts.recon_lr2 = lr_from_json(art.at("recon_lr2"));
    ckpt.artifacts.lr_on_reduced = art.at("lr_on_reduced").get<bool>();
    ckpt.artifacts.skipped_short = art.at("skipped_short").get<std::size_t>();
    return ckpt;
  } catch (const json::exception& e) {
    fail(ErrorKind::format_error,
         std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace embedrul
