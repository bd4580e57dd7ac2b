#pragma once

#include <optional>

#include "embedrul/config.hpp"
#include "embedrul/dataio.hpp"
#include "embedrul/metrics.hpp"
#include "embedrul/pca.hpp"
#include "embedrul/rul.hpp"

namespace embedrul {

/// The per-timestep input transformation fitted on training data and
/// replayed verbatim on anything scored later: optional bucket
/// downsampling, z-scoring with constant-sensor dropping, optional
/// principal-component projection.
struct Preprocessor {
  double downsample_bucket = 0.0;
  bool standardize = true;
  Normalizer normalizer;
  bool has_pca = false;
  PcaModel pca;
  bool mask_delta = false;  // resolved: encoder sees mask/delta channels

  /// Downsampling + normalization (the stage LR features may use).
  MultivariateSeries normalize_stage(const MultivariateSeries& s) const;
  /// Full transformation including the projection.
  MultivariateSeries apply(const MultivariateSeries& s) const;
};

/// Everything a scorer needs besides the model. Curve libraries hold the
/// training fleet's full run-to-failure health curves, min-max normalized
/// for the embedding and reconstruction scorers; regression scorers keep
/// libraries of their own predicted curves (already in target scale).
struct LrScorer {
  LinearHiModel model;
  CurveLibrary library;
};

struct Artifacts {
  NormalSet normal;
  CurveLibrary embed_library;
  CurveScale embed_scale;
  CurveLibrary recon_library;
  CurveScale recon_scale;
  LrScorer embed_lr1, embed_lr2, recon_lr1, recon_lr2;
  bool lr_on_reduced = true;
  std::size_t skipped_short = 0;  // train instances shorter than w
};

struct Checkpoint {
  Seq2SeqModel model;
  Preprocessor prep;
  Artifacts artifacts;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Fits the preprocessor, trains the model on stride-subsampled windows,
/// and derives every scoring artifact from the training fleet. Short
/// instances (post-preprocessing length < w) are skipped for artifacts and
/// counted. loss_history receives the per-epoch training losses.
Checkpoint train_pipeline(const std::vector<MultivariateSeries>& raw_train,
                          const RunConfig& config,
                          std::vector<double>* loss_history);

/// Health curve of one raw series under the given scorer, in the space the
/// matcher uses. nullopt when the series is too short to score (shorter
/// than w for window-based scorers).
std::optional<HiCurve> score_curve(const Checkpoint& ckpt, ScorerKind kind,
                                   const MultivariateSeries& raw);

const CurveLibrary& scorer_library(const Checkpoint& ckpt, ScorerKind kind);

MatchConfig match_config(const RunConfig& config);

/// One output row of the estimate command. t is the 1-based estimation
/// time (the series end unless cadence sampling is on); estimate is empty
/// for unestimable instances. actual/error are present when ground truth
/// was supplied.
struct ReportRow {
  std::string instance;
  std::size_t t = 0;
  std::optional<double> estimate;
  std::optional<double> actual;
  bool fallback_used = false;
  std::size_t n_candidates = 0;
};

/// Estimates for every test series at the series end, or on the cadence
/// grid t = w, w+cadence, ... plus the end when cadence > 0. Ground-truth
/// values, when given, are end-of-series RULs aligned with `raw_test`.
std::vector<ReportRow> estimate_batch(
    const Checkpoint& ckpt, const RunConfig& config,
    const std::vector<MultivariateSeries>& raw_test,
    const std::vector<long long>* actuals);

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

/// Parses a report written by write_report_csv. Rows without estimates are
/// kept (estimate == nullopt) so callers can count them.
std::vector<ReportRow> parse_report_csv(std::istream& in);

/// Metrics over the estimable rows with actuals; `skipped` (when non-null)
/// receives the number of rows left out. All rows skipped is degenerate.
MetricsReport report_metrics(const std::vector<ReportRow>& rows,
                             const MetricConfig& config, std::size_t* skipped);

/// One noise level's outcome: estimates from test data whose present
/// readings were perturbed with seeded Gaussian noise before scoring.
struct NoisePoint {
  double sigma = 0.0;
  double mse = 0.0;
  double timeliness = 0.0;
  std::size_t estimable = 0;
};

struct NoiseSweep {
  std::vector<NoisePoint> points;
  double mse_mean = 0.0;
  double mse_std = 0.0;  // population convention, like every std here
  double timeliness_mean = 0.0;
  double timeliness_std = 0.0;
};

/// Runs the estimate pipeline once per sigma on noise-corrupted copies of
/// the test set (noise drawn from streams derived from `seed`, so the
/// sweep is reproducible), scoring with `kind`.
NoiseSweep noise_sweep(const Checkpoint& ckpt, const RunConfig& config,
                       ScorerKind kind,
                       const std::vector<MultivariateSeries>& raw_test,
                       const std::vector<long long>& actuals,
                       const std::vector<double>& sigmas, std::uint64_t seed);

void write_noise_sweep_csv(std::ostream& out, const NoiseSweep& sweep);

struct GridCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  double objective = 0.0;
  std::size_t estimable = 0;
  std::size_t evaluated = 0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;  // iteration order: odometer over grid keys
  RunConfig best;
  std::size_t best_index = 0;
};

/// Exhaustive search over the config's [grid] lists. Each cell trains and
/// scores on a seeded 80/20 instance split of `raw_train` (the validate
/// section), with `truncations` random cut points per held-out instance.
/// The objective is the cell's validation MSE or timeliness score; ties
/// keep the earliest cell in iteration order. Cells sharing the training
/// fingerprint reuse the trained checkpoint.
GridSearchResult grid_search(const std::vector<MultivariateSeries>& raw_train,
                             const RunConfig& base);

void write_grid_csv(std::ostream& out, const GridSearchResult& result);

/// Export helpers (CSV). Embeddings: instance,t,e1..ec per window.
/// HI curves: instance,t,hi in matcher space. Reconstructions: generic
/// series CSV (parse_csv round-trips it) built from non-overlapping
/// windows plus a final overlapping one to cover the tail.
void export_embeddings_csv(std::ostream& out, const Checkpoint& ckpt,
                           const std::vector<MultivariateSeries>& raw);
void export_hi_curves_csv(std::ostream& out, const Checkpoint& ckpt,
                          ScorerKind kind,
                          const std::vector<MultivariateSeries>& raw);
void export_reconstructions_csv(std::ostream& out, const Checkpoint& ckpt,
                                const std::vector<MultivariateSeries>& raw);

/// Loads train/test/rul per config.format. Test and rul are optional
/// (empty paths load nothing).
struct LoadedData {
  std::vector<MultivariateSeries> train;
  std::vector<MultivariateSeries> test;
  std::vector<long long> rul;
};
LoadedData load_data(const RunConfig& config, bool need_train, bool need_test);

}  // namespace embedrul
