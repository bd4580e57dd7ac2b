#pragma once

#include <string>
#include <vector>

#include "embedrul/seq2seq.hpp"

namespace embedrul {

/// Embeddings of windows drawn from the healthy early fraction of training
/// instances: a window qualifies when its end index t satisfies
/// t <= ceil(beta * T) for its instance of length T.
struct NormalSet {
  std::vector<Vec> embeddings;
  std::vector<std::pair<std::string, std::size_t>> sources;  // (instance, t)
  double beta = 0.0;
};

/// Gathers the normal set from per-instance embedding lists.
/// `lengths[i]` is the run-to-failure length of instance i. Instances too
/// short to contribute (ceil(beta*T) < first window end) are skipped;
/// an empty overall result is degenerate_data.
NormalSet build_normal_set(
    const std::vector<std::vector<Embedding>>& per_instance,
    const std::vector<std::size_t>& lengths, double beta);

/// Health index of one embedding: Euclidean distance to the nearest normal
/// embedding. 0 is perfectly healthy; larger is worse.
double health_index(const Vec& embedding, const NormalSet& normal);

/// A health-index trajectory. values[j] belongs to absolute (1-based) time
/// start + j*stride; embedding-based curves start at the window length w,
/// pointwise (regression) curves at 1.
struct HiCurve {
  std::string instance_id;
  Vec values;
  std::size_t start = 1;
  std::size_t stride = 1;
  bool scaled = false;      // min-max normalized with the metadata below
  double scale_min = 0.0;
  double scale_max = 0.0;

  std::size_t end_time() const { return start + (values.size() - 1) * stride; }
};

/// Distance-to-normal curve over a window sequence (ascending end_index).
HiCurve embedding_hi_curve(const std::vector<Embedding>& embeddings,
                           const NormalSet& normal,
                           const std::string& instance_id);

/// Reconstruction-error curve over the same windows (scalar masked error
/// per window). Shares the HiCurve conventions: 0 healthy, start = w.
HiCurve recon_hi_curve(const Seq2SeqModel& model,
                       const std::vector<AugmentedWindow>& windows,
                       const std::string& instance_id);

/// Pooled min-max scale over every value of every curve.
struct CurveScale {
  double min = 0.0;
  double max = 0.0;
};

/// Fits the pooled scale; max == min is degenerate_data.
CurveScale fit_curve_scale(const std::vector<HiCurve>& curves);

/// Maps values through (v − min) / (max − min) and records the scale.
/// Values outside the fitted range map outside [0, 1]; no clipping.
HiCurve apply_curve_scale(const HiCurve& curve, const CurveScale& scale);

/// Pointwise linear health model h = theta·x + theta0, fitted by least
/// squares with a tiny ridge (1e-8) on theta for rank safety. `squared`
/// records that the fit targets were squared health values.
struct LinearHiModel {
  Vec theta;
  double theta0 = 0.0;
  bool squared = false;
};

/// Fits on feature rows xs and targets (already normalized, and already
/// squared for the squared variant). Needs more rows than features.
LinearHiModel fit_linear_hi(const std::vector<Vec>& xs, const Vec& targets,
                            bool squared);

double predict_linear_hi(const LinearHiModel& model, const Vec& x);

}  // namespace embedrul
