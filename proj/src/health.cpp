#include "embedrul/health.hpp"

#include <cmath>

namespace embedrul {

NormalSet build_normal_set(
    const std::vector<std::vector<Embedding>>& per_instance,
    const std::vector<std::size_t>& lengths, double beta) {
  if (!(beta > 0.0 && beta <= 1.0))
    fail(ErrorKind::invalid_argument, "build_normal_set: beta outside (0, 1]");
  if (per_instance.size() != lengths.size())
    fail(ErrorKind::invalid_argument, "build_normal_set: lengths mismatch");

  NormalSet normal;
  normal.beta = beta;
  for (std::size_t i = 0; i < per_instance.size(); ++i) {
    const auto limit = std::size_t(std::ceil(beta * double(lengths[i])));
    for (const Embedding& e : per_instance[i]) {
      if (e.end_index > limit) continue;
      normal.embeddings.push_back(e.values);
      normal.sources.emplace_back(e.instance_id, e.end_index);
    }
  }
  if (normal.embeddings.empty())
    fail(ErrorKind::degenerate_data,
         "build_normal_set: no window ends within the healthy fraction");
  return normal;
}

double health_index(const Vec& embedding, const NormalSet& normal) {
  if (normal.embeddings.empty())
    fail(ErrorKind::invalid_state, "health_index: empty normal set");
  double best_sq = -1.0;
  for (const Vec& z : normal.embeddings) {
    if (z.size() != embedding.size())
      fail(ErrorKind::invalid_argument, "health_index: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double d = embedding[i] - z[i];
      acc += d * d;
    }
    if (best_sq < 0.0 || acc < best_sq) best_sq = acc;
  }
  return std::sqrt(best_sq);
}

HiCurve embedding_hi_curve(const std::vector<Embedding>& embeddings,
                           const NormalSet& normal,
                           const std::string& instance_id) {
  if (embeddings.empty())
    fail(ErrorKind::invalid_argument, "embedding_hi_curve: no embeddings");
  HiCurve curve;
  curve.instance_id = instance_id;
  curve.start = embeddings.front().end_index;
  curve.values.reserve(embeddings.size());
  std::size_t prev = 0;
  std::size_t stride = 0;
  for (const Embedding& e : embeddings) {
    if (prev != 0) {
      const std::size_t gap = e.end_index - prev;
      if (stride == 0)
        stride = gap;
      else if (gap != stride)
        fail(ErrorKind::invalid_argument, "embedding_hi_curve: uneven stride");
    }
    prev = e.end_index;
    curve.values.push_back(health_index(e.values, normal));
  }
  curve.stride = stride == 0 ? 1 : stride;
  return curve;
}

HiCurve recon_hi_curve(const Seq2SeqModel& model,
                       const std::vector<AugmentedWindow>& windows,
                       const std::string& instance_id) {
  if (windows.empty())
    fail(ErrorKind::invalid_argument, "recon_hi_curve: no windows");
  HiCurve curve;
  curve.instance_id = instance_id;
  curve.start = windows.front().end_index;
  curve.values.reserve(windows.size());
  std::size_t prev = 0;
  std::size_t stride = 0;
  for (const AugmentedWindow& w : windows) {
    if (prev != 0) {
      const std::size_t gap = w.end_index - prev;
      if (stride == 0)
        stride = gap;
      else if (gap != stride)
        fail(ErrorKind::invalid_argument, "recon_hi_curve: uneven stride");
    }
    prev = w.end_index;
    curve.values.push_back(reconstruction_error(model, w).total);
  }
  curve.stride = stride == 0 ? 1 : stride;
  return curve;
}

CurveScale fit_curve_scale(const std::vector<HiCurve>& curves) {
  bool any = false;
  CurveScale scale;
  for (const HiCurve& c : curves)
    for (double v : c.values) {
      if (!any) {
        scale.min = scale.max = v;
        any = true;
      } else {
        scale.min = std::min(scale.min, v);
        scale.max = std::max(scale.max, v);
      }
    }
  if (!any) fail(ErrorKind::invalid_argument, "fit_curve_scale: no values");
  if (!(scale.max > scale.min))
    fail(ErrorKind::degenerate_data, "fit_curve_scale: constant curves");
  return scale;
}

HiCurve apply_curve_scale(const HiCurve& curve, const CurveScale& scale) {
  if (!(scale.max > scale.min))
    fail(ErrorKind::invalid_argument, "apply_curve_scale: bad scale");
  HiCurve out = curve;
  const double span = scale.max - scale.min;
  for (double& v : out.values) v = (v - scale.min) / span;
  out.scaled = true;
  out.scale_min = scale.min;
  out.scale_max = scale.max;
  return out;
}

LinearHiModel fit_linear_hi(const std::vector<Vec>& xs, const Vec& targets,
                            bool squared) {
  if (xs.size() != targets.size())
    fail(ErrorKind::invalid_argument, "fit_linear_hi: size mismatch");
  if (xs.empty()) fail(ErrorKind::insufficient_data, "fit_linear_hi: no rows");
  const std::size_t n = xs[0].size();
  if (n == 0) fail(ErrorKind::invalid_argument, "fit_linear_hi: empty features");
  if (xs.size() <= n)
    fail(ErrorKind::insufficient_data, "fit_linear_hi: need more rows than features");

  Vec xmean(n, 0.0);
  double ymean = 0.0;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    if (xs[r].size() != n)
      fail(ErrorKind::invalid_argument, "fit_linear_hi: ragged rows");
    for (std::size_t j = 0; j < n; ++j) xmean[j] += xs[r][j];
    ymean += targets[r];
  }
  for (double& m : xmean) m /= double(xs.size());
  ymean /= double(xs.size());

  // Normal equations on centered data; ridge keeps the system invertible
  // without disturbing well-posed fits beyond ~1e-8.
  constexpr double kRidge = 1e-8;
  Matrix xtx(n, n, 0.0);
  Vec xty(n, 0.0);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const double yc = targets[r] - ymean;
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = xs[r][i] - xmean[i];
      xty[i] += xi * yc;
      for (std::size_t j = i; j < n; ++j)
        xtx(i, j) += xi * (xs[r][j] - xmean[j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) xtx(j, i) = xtx(i, j);
    xtx(i, i) += kRidge;
  }

  LinearHiModel model;
  model.squared = squared;
  model.theta = solve_linear(xtx, xty);
  model.theta0 = ymean - dot(model.theta, xmean);
  return model;
}

double predict_linear_hi(const LinearHiModel& model, const Vec& x) {
  if (x.size() != model.theta.size())
    fail(ErrorKind::invalid_argument, "predict_linear_hi: dimension mismatch");
  return dot(model.theta, x) + model.theta0;
}

}  // namespace embedrul
