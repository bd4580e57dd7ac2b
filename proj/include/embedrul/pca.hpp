#pragma once

#include <vector>

#include "embedrul/matrix.hpp"

namespace embedrul {

/// Principal component basis fitted by eigendecomposition of the covariance
/// matrix. Intended for modest input widths (tens of dimensions).
struct PcaModel {
  Vec mean;                 // n
  Matrix basis;             // n × p, orthonormal columns
  Vec explained_variance;   // p, non-negative, descending

  std::size_t input_dim() const { return mean.size(); }
  std::size_t components() const { return basis.cols; }
};

/// Fits a p-component model on rows (each a length-n sample).
/// Covariance uses the population (1/N) convention, matching the
/// normalizer. Component signs are fixed so the largest-magnitude entry of
/// each component is positive (first index wins ties), making the basis
/// reproducible across runs and platforms.
PcaModel fit_pca(const std::vector<Vec>& rows, std::size_t p);

/// Projects x onto the basis: basisᵀ (x − mean). Returns a p-vector.
Vec apply_pca(const PcaModel& model, const Vec& x);

}  // namespace embedrul
