#include "embedrul/series.hpp"

#include <cmath>

namespace embedrul {

void MultivariateSeries::validate() const {
  const std::size_t t = length();
  const std::size_t n = dims();
  if (t == 0) fail(ErrorKind::format_error, instance_id + ": empty series");
  if (values.rows != t || present.rows != t || present.cols != n)
    fail(ErrorKind::format_error, instance_id + ": shape mismatch");
  if (timestamps[0] != 0.0)
    fail(ErrorKind::format_error, instance_id + ": first timestamp must be 0");
  for (std::size_t i = 1; i < t; ++i)
    if (!(timestamps[i] > timestamps[i - 1]))
      fail(ErrorKind::format_error,
           instance_id + ": timestamps not strictly increasing");
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = present(i, j);
      if (p != 0.0 && p != 1.0)
        fail(ErrorKind::format_error, instance_id + ": presence flag not 0/1");
      if (!std::isfinite(values(i, j)))
        fail(ErrorKind::format_error, instance_id + ": non-finite value");
    }
  }
}

MultivariateSeries add_gaussian_noise(const MultivariateSeries& s, double sigma,
                                      Rng& rng) {
  if (sigma < 0.0)
    fail(ErrorKind::invalid_argument, "add_gaussian_noise: sigma < 0");
  if (sigma == 0.0) return s;
  MultivariateSeries out = s;
  for (std::size_t i = 0; i < s.length(); ++i)
    for (std::size_t j = 0; j < s.dims(); ++j)
      if (s.present(i, j) != 0.0) out.values(i, j) += sigma * rng.normal();
  return out;
}

MultivariateSeries truncate_at(const MultivariateSeries& s, std::size_t t) {
  if (t < 1 || t > s.length())
    fail(ErrorKind::invalid_argument, "truncate_at: t out of range");
  MultivariateSeries out;
  out.instance_id = s.instance_id;
  out.timestamps.assign(s.timestamps.begin(), s.timestamps.begin() + t);
  out.values = Matrix(t, s.dims());
  out.present = Matrix(t, s.dims());
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < s.dims(); ++j) {
      out.values(i, j) = s.values(i, j);
      out.present(i, j) = s.present(i, j);
    }
  return out;
}

}  // namespace embedrul
