#pragma once

#include <span>
#include <string>
#include <vector>

namespace redsds::forecast {

enum class Normalization { none, standardization, scaling };

Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization method);

// Per-series affine transform y_norm = (y - shift) / scale with log_det = -log(scale).
// Standardization uses the population standard deviation; scaling divides by
// the mean absolute value.
struct NormalizedSeries {
  std::vector<double> values;
  Normalization method = Normalization::none;
  double shift = 0.0;
  double scale = 1.0;
  double log_det = 0.0;

  std::vector<double> denormalize(std::span<const double> normalized) const;
  double denormalize(double v) const { return v * scale + shift; }
};

// Throws DataError naming `series` for degenerate inputs.
NormalizedSeries normalize(std::span<const double> y, Normalization method, const std::string& series = "series");

}  // namespace redsds::forecast
