#include "redsds/normalization.hpp"

#include <cmath>

#include "redsds/error.hpp"

namespace redsds::forecast {

Normalization parse_normalization(const std::string& name) {
  if (name == "none") return Normalization::none;
  if (name == "standardization") return Normalization::standardization;
  if (name == "scaling") return Normalization::scaling;
  throw ContractError("unknown normalization '" + name + "' (none, standardization, scaling)");
}

std::string to_string(Normalization method) {
  switch (method) {
    case Normalization::standardization: return "standardization";
    case Normalization::scaling: return "scaling";
    default: return "none";
  }
}

std::vector<double> NormalizedSeries::denormalize(std::span<const double> normalized) const {
  std::vector<double> out(normalized.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalized[i] * scale + shift;
  return out;
}

NormalizedSeries normalize(std::span<const double> y, Normalization method, const std::string& series) {
  require(!y.empty(), "normalize: empty series");
  NormalizedSeries out;
  out.method = method;
  const double n = static_cast<double>(y.size());
  if (method == Normalization::standardization) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0) || !std::isfinite(sd)) throw DataError(series + ": zero standard deviation, cannot standardize");
    out.shift = mean;
    out.scale = sd;
  } else if (method == Normalization::scaling) {
    double s = 0.0;
    for (double v : y) s += std::abs(v);
    s /= n;
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError(series + ": zero mean absolute value, cannot scale");
    out.scale = s;
  }
  out.log_det = -std::log(out.scale);
  out.values.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.values[i] = (y[i] - out.shift) / out.scale;
  return out;
}

}  // namespace redsds::forecast
