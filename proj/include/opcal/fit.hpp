#pragma once

#include <cmath>
#include <vector>

#include "opcal/errors.hpp"

namespace opcal {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;     // in log10 of the value
  bool identically_zero = false;
  int points_used = 0;
};

// Least-squares slope of log10(values) against log10(scales).  Entries that
// are exactly zero (below 1e-300) are treated as an identically vanishing
// branch when they all are, and skipped otherwise.
inline SlopeFit loglog_fit(const std::vector<double>& scales, const std::vector<double>& values) {
  if (scales.size() != values.size() || scales.size() < 2)
    throw argument_error("slope fit needs matching lists of at least two points");
  SlopeFit out;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0)) throw argument_error("slope fit scales must be positive");
    if (values[i] < 0 || !std::isfinite(values[i]))
      throw numerical_error("slope fit saw a negative or non-finite value");
    if (values[i] < 1e-300) continue;
    lx.push_back(std::log10(scales[i]));
    ly.push_back(std::log10(values[i]));
  }
  if (lx.empty()) {
    out.identically_zero = true;
    return out;
  }
  if (lx.size() < 2) throw numerical_error("slope fit has fewer than two usable points");
  double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double denom = n * sxx - sx * sx;
  out.slope = (n * sxy - sx * sy) / denom;
  out.intercept = (sy - out.slope * sx) / n;
  out.points_used = static_cast<int>(lx.size());
  return out;
}

}  // namespace opcal
