// Horizontal ENU error statistics, improvement percentages and residual
// histograms.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnsspdr/geodesy.h"

namespace gnsspdr {

/// Horizontal (east-north) error summary. `std` is the population standard
/// deviation; `mean` is the mean of per-epoch error norms.
struct ErrorStats {
  double rmse = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
};

/// Per-epoch sqrt(de^2 + dn^2) at `origin`. Throws AlignmentError when the
/// series lengths differ.
std::vector<double> horizontal_errors(std::span<const EcefPoint> estimate,
                                      std::span<const EcefPoint> truth,
                                      const GeodeticPoint& origin);

/// Same, additionally checking that the epoch timestamps agree to 1e-6 s.
std::vector<double> horizontal_errors(std::span<const EcefPoint> estimate,
                                      std::span<const double> estimate_times,
                                      std::span<const EcefPoint> truth,
                                      std::span<const double> truth_times,
                                      const GeodeticPoint& origin);

/// Throws EmptyInput.
ErrorStats summarize(std::span<const double> errors);

/// 100 (baseline - method) / baseline per field. Throws DivisionByZero when
/// a baseline field is 0.
ErrorStats improvement(const ErrorStats& baseline, const ErrorStats& method);

/// Bins centred on 0: bin i covers [(i - 1/2) w, (i + 1/2) w). The index
/// range is symmetric, -K..K. `counts[j]` belongs to bin `min_index + j`.
struct Histogram {
  double bin_width = 0.0;
  std::int64_t min_index = 0;
  std::vector<std::size_t> counts;

  double bin_center(std::size_t j) const {
    return static_cast<double>(min_index + static_cast<std::int64_t>(j)) *
           bin_width;
  }
  std::size_t total() const;
};

/// Throws InvalidArgument for a non-positive width. Non-finite values are
/// ignored.
Histogram histogram(std::span<const double> values, double bin_width);

}  // namespace gnsspdr
