#include "gnsspdr/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnsspdr/errors.h"

namespace gnsspdr {

std::vector<double> horizontal_errors(std::span<const EcefPoint> estimate,
                                      std::span<const EcefPoint> truth,
                                      const GeodeticPoint& origin) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorKind::kAlignmentError,
                "estimate has " + std::to_string(estimate.size()) +
                    " epochs, truth has " + std::to_string(truth.size()));
  }
  // The origin translation cancels in the difference; only the rotation
  // matters.
  const Eigen::Matrix3d r = ecef_to_enu_rotation(origin);
  std::vector<double> out(estimate.size());
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Eigen::Vector3d d = r * (estimate[i] - truth[i]);
    out[i] = std::hypot(d.x(), d.y());
  }
  return out;
}

std::vector<double> horizontal_errors(std::span<const EcefPoint> estimate,
                                      std::span<const double> estimate_times,
                                      std::span<const EcefPoint> truth,
                                      std::span<const double> truth_times,
                                      const GeodeticPoint& origin) {
  if (estimate_times.size() != truth_times.size() ||
      estimate_times.size() != estimate.size()) {
    throw Error(ErrorKind::kAlignmentError, "epoch count mismatch");
  }
  for (std::size_t i = 0; i < estimate_times.size(); ++i) {
    if (!(std::abs(estimate_times[i] - truth_times[i]) <= 1e-6)) {
      throw Error(ErrorKind::kAlignmentError,
                  "epoch " + std::to_string(i) + " timestamps differ");
    }
  }
  return horizontal_errors(estimate, truth, origin);
}

ErrorStats summarize(std::span<const double> errors) {
  if (errors.empty()) throw Error(ErrorKind::kEmptyInput, "no errors to summarize");
  const double n = static_cast<double>(errors.size());
  ErrorStats s;
  s.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  double sq = 0.0, var = 0.0;
  for (double e : errors) {
    sq += e * e;
    var += (e - s.mean) * (e - s.mean);
  }
  s.rmse = std::sqrt(sq / n);
  s.std = std::sqrt(var / n);
  s.max = *std::max_element(errors.begin(), errors.end());
  return s;
}

ErrorStats improvement(const ErrorStats& baseline, const ErrorStats& method) {
  auto pct = [](double b, double m) {
    if (b == 0.0) {
      throw Error(ErrorKind::kDivisionByZero, "baseline statistic is zero");
    }
    return 100.0 * (b - m) / b;
  };
  return {pct(baseline.rmse, method.rmse), pct(baseline.mean, method.mean),
          pct(baseline.std, method.std), pct(baseline.max, method.max)};
}

std::size_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram histogram(std::span<const double> values, double bin_width) {
  if (!(bin_width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "bin width must be positive");
  }
  Histogram h;
  h.bin_width = bin_width;
  std::vector<std::int64_t> idx;
  idx.reserve(values.size());
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    idx.push_back(static_cast<std::int64_t>(std::floor(v / bin_width + 0.5)));
  }
  if (idx.empty()) return h;
  const auto [lo, hi] = std::minmax_element(idx.begin(), idx.end());
  const std::int64_t half = std::max(-*lo, *hi);
  h.min_index = -half;
  h.counts.assign(static_cast<std::size_t>(2 * half + 1), 0);
  for (auto i : idx) ++h.counts[static_cast<std::size_t>(i - h.min_index)];
  return h;
}

}  // namespace gnsspdr
