#include "gnsspdr/pdr.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kStandardGravity = 9.80665;

double wrap_two_pi(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

}  // namespace

void PdrConfig::validate() const {
  auto in_unit = [](double a) { return a >= 0.0 && a < 1.0; };
  if (!in_unit(alpha_acc) || !in_unit(alpha_mag) || !in_unit(alpha_gravity)) {
    throw Error(ErrorKind::kConfigError, "PDR filter alphas must lie in [0, 1)");
  }
  if (!(k_w > 0.0)) throw Error(ErrorKind::kConfigError, "k_w must be > 0");
  if (!(detector.refractory >= 0.0) || !(detector.max_half_window > 0.0)) {
    throw Error(ErrorKind::kConfigError, "invalid step detector timing");
  }
  if (pca_smoothing == 0) {
    throw Error(ErrorKind::kConfigError, "pca smoothing window must be >= 1");
  }
  if (!(forward_window > 0.0) || !(forward_ratio >= 1.0) ||
      !(isotropy_ratio >= 1.0)) {
    throw Error(ErrorKind::kConfigError, "invalid heading parameters");
  }
}

std::vector<FilteredSample> lowpass(std::span<const ImuSample> samples,
                                    double alpha_acc, double alpha_mag) {
  LowPassFilter acc(alpha_acc), mag(alpha_mag);
  std::vector<FilteredSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({s.t, acc.update(s.accel), mag.update(s.mag)});
  }
  return out;
}

Eigen::Matrix3d device_to_world(const Eigen::Vector3d& accel,
                                const Eigen::Vector3d& mag) {
  const double g = accel.norm();
  if (!(std::abs(g - kStandardGravity) <= 0.2 * kStandardGravity)) {
    throw Error(ErrorKind::kDegenerateOrientation,
                "accelerometer not within 20% of gravity");
  }
  const double m = mag.norm();
  if (!(m > 0.0)) {
    throw Error(ErrorKind::kDegenerateOrientation, "zero magnetic field");
  }
  const Eigen::Vector3d up = accel / g;
  if (std::abs(up.dot(mag / m)) > 0.99) {
    throw Error(ErrorKind::kDegenerateOrientation,
                "magnetic field parallel to gravity");
  }
  const Eigen::Vector3d east = mag.cross(up).normalized();
  const Eigen::Vector3d north = up.cross(east);
  Eigen::Matrix3d r;
  r.row(0) = east.transpose();
  r.row(1) = north.transpose();
  r.row(2) = up.transpose();
  return r;
}

std::vector<StepWindow> detect_steps(std::span<const double> t,
                                     std::span<const double> vertical,
                                     const StepDetectorConfig& cfg) {
  if (t.size() != vertical.size()) {
    throw Error(ErrorKind::kInvalidArgument, "time/signal length mismatch");
  }
  const std::size_t n = t.size();
  std::vector<std::size_t> dips;
  std::size_t i = 0;
  while (i < n) {
    if (!(vertical[i] < cfg.dip_threshold)) {
      ++i;
      continue;
    }
    // Deepest sample of this below-threshold excursion.
    std::size_t best = i;
    while (i < n && vertical[i] < cfg.dip_threshold) {
      if (vertical[i] < vertical[best]) best = i;
      ++i;
    }
    if (!dips.empty() && t[best] - t[dips.back()] < cfg.refractory) {
      if (vertical[best] < vertical[dips.back()]) dips.back() = best;
    } else {
      dips.push_back(best);
    }
  }

  auto index_at_or_after = [&](double time) {
    return static_cast<std::size_t>(
        std::lower_bound(t.begin(), t.end(), time) - t.begin());
  };
  auto index_after = [&](double time) {
    return static_cast<std::size_t>(
        std::upper_bound(t.begin(), t.end(), time) - t.begin());
  };

  std::vector<StepWindow> windows;
  windows.reserve(dips.size());
  for (std::size_t k = 0; k < dips.size(); ++k) {
    StepWindow w;
    w.dip = dips[k];
    w.t_dip = t[w.dip];
    w.begin = index_at_or_after(w.t_dip - cfg.max_half_window);
    if (k > 0) w.begin = std::max(w.begin, dips[k - 1]);
    w.end = index_after(w.t_dip + cfg.max_half_window);
    if (k + 1 < dips.size()) w.end = std::min(w.end, dips[k + 1] + 1);
    const auto first = vertical.begin() + static_cast<std::ptrdiff_t>(w.begin);
    const auto last = vertical.begin() + static_cast<std::ptrdiff_t>(w.end);
    w.a_max = *std::max_element(first, last);
    w.a_min = vertical[w.dip];
    windows.push_back(w);
  }
  return windows;
}

double stride_length(double a_v_max, double a_v_min, double k_w) {
  if (!(a_v_max > a_v_min)) {
    throw Error(ErrorKind::kInvalidWindow, "stride window has no amplitude");
  }
  return k_w * std::pow(a_v_max - a_v_min, 0.25);
}

double heading_pca(std::span<const Eigen::Vector2d> horizontal,
                   std::size_t smoothing, double min_ratio) {
  if (horizontal.size() < 10) {
    throw Error(ErrorKind::kInvalidWindow, "PCA window needs >= 10 samples");
  }
  const std::size_t w = std::clamp<std::size_t>(smoothing, 1, horizontal.size());
  std::vector<Eigen::Vector2d> smooth;
  smooth.reserve(horizontal.size() - w + 1);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < horizontal.size(); ++i) {
    acc += horizontal[i];
    if (i >= w) acc -= horizontal[i - w];
    if (i + 1 >= w) smooth.push_back(acc / static_cast<double>(w));
  }
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& s : smooth) mean += s;
  mean /= static_cast<double>(smooth.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& s : smooth) cov += (s - mean) * (s - mean).transpose();
  cov /= static_cast<double>(smooth.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double major = eig.eigenvalues()(1);
  const double minor = std::max(eig.eigenvalues()(0), 0.0);
  if (!(major > 0.0) || major < min_ratio * minor) {
    throw Error(ErrorKind::kIsotropicWindow,
                "horizontal acceleration has no dominant axis");
  }
  const Eigen::Vector2d axis = eig.eigenvectors().col(1);
  double az = std::atan2(axis.x(), axis.y());
  if (az < 0.0) az += kPi;
  if (az >= kPi) az -= kPi;
  return az;
}

double resolve_forward(double axis, double t_dip, std::span<const double> t,
                       std::span<const double> projected, double window,
                       double min_ratio) {
  if (t.size() != projected.size()) {
    throw Error(ErrorKind::kInvalidArgument, "time/signal length mismatch");
  }
  double along = -std::numeric_limits<double>::infinity();
  double against = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_dip || t[i] > t_dip + window) continue;
    along = std::max(along, projected[i]);
    against = std::max(against, -projected[i]);
  }
  const double hi = std::max(along, against);
  const double lo = std::min(along, against);
  if (!(hi > 0.0) || (lo > 0.0 && hi < min_ratio * lo)) {
    throw Error(ErrorKind::kAmbiguousForward,
                "forward and backward peaks are indistinguishable");
  }
  return wrap_two_pi(along >= against ? axis : axis + kPi);
}

std::vector<EpochDisplacement> accumulate_epoch_displacement(
    std::span<const StepEvent> steps, std::span<const double> epoch_times,
    const GeodeticPoint& origin) {
  std::vector<EpochDisplacement> out;
  if (epoch_times.size() < 2) return out;
  out.resize(epoch_times.size() - 1);
  std::vector<Eigen::Vector3d> enu(out.size(), Eigen::Vector3d::Zero());
  for (const auto& s : steps) {
    const auto it =
        std::upper_bound(epoch_times.begin(), epoch_times.end(), s.t);
    if (it == epoch_times.begin() || it == epoch_times.end()) continue;
    const auto k = static_cast<std::size_t>(it - epoch_times.begin()) - 1;
    enu[k] += s.length *
              Eigen::Vector3d(std::sin(s.heading), std::cos(s.heading), 0.0);
  }
  const Eigen::Matrix3d enu_to_ecef = ecef_to_enu_rotation(origin).transpose();
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].epoch_index = k;
    out[k].delta_ecef = enu_to_ecef * enu[k];
  }
  return out;
}

std::vector<EcefPoint> pdr_standalone_track(
    std::span<const EpochDisplacement> displacements, const EcefPoint& start) {
  std::vector<EcefPoint> track;
  track.reserve(displacements.size() + 1);
  track.push_back(start);
  for (const auto& d : displacements) track.push_back(track.back() + d.delta_ecef);
  return track;
}

PdrResult run_pdr(std::span<const ImuSample> samples, const PdrConfig& cfg) {
  cfg.validate();
  PdrResult result;
  if (samples.empty()) return result;

  LowPassFilter gravity(cfg.alpha_gravity), acc(cfg.alpha_acc),
      mag(cfg.alpha_mag);
  std::optional<Eigen::Matrix3d> rotation;
  std::vector<double> t, vertical;
  std::vector<Eigen::Vector2d> horizontal;
  result.world.reserve(samples.size());
  for (const auto& s : samples) {
    const Eigen::Vector3d g = gravity.update(s.accel);
    const Eigen::Vector3d a = acc.update(s.accel);
    const Eigen::Vector3d m = mag.update(s.mag);
    try {
      rotation = device_to_world(g, m);
    } catch (const Error&) {
      ++result.diagnostics.orientation_failures;
      if (!rotation) continue;  // keep the last good attitude
    }
    WorldSample w{s.t, *rotation * a, *rotation * m};
    t.push_back(w.t);
    vertical.push_back(w.accel.z());
    horizontal.emplace_back(w.accel.x(), w.accel.y());
    result.world.push_back(w);
  }

  const auto windows = detect_steps(t, vertical, cfg.detector);
  std::optional<double> previous_heading;
  for (const auto& w : windows) {
    const std::span<const Eigen::Vector2d> window(horizontal.data() + w.begin,
                                                  w.end - w.begin);
    double heading = 0.0;
    try {
      const double axis = heading_pca(window, cfg.pca_smoothing,
                                      cfg.isotropy_ratio);
      const Eigen::Vector2d dir(std::sin(axis), std::cos(axis));
      std::vector<double> proj(w.end - w.dip);
      for (std::size_t i = w.dip; i < w.end; ++i) {
        proj[i - w.dip] = horizontal[i].dot(dir);
      }
      const std::span<const double> times(t.data() + w.dip, w.end - w.dip);
      try {
        heading = resolve_forward(axis, w.t_dip, times, proj,
                                  cfg.forward_window, cfg.forward_ratio);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kAmbiguousForward) throw;
        ++result.diagnostics.ambiguous_forward;
        heading = previous_heading.value_or(axis);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kIsotropicWindow &&
          e.kind() != ErrorKind::kInvalidWindow) {
        throw;
      }
      ++result.diagnostics.isotropic_windows;
      if (!previous_heading) continue;
      heading = *previous_heading;
    }
    if (!(w.a_max > w.a_min)) continue;
    double length = stride_length(w.a_max, w.a_min, cfg.k_w);
    if (length < cfg.min_length || length > cfg.max_length) {
      ++result.diagnostics.clamped_lengths;
      length = std::clamp(length, cfg.min_length, cfg.max_length);
    }
    previous_heading = heading;
    result.steps.push_back({w.t_dip, length, heading, w.a_max, w.a_min});
  }
  return result;
}

}  // namespace gnsspdr
