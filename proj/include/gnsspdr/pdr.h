// Pedestrian dead reckoning: low-pass filtering, accelerometer/magnetometer
// orientation, step detection, Weinberg stride length, PCA heading with
// forward disambiguation, and per-epoch ECEF displacement.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gnsspdr/geodesy.h"

namespace gnsspdr {

struct ImuSample {
  double t = 0.0;                               ///< [s]
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  ///< device frame [m/s^2]
  Eigen::Vector3d mag = Eigen::Vector3d::Zero();    ///< device frame [uT]
};

/// Low-pass filtered accelerometer/magnetometer, still in the device frame.
struct FilteredSample {
  double t = 0.0;
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();
  Eigen::Vector3d mag = Eigen::Vector3d::Zero();
};

/// Filtered sample rotated into local ENU. `accel.z()` includes gravity.
struct WorldSample {
  double t = 0.0;
  EnuVector accel = EnuVector::Zero();
  EnuVector mag = EnuVector::Zero();
};

struct StepEvent {
  double t = 0.0;        ///< time of the vertical-acceleration dip [s]
  double length = 0.0;   ///< [m]
  double heading = 0.0;  ///< [rad] clockwise from north, [0, 2pi)
  double a_v_max = 0.0;  ///< [m/s^2]
  double a_v_min = 0.0;  ///< [m/s^2]
};

/// Displacement between epoch `epoch_index` and `epoch_index + 1`.
struct EpochDisplacement {
  std::size_t epoch_index = 0;
  Eigen::Vector3d delta_ecef = Eigen::Vector3d::Zero();
};

struct StepWindow {
  std::size_t dip = 0;    ///< sample index of the dip
  std::size_t begin = 0;  ///< first sample of the bracketing window
  std::size_t end = 0;    ///< one past the last sample
  double t_dip = 0.0;
  double a_max = 0.0;
  double a_min = 0.0;
};

struct StepDetectorConfig {
  double dip_threshold = 7.5;       ///< [m/s^2], strict: dips must go below
  double refractory = 0.3;          ///< [s] minimum spacing between dips
  double max_half_window = 1.0;     ///< [s] bracket limit without a neighbor
};

struct PdrConfig {
  double alpha_acc = 0.6;
  double alpha_mag = 0.84;
  /// Smoothing of the raw accelerometer used only as the gravity reference
  /// for orientation.
  double alpha_gravity = 0.995;
  double k_w = 0.713;
  StepDetectorConfig detector;
  std::size_t pca_smoothing = 5;
  double isotropy_ratio = 1.2;
  double forward_window = 0.25;  ///< [s] after the dip
  double forward_ratio = 1.1;
  double min_length = 0.1;
  double max_length = 2.5;

  void validate() const;
};

/// Exponential smoother: y_t = (1 - alpha) x_t + alpha y_{t-1}, seeded with
/// the first input.
class LowPassFilter {
 public:
  explicit LowPassFilter(double alpha) : alpha_(alpha) {}

  const Eigen::Vector3d& update(const Eigen::Vector3d& x) {
    if (!state_) {
      state_ = x;
    } else {
      *state_ = (1.0 - alpha_) * x + alpha_ * *state_;
    }
    return *state_;
  }
  bool primed() const { return state_.has_value(); }
  void reset() { state_.reset(); }

 private:
  double alpha_;
  std::optional<Eigen::Vector3d> state_;
};

std::vector<FilteredSample> lowpass(std::span<const ImuSample> samples,
                                    double alpha_acc, double alpha_mag);

/// Device-to-ENU rotation from a gravity reference (specific force, pointing
/// up at rest) and the magnetic field: up = normalize(accel),
/// east = normalize(mag x up), north = up x east.
/// Throws DegenerateOrientation when the accelerometer is more than 20% away
/// from 1 g or the field is nearly parallel to gravity.
Eigen::Matrix3d device_to_world(const Eigen::Vector3d& accel,
                                const Eigen::Vector3d& mag);

/// One window per dip below the threshold; `vertical` includes gravity.
std::vector<StepWindow> detect_steps(std::span<const double> t,
                                     std::span<const double> vertical,
                                     const StepDetectorConfig& cfg = {});

/// Weinberg: k_w * (a_max - a_min)^0.25. Throws InvalidWindow if
/// a_max <= a_min.
double stride_length(double a_v_max, double a_v_min, double k_w = 0.713);

/// Principal horizontal axis of (east, north) accelerations after a moving
/// average, as an undirected azimuth in [0, pi).
/// Throws IsotropicWindow when the eigenvalue ratio is below `min_ratio`,
/// InvalidWindow for fewer than 10 samples.
double heading_pca(std::span<const Eigen::Vector2d> horizontal,
                   std::size_t smoothing = 5, double min_ratio = 1.2);

/// Chooses `axis` or `axis + pi`: the direction whose projected acceleration
/// peaks in [t_dip, t_dip + window]. `projected` is the horizontal
/// acceleration projected on the `axis` direction. Throws AmbiguousForward
/// when the two peaks are within `min_ratio` of each other.
double resolve_forward(double axis, double t_dip, std::span<const double> t,
                       std::span<const double> projected, double window = 0.25,
                       double min_ratio = 1.1);

/// Sums step contributions (by dip time) into each interval
/// [epoch_times[k], epoch_times[k+1]), rotated from ENU at `origin` to ECEF.
std::vector<EpochDisplacement> accumulate_epoch_displacement(
    std::span<const StepEvent> steps, std::span<const double> epoch_times,
    const GeodeticPoint& origin);

/// Cumulative sum of displacements starting at `start`; one point per epoch.
std::vector<EcefPoint> pdr_standalone_track(
    std::span<const EpochDisplacement> displacements, const EcefPoint& start);

struct PdrDiagnostics {
  std::size_t orientation_failures = 0;
  std::size_t isotropic_windows = 0;
  std::size_t ambiguous_forward = 0;
  std::size_t clamped_lengths = 0;
};

struct PdrResult {
  std::vector<StepEvent> steps;
  std::vector<WorldSample> world;
  PdrDiagnostics diagnostics;
};

/// Full front-end from raw IMU samples to step events.
PdrResult run_pdr(std::span<const ImuSample> samples, const PdrConfig& cfg = {});

}  // namespace gnsspdr
