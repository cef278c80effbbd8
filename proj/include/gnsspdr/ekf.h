// Extended Kalman filter baseline over the same 8-element epoch state as the
// factor graph. Prediction uses the PDR displacement as a control input; the
// update stacks every pseudorange and Doppler of an epoch.
#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "gnsspdr/factors.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/pdr.h"

namespace gnsspdr {

struct EkfState {
  EpochState mean;
  StateCovariance covariance = StateCovariance::Identity();
};

/// Per-epoch process noise. Velocity noise is an acceleration variance and is
/// scaled by dt^2.
struct ProcessNoise {
  double position_var = 0.1;      ///< [m^2], PDR displacement uncertainty
  double acceleration_var = 1.0;  ///< [(m/s^2)^2]
  double clock_bias_var = 1.0;    ///< [m^2]
  double clock_drift_var = 0.1;   ///< [(m/s)^2]

  static ProcessNoise from_weights(const FactorWeights& w);
  StateCovariance matrix(double dt) const;
};

struct EkfConfig {
  FactorWeights weights;
  int update_passes = 2;
  /// Drop measurements whose normalized innovation squared exceeds
  /// `gate_chi2` (1 dof). Off by default.
  bool innovation_gating = false;
  double gate_chi2 = 10.83;
  /// Propagate with the velocity state and treat displacement / dt as a
  /// velocity measurement instead of a control input.
  bool pdr_as_measurement = false;
  /// Diagonal of the initial covariance.
  StateVector initial_variance =
      (StateVector() << 25.0, 25.0, 25.0, 1.0, 1.0, 1.0, 25.0, 1.0).finished();
};

/// p += delta, v random walk, clock_bias += clock_drift * dt;
/// P = F P F^T + Q. Throws InvalidDt for dt <= 0.
EkfState ekf_predict(const EkfState& state, const Eigen::Vector3d& delta_ecef,
                     double dt, const ProcessNoise& q);

/// Constant-velocity prediction p += v dt used when PDR enters as a
/// measurement.
EkfState ekf_predict_cv(const EkfState& state, double dt,
                        const ProcessNoise& q);

/// Linear update with z = H x + noise(R); Joseph-form covariance.
EkfState ekf_update_linear(const EkfState& state, const Eigen::MatrixXd& h,
                           const Eigen::VectorXd& z, const Eigen::MatrixXd& r);

/// Iterated update over the stacked pseudorange and Doppler residuals with
/// the graph's variances. Returns the input unchanged for an empty list.
EkfState ekf_update(const EkfState& state, const EpochObservations& obs,
                    const EkfConfig& cfg = {});

struct EkfRun {
  std::vector<EkfState> states;
};

/// Filters a whole trajectory. Starts at the first epoch with a single-epoch
/// fix; earlier epochs are dead-reckoned backwards from it.
/// `displacements` needs one entry per epoch interval.
/// Throws EmptyGraph when no epoch yields a fix.
EkfRun run_ekf(std::span<const double> times,
               std::span<const EpochObservations> epochs,
               std::span<const EpochDisplacement> displacements,
               const EkfConfig& cfg = {});

}  // namespace gnsspdr
