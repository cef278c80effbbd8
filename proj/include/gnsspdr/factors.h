// Residuals, analytic Jacobians and noise models for the factor types of the
// GNSS/PDR graph.
//
// Every residual follows the "measurement minus prediction" convention and
// every Jacobian is d(residual)/d(state), laid out as [x_t | x_{t+1}] for
// two-epoch factors. The 8-element state vector order is
// (px, py, pz, vx, vy, vz, clock_bias, clock_drift).
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Core>

#include "gnsspdr/geodesy.h"
#include "gnsspdr/gnss_obs.h"

namespace gnsspdr {

inline constexpr int kStateDim = 8;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateCovariance = Eigen::Matrix<double, kStateDim, kStateDim>;

struct EpochState {
  EcefPoint p = EcefPoint::Zero();
  EcefVelocity v = EcefVelocity::Zero();
  double clock_bias = 0.0;   ///< [m]
  double clock_drift = 0.0;  ///< [m/s]

  StateVector vector() const;
  static EpochState from_vector(const StateVector& x);
  EpochState& operator+=(const StateVector& delta);
};

enum class FactorKind {
  kPseudorange,
  kDoppler,
  kPdr,
  kCv,
  kSmm,
  /// Receiver clock random walk; not part of the eight compared pipelines,
  /// used where the graph must mirror a filter's clock model.
  kClock,
  /// Gaussian prior on a full epoch state.
  kPrior,
  /// Generic linear measurement z = H x of one epoch state.
  kLinear,
};

std::string_view to_string(FactorKind kind);

/// Noise settings shared by graph construction and the EKF.
struct FactorWeights {
  double sigma_pdr2 = 0.1;  ///< [m^2]
  double sigma_cv2 = 1.0;   ///< [(m/s)^2]
  double sigma_smm2 = 1.0;  ///< [(m/s^2)^2]
  double clock_bias_var = 1.0;   ///< [m^2] per epoch, clock factor / EKF
  double clock_drift_var = 0.1;  ///< [(m/s)^2] per epoch
  WeightModel weight_model;

  void validate() const;
};

inline constexpr int kMaxResidualDim = 8;
using ResidualVector =
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxResidualDim, 1>;
using FactorJacobian = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                     kMaxResidualDim, 2 * kStateDim>;
using SquareMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                   kMaxResidualDim, kMaxResidualDim>;

struct Linearization {
  ResidualVector residual;
  FactorJacobian jacobian;
};

Linearization pseudorange_residual(const EpochState& x,
                                   const SatObservation& obs);
Linearization doppler_residual(const EpochState& x, const SatObservation& obs);
/// delta - (p_{t+1} - p_t).
Linearization pdr_residual(const EpochState& x0, const EpochState& x1,
                           const Eigen::Vector3d& delta_ecef);
/// (p_{t+1} - p_t)/dt - (v_t + v_{t+1})/2. Throws InvalidDt for dt <= 0.
Linearization cv_residual(const EpochState& x0, const EpochState& x1, double dt);
/// 0 - (v_{t+1} - v_t)/dt. Throws InvalidDt for dt <= 0.
Linearization smm_residual(const EpochState& x0, const EpochState& x1,
                           double dt);
/// (b_{t+1} - b_t - dt * d_t, d_{t+1} - d_t).
Linearization clock_residual(const EpochState& x0, const EpochState& x1,
                             double dt);
Linearization prior_residual(const EpochState& x, const StateVector& mean);
/// z - H x.
Linearization linear_residual(const EpochState& x,
                              const Eigen::MatrixXd& h,
                              const Eigen::VectorXd& z);

struct LinearMeasurement {
  Eigen::MatrixXd h;
  Eigen::VectorXd z;
};

/// One factor of the graph. The payload carries the measurement; `whitener`
/// is the inverse Cholesky factor of the covariance, so that
/// ||whitener * r||^2 is the Mahalanobis cost.
class Factor {
 public:
  using Payload = std::variant<SatObservation, Eigen::Vector3d, double,
                               StateVector, LinearMeasurement>;

  FactorKind kind() const { return kind_; }
  std::size_t num_epochs() const { return num_epochs_; }
  std::size_t epoch(std::size_t i) const { return epochs_[i]; }
  int residual_dim() const { return static_cast<int>(covariance_.rows()); }
  const SquareMatrix& covariance() const { return covariance_; }
  const SquareMatrix& whitener() const { return whitener_; }
  const Payload& payload() const { return payload_; }
  /// Satellite id for GNSS factors, empty otherwise.
  std::string label() const;

  Linearization linearize(std::span<const EpochState> states) const;
  /// Copy with every epoch index reduced by `offset`.
  Factor shifted(std::size_t offset) const;

  static Factor pseudorange(std::size_t epoch, const SatObservation& obs,
                            const WeightModel& w);
  static Factor doppler(std::size_t epoch, const SatObservation& obs,
                        const WeightModel& w);
  static Factor pdr(std::size_t epoch, const Eigen::Vector3d& delta_ecef,
                    double sigma2);
  static Factor cv(std::size_t epoch, double dt, double sigma2);
  static Factor smm(std::size_t epoch, double dt, double sigma2);
  static Factor clock(std::size_t epoch, double dt, double bias_var,
                      double drift_var);
  static Factor prior(std::size_t epoch, const StateVector& mean,
                      const StateCovariance& covariance);
  static Factor linear(std::size_t epoch, const LinearMeasurement& m,
                       const Eigen::MatrixXd& covariance);

 private:
  Factor(FactorKind kind, std::size_t first, std::size_t count,
         Payload payload, const Eigen::MatrixXd& covariance);

  FactorKind kind_;
  std::array<std::size_t, 2> epochs_{};
  std::size_t num_epochs_ = 1;
  Payload payload_;
  SquareMatrix covariance_;
  SquareMatrix whitener_;
};

}  // namespace gnsspdr
