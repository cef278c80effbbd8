// Deterministic synthetic walks: truth trajectory, circular-orbit
// constellation, GNSS observations with NLOS-style pseudorange bias, and a
// smartphone IMU stream whose gait signal matches the PDR front-end.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gnsspdr/factors.h"
#include "gnsspdr/geodesy.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/pdr.h"

namespace gnsspdr {

/// Satellite placed at (azimuth, elevation) seen from the scenario origin at
/// t = 0, on a circular orbit whose plane contains that point. `plane_angle`
/// rotates the orbit normal about the initial position vector.
struct SatelliteSpec {
  std::string id;
  double azimuth = 0.0;    ///< [rad]
  double elevation = 0.0;  ///< [rad]
  double plane_angle = 0.0;  ///< [rad]
  double radius = 26.56e6;   ///< [m]
  double wavelength = 0.0;   ///< [m]; 0 picks the band from the id letter
};

struct NoiseConfig {
  double pseudorange_sigma = 0.0;  ///< [m]
  double doppler_sigma = 0.0;      ///< [m/s]
  double accel_sigma = 0.0;        ///< [m/s^2]
  double mag_sigma = 0.0;          ///< [uT]
  double snr_sigma = 0.0;          ///< [dB-Hz]
};

struct NlosConfig {
  double probability = 0.2;  ///< long-run fraction of biased pseudoranges
  double bias_low = 20.0;    ///< [m]
  double bias_high = 80.0;   ///< [m]
  /// [s]; a biased satellite stays biased (same bias) this long. 0 draws
  /// every observation independently.
  double persistence = 20.0;
};

struct GaitConfig {
  double step_length = 1.2;         ///< [m]
  double forward_amplitude = 1.5;   ///< [m/s^2]
  double forward_lag = 0.1;         ///< [s] forward push after the dip
  double mount_yaw = 0.0;           ///< [rad] device yaw relative to walk
  double roll = 0.0;                ///< [rad]
  double pitch = 0.0;               ///< [rad]
  double mag_declination = 0.0;     ///< [rad]
  double imu_lead = 2.0;            ///< [s] standing still before t = 0
  /// Calibration target: vertical amplitude is chosen so that these PDR
  /// settings recover `step_length` exactly on noiseless data.
  double k_w = 0.713;
  double alpha_acc = 0.6;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  double duration = 60.0;   ///< [s]
  double epoch_rate = 1.0;  ///< [Hz]
  double imu_rate = 50.0;   ///< [Hz]
  GeodeticPoint origin{deg2rad(22.3), deg2rad(114.18), 10.0};
  std::vector<Eigen::Vector2d> waypoints{{0.0, 0.0}, {200.0, 0.0}};  ///< ENU
  double speed = 1.2;  ///< [m/s]
  GaitConfig gait;
  std::vector<SatelliteSpec> constellation = default_constellation();
  NoiseConfig noise;
  NlosConfig nlos;
  double clock_bias = 3000.0;  ///< [m] receiver clock at t = 0
  double clock_drift = 0.5;    ///< [m/s]

  /// Throws ConfigError.
  void validate() const;
  std::size_t num_epochs() const;

  static std::vector<SatelliteSpec> default_constellation();
};

struct ScenarioBundle {
  std::vector<double> times;
  std::vector<EpochState> truth;
  std::vector<EpochObservations> epochs;
  std::vector<ImuSample> imu;
  GeodeticPoint origin;
};

ScenarioBundle generate(const ScenarioConfig& config);

/// Stateful contamination with per-satellite episodes. With persistence P
/// (in epochs) an episode starts with probability p / (P (1 - p)), so the
/// long-run biased fraction is p.
class NlosContaminator {
 public:
  NlosContaminator(const NlosConfig& config, double epoch_rate);

  EpochObservations apply(const EpochObservations& obs, std::mt19937_64& rng);

 private:
  struct Episode {
    int remaining = 0;
    double bias = 0.0;
  };
  NlosConfig config_;
  int length_ = 0;
  std::map<std::string, Episode> active_;
};

/// Memoryless contamination of one epoch.
EpochObservations contaminate(const EpochObservations& obs,
                              const NlosConfig& config, std::mt19937_64& rng);

/// Noiseless ECEF position and velocity of `sat` at time t.
std::pair<EcefPoint, EcefVelocity> satellite_state(const SatelliteSpec& sat,
                                                   const GeodeticPoint& origin,
                                                   double t);

}  // namespace gnsspdr
