// GNSS pseudorange / range-rate measurement models, variance weighting and
// elevation/SNR masking.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gnsspdr/geodesy.h"

namespace gnsspdr {

/// One satellite's measurements at one receiver epoch. `doppler` follows the
/// internal convention `wavelength * doppler ~= range rate`; the CSV reader
/// applies the configured sign flip before this struct is populated.
struct SatObservation {
  std::string sat_id;        ///< constellation letter + PRN, e.g. "G05"
  double epoch = 0.0;        ///< receiver time [s]
  double pseudorange = 0.0;  ///< [m]
  double doppler = 0.0;      ///< [Hz]
  double wavelength = 0.0;   ///< [m]
  double snr = 0.0;          ///< [dB-Hz]
  EcefPoint sat_pos = EcefPoint::Zero();
  EcefVelocity sat_vel = EcefVelocity::Zero();
  double sat_clock_bias = 0.0;   ///< [m], not pre-applied to pseudorange
  double sat_clock_drift = 0.0;  ///< [m/s]
  /// [rad], computed from an a-priori receiver position; NaN until set.
  double elevation = std::numeric_limits<double>::quiet_NaN();
};

using EpochObservations = std::vector<SatObservation>;

/// goGPS-style weighting: SNR decade attenuation times an elevation sine
/// power. Doppler gets `doppler_weight_scale` times the pseudorange
/// information unless `doppler_scale_on_covariance` is set, in which case the
/// scale multiplies the variance instead.
struct WeightModel {
  double sigma0 = 2.0;               ///< [m]
  double snr_ref = 50.0;             ///< [dB-Hz]
  double snr_floor = 20.0;           ///< [dB-Hz]
  double elevation_exponent = 2.0;
  double doppler_weight_scale = 10.0;
  bool doppler_scale_on_covariance = false;

  void validate() const;
};

struct MaskThresholds {
  double min_elevation = 15.0 * 3.14159265358979323846 / 180.0;  ///< [rad]
  double min_snr = 20.0;                                         ///< [dB-Hz]
};

/// ||sat_pos - rx_pos|| + rx_clock_bias - sat_clock_bias.
/// Throws DegenerateGeometry when the geometric range is below 1e6 m.
double predict_pseudorange(const EcefPoint& rx_pos, double rx_clock_bias,
                           const SatObservation& obs);

/// Range rate with the Earth-rotation correction term:
///   e.(v_sat - v_rx)
///   + (omega_e / c)(v_sat_y p_rx_x + p_sat_y v_rx_x - p_sat_x v_rx_y
///                   - v_sat_x p_rx_y)
///   + rx_clock_drift - sat_clock_drift
/// with e the unit vector from receiver to satellite.
double predict_range_rate(const EcefPoint& rx_pos, const EcefVelocity& rx_vel,
                          double rx_clock_drift, const SatObservation& obs);

/// [m^2]. Throws InvalidElevation for elevation <= 0.
double pseudorange_variance(double snr, double elevation, const WeightModel& w);
/// [(m/s)^2].
double doppler_variance(double snr, double elevation, const WeightModel& w);

/// Keeps observations with elevation >= min_elevation and snr >= min_snr.
/// Observations without an elevation are dropped.
EpochObservations mask_observations(const EpochObservations& obs,
                                    const MaskThresholds& mask = {});

/// Fills `elevation` for every observation as seen from `rx_pos`.
void assign_elevations(EpochObservations& obs, const EcefPoint& rx_pos);

}  // namespace gnsspdr
