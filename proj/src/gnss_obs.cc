#include "gnsspdr/gnss_obs.h"

#include <algorithm>
#include <cmath>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

constexpr double kMinRange = 1e6;

double checked_range(const EcefPoint& rx_pos, const SatObservation& obs) {
  const double range = (obs.sat_pos - rx_pos).norm();
  if (!(range >= kMinRange)) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "geometric range to " + obs.sat_id + " below 1e6 m");
  }
  return range;
}

}  // namespace

void WeightModel::validate() const {
  if (!(sigma0 > 0.0)) throw Error(ErrorKind::kConfigError, "sigma0 must be > 0");
  if (!(snr_ref > snr_floor)) {
    throw Error(ErrorKind::kConfigError, "snr_ref must exceed snr_floor");
  }
  if (!(doppler_weight_scale >= 1.0)) {
    throw Error(ErrorKind::kConfigError, "doppler_weight_scale must be >= 1");
  }
}

double predict_pseudorange(const EcefPoint& rx_pos, double rx_clock_bias,
                           const SatObservation& obs) {
  return checked_range(rx_pos, obs) + rx_clock_bias - obs.sat_clock_bias;
}

double predict_range_rate(const EcefPoint& rx_pos, const EcefVelocity& rx_vel,
                          double rx_clock_drift, const SatObservation& obs) {
  const double range = checked_range(rx_pos, obs);
  const Eigen::Vector3d los = (obs.sat_pos - rx_pos) / range;
  const auto& ps = obs.sat_pos;
  const auto& vs = obs.sat_vel;
  const double rotation =
      EarthConstants::kOmegaEarth / EarthConstants::kSpeedOfLight *
      (vs.y() * rx_pos.x() + ps.y() * rx_vel.x() - ps.x() * rx_vel.y() -
       vs.x() * rx_pos.y());
  return los.dot(vs - rx_vel) + rotation + rx_clock_drift - obs.sat_clock_drift;
}

double pseudorange_variance(double snr, double elevation, const WeightModel& w) {
  if (!(elevation > 0.0)) {
    throw Error(ErrorKind::kInvalidElevation, "elevation must be positive");
  }
  const double snr_eff = std::clamp(snr, w.snr_floor, w.snr_ref);
  const double snr_term = std::pow(10.0, (w.snr_ref - snr_eff) / 10.0);
  const double elev_term =
      std::pow(std::sin(std::min(elevation, 1.5707963267948966)),
               w.elevation_exponent);
  return w.sigma0 * w.sigma0 * snr_term / elev_term;
}

double doppler_variance(double snr, double elevation, const WeightModel& w) {
  const double base = pseudorange_variance(snr, elevation, w);
  // Unit-bridging constant from m^2 to (m/s)^2 is 1.
  return w.doppler_scale_on_covariance ? base * w.doppler_weight_scale
                                       : base / w.doppler_weight_scale;
}

EpochObservations mask_observations(const EpochObservations& obs,
                                    const MaskThresholds& mask) {
  EpochObservations kept;
  kept.reserve(obs.size());
  std::copy_if(obs.begin(), obs.end(), std::back_inserter(kept),
               [&](const SatObservation& o) {
                 return o.elevation >= mask.min_elevation &&
                        o.snr >= mask.min_snr;
               });
  return kept;
}

void assign_elevations(EpochObservations& obs, const EcefPoint& rx_pos) {
  for (auto& o : obs) o.elevation = elevation_azimuth(rx_pos, o.sat_pos).elevation;
}

}  // namespace gnsspdr
