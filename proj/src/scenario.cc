#include "gnsspdr/scenario.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGravity = 9.80665;
constexpr double kFieldHorizontal = 38.0;  // [uT]
constexpr double kFieldVertical = -22.0;   // [uT], dips downward
constexpr double kL1 = EarthConstants::kSpeedOfLight / 1575.42e6;
constexpr double kB1 = EarthConstants::kSpeedOfLight / 1561.098e6;

double wavelength_of(const SatelliteSpec& s) {
  if (s.wavelength > 0.0) return s.wavelength;
  return !s.id.empty() && s.id[0] == 'C' ? kB1 : kL1;
}

// Rotation about the z axis taking the device +y axis to the heading
// direction (clockwise from north).
Eigen::Matrix3d yaw_matrix(double heading) {
  Eigen::Matrix3d r;
  r << std::cos(heading), std::sin(heading), 0.0,  //
      -std::sin(heading), std::cos(heading), 0.0,  //
      0.0, 0.0, 1.0;
  return r;
}

Eigen::Matrix3d rot_z(double a) {
  return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

// Position along the waypoint polyline after walking `s` metres; the last
// segment is extended past its end.
struct PathPoint {
  Eigen::Vector2d p;
  Eigen::Vector2d dir;
};

PathPoint along(const std::vector<Eigen::Vector2d>& w, double s) {
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Eigen::Vector2d seg = w[i + 1] - w[i];
    const double len = seg.norm();
    if (s <= len || i + 2 == w.size()) {
      return {w[i] + seg / len * s, seg / len};
    }
    s -= len;
  }
  return {w.front(), {0.0, 1.0}};
}

// Steady-state gain of y = (1 - a) x + a y_prev at normalized frequency w.
double lowpass_gain(double alpha, double w) {
  return (1.0 - alpha) /
         std::sqrt(1.0 - 2.0 * alpha * std::cos(w) + alpha * alpha);
}

double draw_bias(const NlosConfig& c, std::mt19937_64& rng) {
  if (c.bias_low == c.bias_high) return c.bias_low;
  return std::uniform_real_distribution<double>(c.bias_low, c.bias_high)(rng);
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfigError, m); };
  if (!(duration > 0.0)) fail("duration must be > 0");
  if (!(epoch_rate > 0.0) || !(imu_rate > 0.0)) fail("rates must be > 0");
  if (!(speed > 0.0)) fail("speed must be > 0");
  if (waypoints.size() < 2) fail("need at least two waypoints");
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    if (!((waypoints[i + 1] - waypoints[i]).norm() > 0.0)) {
      fail("waypoints must be distinct");
    }
  }
  if (!(gait.step_length > 0.0) || !(gait.k_w > 0.0)) fail("invalid gait");
  if (!(gait.alpha_acc >= 0.0 && gait.alpha_acc < 1.0)) fail("invalid gait alpha");
  if (!(gait.imu_lead >= 0.0)) fail("imu_lead must be >= 0");
  if (imu_rate < 10.0 * speed / gait.step_length) {
    fail("imu_rate too low for the step frequency");
  }
  if (constellation.empty()) fail("empty constellation");
  for (const auto& s : constellation) {
    if (s.id.empty()) fail("satellite without id");
    if (!(s.elevation > 0.0 && s.elevation <= kPi / 2)) {
      fail("satellite elevation must lie in (0, 90] deg");
    }
    if (!(s.radius > 7e6)) fail("satellite orbit radius too small");
  }
  if (!(noise.pseudorange_sigma >= 0.0) || !(noise.doppler_sigma >= 0.0) ||
      !(noise.accel_sigma >= 0.0) || !(noise.mag_sigma >= 0.0) ||
      !(noise.snr_sigma >= 0.0)) {
    fail("noise sigmas must be >= 0");
  }
  if (!(nlos.probability >= 0.0 && nlos.probability <= 1.0)) {
    fail("nlos probability must lie in [0, 1]");
  }
  if (!(nlos.bias_low >= 0.0) || !(nlos.bias_high >= nlos.bias_low)) {
    fail("nlos bias range must satisfy 0 <= low <= high");
  }
  if (!(nlos.persistence >= 0.0)) fail("nlos persistence must be >= 0");
}

std::size_t ScenarioConfig::num_epochs() const {
  return static_cast<std::size_t>(std::llround(duration * epoch_rate));
}

std::vector<SatelliteSpec> ScenarioConfig::default_constellation() {
  const double d = kPi / 180.0;
  return {
      {"G02", 0.0 * d, 78.0 * d, 0.0 * d},
      {"C06", 200.0 * d, 64.0 * d, 20.0 * d},
      {"G05", 100.0 * d, 52.0 * d, -30.0 * d},
      {"C09", 300.0 * d, 44.0 * d, 45.0 * d},
      {"G12", 45.0 * d, 36.0 * d, 10.0 * d},
      {"C14", 160.0 * d, 28.0 * d, -15.0 * d},
      {"G25", 250.0 * d, 21.0 * d, 60.0 * d},
      {"C21", 340.0 * d, 17.0 * d, -50.0 * d},
  };
}

std::pair<EcefPoint, EcefVelocity> satellite_state(const SatelliteSpec& sat,
                                                   const GeodeticPoint& origin,
                                                   double t) {
  const EcefPoint r0 = geodetic_to_ecef(origin);
  const Eigen::Vector3d los_enu(std::cos(sat.elevation) * std::sin(sat.azimuth),
                                std::cos(sat.elevation) * std::cos(sat.azimuth),
                                std::sin(sat.elevation));
  const Eigen::Vector3d u = ecef_to_enu_rotation(origin).transpose() * los_enu;
  const double b = r0.dot(u);
  const double rho = -b + std::sqrt(b * b - r0.squaredNorm() + sat.radius * sat.radius);
  const Eigen::Vector3d s_hat = (r0 + rho * u).normalized();

  Eigen::Vector3d w = Eigen::Vector3d::UnitZ() - s_hat.z() * s_hat;
  if (w.norm() < 1e-9) w = Eigen::Vector3d::UnitX() - s_hat.x() * s_hat;
  w = Eigen::AngleAxisd(sat.plane_angle, s_hat) * w.normalized();

  const double n = std::sqrt(EarthConstants::kGm / std::pow(sat.radius, 3));
  const Eigen::Vector3d pos_i =
      sat.radius * (std::cos(n * t) * s_hat + std::sin(n * t) * w);
  const Eigen::Vector3d vel_i =
      sat.radius * n * (-std::sin(n * t) * s_hat + std::cos(n * t) * w);
  const Eigen::Matrix3d rz = rot_z(-EarthConstants::kOmegaEarth * t);
  const EcefPoint pos = rz * pos_i;
  const EcefVelocity vel =
      rz * vel_i -
      EarthConstants::kOmegaEarth * Eigen::Vector3d::UnitZ().cross(pos);
  return {pos, vel};
}

NlosContaminator::NlosContaminator(const NlosConfig& config, double epoch_rate)
    : config_(config),
      length_(static_cast<int>(std::llround(config.persistence * epoch_rate))) {}

EpochObservations NlosContaminator::apply(const EpochObservations& obs,
                                          std::mt19937_64& rng) {
  if (length_ <= 0) return contaminate(obs, config_, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p = config_.probability;
  const double start = p >= 1.0 ? 1.0 : p / (length_ * (1.0 - p));
  EpochObservations out = obs;
  for (auto& o : out) {
    Episode& e = active_[o.sat_id];
    if (e.remaining <= 0 && p > 0.0 && unit(rng) < start) {
      e.remaining = length_;
      e.bias = draw_bias(config_, rng);
    }
    if (e.remaining > 0) {
      o.pseudorange += e.bias;
      --e.remaining;
    }
  }
  return out;
}

EpochObservations contaminate(const EpochObservations& obs,
                              const NlosConfig& config, std::mt19937_64& rng) {
  EpochObservations out = obs;
  if (!(config.probability > 0.0)) return out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& o : out) {
    if (config.probability >= 1.0 || unit(rng) < config.probability) {
      o.pseudorange += draw_bias(config, rng);
    }
  }
  return out;
}

ScenarioBundle generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&](double sigma) { return sigma > 0.0 ? sigma * gauss(rng) : 0.0; };

  ScenarioBundle b;
  b.origin = cfg.origin;
  const Eigen::Matrix3d enu_to_ecef = ecef_to_enu_rotation(cfg.origin).transpose();
  const EcefPoint origin_ecef = geodetic_to_ecef(cfg.origin);

  // Truth.
  const std::size_t n = cfg.num_epochs();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / cfg.epoch_rate;
    const PathPoint pp = along(cfg.waypoints, cfg.speed * t);
    EpochState s;
    s.p = origin_ecef + enu_to_ecef * Eigen::Vector3d(pp.p.x(), pp.p.y(), 0.0);
    s.v = enu_to_ecef * Eigen::Vector3d(pp.dir.x(), pp.dir.y(), 0.0) * cfg.speed;
    s.clock_bias = cfg.clock_bias + cfg.clock_drift * t;
    s.clock_drift = cfg.clock_drift;
    b.times.push_back(t);
    b.truth.push_back(s);
  }

  // Satellite clocks are fixed per satellite for the run.
  std::uniform_real_distribution<double> clk(-50.0, 50.0);
  std::uniform_real_distribution<double> clk_drift(-0.01, 0.01);
  std::vector<std::pair<double, double>> sat_clock;
  for (std::size_t i = 0; i < cfg.constellation.size(); ++i) {
    const double c0 = clk(rng);
    sat_clock.emplace_back(c0, clk_drift(rng));
  }

  NlosContaminator nlos(cfg.nlos, cfg.epoch_rate);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = b.times[k];
    const EpochState& x = b.truth[k];
    EpochObservations epoch;
    for (std::size_t i = 0; i < cfg.constellation.size(); ++i) {
      const auto& spec = cfg.constellation[i];
      const auto [pos, vel] = satellite_state(spec, cfg.origin, t);
      SatObservation o;
      o.sat_id = spec.id;
      o.epoch = t;
      o.wavelength = wavelength_of(spec);
      o.sat_pos = pos;
      o.sat_vel = vel;
      o.sat_clock_bias = sat_clock[i].first + sat_clock[i].second * t;
      o.sat_clock_drift = sat_clock[i].second;
      const double el = elevation_azimuth(x.p, pos).elevation;
      if (!(el > 0.0)) continue;  // below the horizon: not tracked
      o.elevation = el;  // true geometry; not written to CSV
      o.snr = std::clamp(30.0 + 18.0 * std::sin(el) + noise(cfg.noise.snr_sigma),
                         0.0, 60.0);
      o.pseudorange = predict_pseudorange(x.p, x.clock_bias, o) +
                      noise(cfg.noise.pseudorange_sigma);
      o.doppler = (predict_range_rate(x.p, x.v, x.clock_drift, o) +
                   noise(cfg.noise.doppler_sigma)) /
                  o.wavelength;
      epoch.push_back(std::move(o));
    }
    b.epochs.push_back(nlos.apply(epoch, rng));
  }

  // IMU: standing for imu_lead seconds, then walking from t = 0.
  const GaitConfig& g = cfg.gait;
  const double f_step = cfg.speed / g.step_length;
  const double t_dip0 = 0.5 / f_step;
  const double omega = 2.0 * kPi * f_step / cfg.imu_rate;
  const double delta_a = std::pow(g.step_length / g.k_w, 4.0);
  const double amp_v = delta_a / (2.0 * lowpass_gain(g.alpha_acc, omega));
  const Eigen::Vector3d field(kFieldHorizontal * std::sin(g.mag_declination),
                              kFieldHorizontal * std::cos(g.mag_declination),
                              kFieldVertical);
  const Eigen::Matrix3d tilt =
      (Eigen::AngleAxisd(g.pitch, Eigen::Vector3d::UnitX()) *
       Eigen::AngleAxisd(g.roll, Eigen::Vector3d::UnitY()))
          .toRotationMatrix();
  const double t_end = (n > 0 ? b.times.back() : 0.0) + 1.0 / cfg.epoch_rate;
  const auto samples = static_cast<long long>(
      std::floor((t_end + g.imu_lead) * cfg.imu_rate + 1e-9));
  b.imu.reserve(static_cast<std::size_t>(samples + 1));
  for (long long i = 0; i <= samples; ++i) {
    const double t = -g.imu_lead + static_cast<double>(i) / cfg.imu_rate;
    const PathPoint pp = along(cfg.waypoints, cfg.speed * std::max(t, 0.0));
    const double heading = std::atan2(pp.dir.x(), pp.dir.y());
    Eigen::Vector3d f_world(0.0, 0.0, kGravity);
    if (t >= 0.0) {
      const double phase = 2.0 * kPi * f_step * (t - t_dip0);
      f_world.z() -= amp_v * std::cos(phase);
      const double fwd = g.forward_amplitude *
                         std::cos(phase - 2.0 * kPi * f_step * g.forward_lag);
      f_world.x() += fwd * pp.dir.x();
      f_world.y() += fwd * pp.dir.y();
    }
    const Eigen::Matrix3d r_dw = yaw_matrix(heading + g.mount_yaw) * tilt;
    ImuSample s;
    s.t = t;
    s.accel = r_dw.transpose() * f_world;
    s.mag = r_dw.transpose() * field;
    for (int a = 0; a < 3; ++a) {
      s.accel(a) += noise(cfg.noise.accel_sigma);
      s.mag(a) += noise(cfg.noise.mag_sigma);
    }
    b.imu.push_back(s);
  }
  return b;
}

}  // namespace gnsspdr
