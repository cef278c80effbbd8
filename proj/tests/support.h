// Shared helpers for the unit and acceptance tests: random geometry, a
// finite-difference Jacobian, and an independently coded linear-Gaussian
// smoother used as an oracle for the batch solver and the EKF.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gnsspdr/ekf.h"
#include "gnsspdr/factors.h"
#include "gnsspdr/geodesy.h"
#include "gnsspdr/gnss_obs.h"
#include "gnsspdr/scenario.h"
#include "gnsspdr/solver.h"

namespace testsupport {

using namespace gnsspdr;

inline constexpr double kPi = 3.14159265358979323846;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline GeodeticPoint random_geodetic(std::mt19937_64& rng, double h_lo = -100.0,
                                     double h_hi = 3000.0) {
  // uniform on the sphere, so the poles are visited
  const double lat = std::asin(uniform(rng, -1.0, 1.0));
  return {lat, uniform(rng, -kPi, kPi), uniform(rng, h_lo, h_hi)};
}

// Unit vector toward (azimuth, elevation) in ECEF at `g`.
inline Eigen::Vector3d sky_direction(const GeodeticPoint& g, double az, double el) {
  const double sl = std::sin(g.latitude), cl = std::cos(g.latitude);
  const double so = std::sin(g.longitude), co = std::cos(g.longitude);
  const Eigen::Vector3d east(-so, co, 0.0);
  const Eigen::Vector3d north(-sl * co, -sl * so, cl);
  const Eigen::Vector3d up(cl * co, cl * so, sl);
  return std::cos(el) * (std::sin(az) * east + std::cos(az) * north) + std::sin(el) * up;
}

// Satellite on a 26,560 km sphere seen from `rx` at the given sky position,
// with a random velocity, clock, and a noiseless observation for `truth`.
inline SatObservation make_satellite(const std::string& id, const EpochState& truth,
                                     double az, double el, std::mt19937_64& rng) {
  const GeodeticPoint g = ecef_to_geodetic(truth.p);
  const Eigen::Vector3d u = sky_direction(g, az, el);
  const double radius = 26.56e6;
  const double b = truth.p.dot(u);
  const double d = -b + std::sqrt(b * b - truth.p.squaredNorm() + radius * radius);
  SatObservation o;
  o.sat_id = id;
  o.sat_pos = truth.p + d * u;
  o.sat_vel = Eigen::Vector3d(uniform(rng, -3000, 3000), uniform(rng, -3000, 3000),
                              uniform(rng, -3000, 3000));
  o.sat_clock_bias = uniform(rng, -50, 50);
  o.sat_clock_drift = uniform(rng, -0.01, 0.01);
  o.wavelength = 0.190293672798;
  o.snr = uniform(rng, 30, 50);
  o.elevation = el;
  o.pseudorange = predict_pseudorange(truth.p, truth.clock_bias, o);
  o.doppler = predict_range_rate(truth.p, truth.v, truth.clock_drift, o) / o.wavelength;
  return o;
}

inline EpochState random_state(std::mt19937_64& rng) {
  EpochState s;
  s.p = geodetic_to_ecef(random_geodetic(rng));
  s.v = Eigen::Vector3d(uniform(rng, -3, 3), uniform(rng, -3, 3), uniform(rng, -1, 1));
  s.clock_bias = uniform(rng, -1e4, 1e4);
  s.clock_drift = uniform(rng, -5, 5);
  return s;
}

// Well-spread sky: 8 satellites, azimuths every 45 degrees.
inline EpochObservations random_epoch(const EpochState& truth, std::mt19937_64& rng,
                                      int count = 8) {
  EpochObservations obs;
  for (int i = 0; i < count; ++i) {
    const double az = i * 2.0 * kPi / count + uniform(rng, -0.2, 0.2);
    const double el = uniform(rng, 0.25, 1.45);
    obs.push_back(make_satellite("G" + std::to_string(10 + i), truth, az, el, rng));
  }
  return obs;
}

// Central differences with step 1e-4 scaled by the magnitude of the block a
// component belongs to. Position and clock bias form one block: both are
// metres added into the same ~2e7 m range, and a near-zero bias or coordinate
// stepped by 1e-4 m would lose the difference to roundoff.
inline Eigen::MatrixXd numeric_jacobian(const Factor& f, std::vector<EpochState> states) {
  const int m = f.residual_dim();
  const int n = static_cast<int>(f.num_epochs()) * kStateDim;
  Eigen::MatrixXd jac(m, n);
  for (int c = 0; c < n; ++c) {
    const std::size_t e = f.epoch(static_cast<std::size_t>(c / kStateDim));
    const int i = c % kStateDim;
    const StateVector x = states[e].vector();
    const double mag = i < 3 || i == 6
                           ? std::max(x.segment<3>(0).norm(), std::abs(x(6)))
                       : i < 6 ? x.segment<3>(3).norm()
                               : std::abs(x(i));
    const double h = 1e-4 * std::max(1.0, mag);
    StateVector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    states[e] = EpochState::from_vector(xp);
    const Eigen::VectorXd rp = f.linearize(states).residual;
    states[e] = EpochState::from_vector(xm);
    const Eigen::VectorXd rm = f.linearize(states).residual;
    states[e] = EpochState::from_vector(x);
    jac.col(c) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Linear-Gaussian chain. Per epoch: z_k = H_k x_k + noise. Per interval, any of
// the motion models written out by hand below (not taken from the factor
// code). The oracle runs a forward information filter over the joint
// (x_k, x_{k+1}) and a backward conditional (RTS) pass.
struct LinearChain {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> h;
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::MatrixXd> r;
  std::vector<Eigen::Vector3d> delta;  // PDR displacement per interval
  bool pdr = false, cv = false, smm = false, clock = false;
  FactorWeights weights;
  StateVector prior_mean = StateVector::Zero();
  StateCovariance prior_cov = StateCovariance::Identity();
};

// Rows of one interval model: m = A0 x_k + A1 x_{k+1} + noise(R).
struct IntervalModel {
  Eigen::MatrixXd a0, a1, r;
  Eigen::VectorXd m;
};

inline IntervalModel interval_model(const LinearChain& c, std::size_t k) {
  const double dt = c.times[k + 1] - c.times[k];
  std::vector<Eigen::MatrixXd> a0s, a1s;
  std::vector<Eigen::VectorXd> ms;
  std::vector<double> vars;
  auto add = [&](Eigen::MatrixXd a0, Eigen::MatrixXd a1, Eigen::VectorXd m, double var) {
    for (int i = 0; i < a0.rows(); ++i) vars.push_back(var);
    a0s.push_back(std::move(a0));
    a1s.push_back(std::move(a1));
    ms.push_back(std::move(m));
  };
  const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
  if (c.pdr) {  // p1 - p0 = delta
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(3, 8), a1 = a0;
    a0.block(0, 0, 3, 3) = -i3;
    a1.block(0, 0, 3, 3) = i3;
    add(a0, a1, c.delta[k], c.weights.sigma_pdr2);
  }
  if (c.cv) {  // (p1 - p0)/dt - (v0 + v1)/2 = 0
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(3, 8), a1 = a0;
    a0.block(0, 0, 3, 3) = -i3 / dt;
    a0.block(0, 3, 3, 3) = -0.5 * i3;
    a1.block(0, 0, 3, 3) = i3 / dt;
    a1.block(0, 3, 3, 3) = -0.5 * i3;
    add(a0, a1, Eigen::VectorXd::Zero(3), c.weights.sigma_cv2);
  }
  if (c.smm) {  // (v1 - v0)/dt = 0
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(3, 8), a1 = a0;
    a0.block(0, 3, 3, 3) = -i3 / dt;
    a1.block(0, 3, 3, 3) = i3 / dt;
    add(a0, a1, Eigen::VectorXd::Zero(3), c.weights.sigma_smm2);
  }
  if (c.clock) {  // b1 - b0 - d0 dt = 0 ; d1 - d0 = 0
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(1, 8), a1 = a0;
    a0(0, 6) = -1.0;
    a0(0, 7) = -dt;
    a1(0, 6) = 1.0;
    add(a0, a1, Eigen::VectorXd::Zero(1), c.weights.clock_bias_var);
    Eigen::MatrixXd b0 = Eigen::MatrixXd::Zero(1, 8), b1 = b0;
    b0(0, 7) = -1.0;
    b1(0, 7) = 1.0;
    add(b0, b1, Eigen::VectorXd::Zero(1), c.weights.clock_drift_var);
  }
  int rows = 0;
  for (const auto& a : a0s) rows += static_cast<int>(a.rows());
  IntervalModel out;
  out.a0.setZero(rows, 8);
  out.a1.setZero(rows, 8);
  out.m.setZero(rows);
  out.r = Eigen::MatrixXd::Zero(rows, rows);
  int at = 0;
  for (std::size_t i = 0; i < a0s.size(); ++i) {
    const int n = static_cast<int>(a0s[i].rows());
    out.a0.middleRows(at, n) = a0s[i];
    out.a1.middleRows(at, n) = a1s[i];
    out.m.segment(at, n) = ms[i];
    at += n;
  }
  for (int i = 0; i < rows; ++i) out.r(i, i) = vars[static_cast<std::size_t>(i)];
  return out;
}

struct OracleResult {
  std::vector<StateVector> filtered;
  std::vector<StateVector> smoothed;
};

inline OracleResult oracle_smoother(const LinearChain& c) {
  const std::size_t n = c.times.size();
  OracleResult out;
  // epoch 0: prior plus its measurement, information form
  Eigen::MatrixXd lam = c.prior_cov.inverse();
  Eigen::VectorXd eta = lam * c.prior_mean;
  if (c.h[0].rows() > 0) {
    const Eigen::MatrixXd ri = c.r[0].inverse();
    lam += c.h[0].transpose() * ri * c.h[0];
    eta += c.h[0].transpose() * ri * c.z[0];
  }
  Eigen::MatrixXd cov = lam.inverse();
  Eigen::VectorXd mean = cov * eta;
  out.filtered.push_back(mean);

  std::vector<Eigen::MatrixXd> joint_cov;
  std::vector<Eigen::VectorXd> joint_mean;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const IntervalModel im = interval_model(c, k);
    Eigen::MatrixXd a(im.a0.rows(), 16);
    a << im.a0, im.a1;
    const Eigen::MatrixXd ri = im.r.inverse();
    Eigen::MatrixXd jl = Eigen::MatrixXd::Zero(16, 16);
    Eigen::VectorXd je = Eigen::VectorXd::Zero(16);
    const Eigen::MatrixXd pinv = cov.inverse();
    jl.topLeftCorner(8, 8) = pinv;
    je.head(8) = pinv * mean;
    jl += a.transpose() * ri * a;
    je += a.transpose() * ri * im.m;
    if (c.h[k + 1].rows() > 0) {
      const Eigen::MatrixXd hr = c.r[k + 1].inverse();
      jl.bottomRightCorner(8, 8) += c.h[k + 1].transpose() * hr * c.h[k + 1];
      je.tail(8) += c.h[k + 1].transpose() * hr * c.z[k + 1];
    }
    const Eigen::MatrixXd jc = jl.inverse();
    const Eigen::VectorXd jm = jc * je;
    joint_cov.push_back(jc);
    joint_mean.push_back(jm);
    cov = jc.bottomRightCorner(8, 8);
    mean = jm.tail(8);
    out.filtered.push_back(mean);
  }

  out.smoothed.assign(n, StateVector::Zero());
  out.smoothed[n - 1] = out.filtered[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    const Eigen::MatrixXd& jc = joint_cov[k];
    const Eigen::VectorXd& jm = joint_mean[k];
    const Eigen::MatrixXd gain =
        jc.topRightCorner(8, 8) * jc.bottomRightCorner(8, 8).inverse();
    out.smoothed[k] = jm.head(8) + gain * (out.smoothed[k + 1] - jm.tail(8));
  }
  return out;
}

// Linearized-GNSS style measurement rows: pseudorange [-los, 0, 1, 0] and
// range rate [0, -los, 0, 1] for `sats` random directions.
inline void linearized_gnss(std::mt19937_64& rng, int sats, Eigen::MatrixXd& h,
                            Eigen::MatrixXd& r) {
  h.setZero(2 * sats, 8);
  r.setZero(2 * sats, 2 * sats);
  for (int i = 0; i < sats; ++i) {
    Eigen::Vector3d los(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, 0.2, 1));
    los.normalize();
    h.block(i, 0, 1, 3) = -los.transpose();
    h(i, 6) = 1.0;
    h.block(sats + i, 3, 1, 3) = -los.transpose();
    h(sats + i, 7) = 1.0;
    r(i, i) = uniform(rng, 1.0, 9.0);
    r(sats + i, sats + i) = uniform(rng, 0.01, 0.1);
  }
}

// Random chain with truth drawn from the motion model it declares.
inline LinearChain random_chain(std::mt19937_64& rng, std::size_t epochs, bool pdr,
                                bool cv, bool smm, bool clock) {
  LinearChain c;
  c.pdr = pdr;
  c.cv = cv;
  c.smm = smm;
  c.clock = clock;
  c.weights.sigma_pdr2 = 0.1;
  c.weights.sigma_cv2 = 0.5;
  c.weights.sigma_smm2 = 0.3;
  c.weights.clock_bias_var = 2.0;
  c.weights.clock_drift_var = 0.05;
  std::normal_distribution<double> n01(0.0, 1.0);
  double t = 0.0;
  StateVector x;
  x << 120.0, -40.0, 15.0, 1.1, 0.4, 0.0, 300.0, 0.5;
  c.prior_mean = x;
  for (int i = 0; i < 8; ++i) c.prior_mean(i) += n01(rng);
  for (std::size_t k = 0; k < epochs; ++k) {
    c.times.push_back(t);
    Eigen::MatrixXd h, r;
    linearized_gnss(rng, 4, h, r);  // 8 rows, the widest factor allowed
    Eigen::VectorXd z = h * x;
    for (int i = 0; i < z.size(); ++i) z(i) += std::sqrt(r(i, i)) * n01(rng);
    c.h.push_back(h);
    c.r.push_back(r);
    c.z.push_back(z);
    const double dt = uniform(rng, 0.8, 1.2);
    t += dt;
    Eigen::Vector3d step = x.segment<3>(3) * dt;
    c.delta.push_back(step + 0.3 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng)));
    x.segment<3>(0) += step;
    x.segment<3>(3) += 0.2 * Eigen::Vector3d(n01(rng), n01(rng), n01(rng));
    x(6) += x(7) * dt;
  }
  c.delta.pop_back();
  return c;
}

inline FactorGraph chain_graph(const LinearChain& c) {
  FactorGraph g;
  g.timestamps = c.times;
  g.states.assign(c.times.size(), EpochState{});
  g.factors.push_back(Factor::prior(0, c.prior_mean, c.prior_cov));
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    if (c.h[k].rows() > 0) {
      g.factors.push_back(Factor::linear(k, {c.h[k], c.z[k]}, c.r[k]));
    }
    if (k + 1 == c.times.size()) continue;
    const double dt = c.times[k + 1] - c.times[k];
    if (c.pdr) g.factors.push_back(Factor::pdr(k, c.delta[k], c.weights.sigma_pdr2));
    if (c.cv) g.factors.push_back(Factor::cv(k, dt, c.weights.sigma_cv2));
    if (c.smm) g.factors.push_back(Factor::smm(k, dt, c.weights.sigma_smm2));
    if (c.clock) {
      g.factors.push_back(
          Factor::clock(k, dt, c.weights.clock_bias_var, c.weights.clock_drift_var));
    }
  }
  return g;
}

// The EKF driven through the chain: PDR as control, smoothness and clock as
// process noise, linear updates. Matches the oracle filter when the chain
// has pdr, smm and clock and no cv.
inline std::vector<StateVector> linear_ekf(const LinearChain& c) {
  ProcessNoise q = ProcessNoise::from_weights(c.weights);
  EkfState x;
  x.mean = EpochState::from_vector(c.prior_mean);
  x.covariance = c.prior_cov;
  std::vector<StateVector> out;
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    if (k > 0) x = ekf_predict(x, c.delta[k - 1], c.times[k] - c.times[k - 1], q);
    x = ekf_update_linear(x, c.h[k], c.z[k], c.r[k]);
    out.push_back(x.mean.vector());
  }
  return out;
}

inline SolverConfig tight_solver() {
  SolverConfig cfg;
  cfg.max_iterations = 200;
  cfg.cost_tolerance = 1e-15;
  cfg.step_tolerance = 1e-15;
  return cfg;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

// Zero-noise, zero-NLOS scenario.
inline ScenarioConfig clean_scenario(double duration = 60.0, std::uint64_t seed = 1) {
  ScenarioConfig c;
  c.seed = seed;
  c.duration = duration;
  c.nlos.probability = 0.0;
  return c;
}

// The outlier Monte-Carlo scenario.
inline ScenarioConfig noisy_scenario(std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.duration = 300.0;
  c.waypoints = {{0.0, 0.0}, {150.0, 0.0}, {150.0, 120.0}, {240.0, 120.0}};
  c.noise.pseudorange_sigma = 3.0;
  c.noise.doppler_sigma = 0.2;
  c.noise.accel_sigma = 0.05;
  c.noise.mag_sigma = 0.5;
  c.noise.snr_sigma = 2.0;
  c.nlos.probability = 0.2;
  c.nlos.bias_low = 20.0;
  c.nlos.bias_high = 80.0;
  c.nlos.persistence = 20.0;
  return c;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gnsspdr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
