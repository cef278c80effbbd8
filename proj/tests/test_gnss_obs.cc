#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "error_matchers.h"
#include "gnsspdr/gnss_obs.h"
#include "support.h"

using namespace gnsspdr;
using testsupport::kPi;
using testsupport::uniform;

namespace {

SatObservation axis_sat() {
  SatObservation o;
  o.sat_id = "G01";
  o.sat_pos = {2.5e7, 0, 0};
  return o;
}

}  // namespace

TEST(Pseudorange, CollinearGeometry) {
  SatObservation o = axis_sat();
  EXPECT_DOUBLE_EQ(predict_pseudorange({6.378e6, 0, 0}, 100.0, o), 18622100.0);
  o.sat_clock_bias = 30.0;
  EXPECT_DOUBLE_EQ(predict_pseudorange({6.378e6, 0, 0}, 100.0, o), 18622070.0);
}

TEST(Pseudorange, MatchesScalarFormula) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const EcefPoint rx(uniform(rng, -7e6, 7e6), uniform(rng, -7e6, 7e6), uniform(rng, -7e6, 7e6));
    SatObservation o;
    o.sat_pos = {uniform(rng, -3e7, 3e7), uniform(rng, -3e7, 3e7), uniform(rng, -3e7, 3e7)};
    o.sat_clock_bias = uniform(rng, -100, 100);
    const double bias = uniform(rng, -1e5, 1e5);
    const double dx = o.sat_pos.x() - rx.x(), dy = o.sat_pos.y() - rx.y(),
                 dz = o.sat_pos.z() - rx.z();
    const double want = std::sqrt(dx * dx + dy * dy + dz * dz) + bias - o.sat_clock_bias;
    EXPECT_NEAR(predict_pseudorange(rx, bias, o), want, 1e-6);
  }
}

TEST(Pseudorange, CoincidentSatelliteRejected) {
  SatObservation o = axis_sat();
  EXPECT_TRUE(ThrowsKind([&] { predict_pseudorange(o.sat_pos, 0.0, o); },
                         ErrorKind::kDegenerateGeometry));
}

TEST(RangeRate, StaticCases) {
  SatObservation o = axis_sat();
  EXPECT_EQ(predict_range_rate({6.378e6, 0, 0}, {0, 0, 0}, 0.0, o), 0.0);
  EXPECT_DOUBLE_EQ(predict_range_rate({6.378e6, 0, 0}, {0, 0, 0}, 3.5, o), 3.5);
}

TEST(RangeRate, RadialRecessionOnAxis) {
  // receiver on -x, satellite on +x moving away at 800 m/s; every
  // rotation term has a y factor and vanishes
  SatObservation o = axis_sat();
  o.sat_vel = {800, 0, 0};
  const EcefPoint rx(-6.378e6, 0, 0);
  // e_LOS = +x, so e_LOS . (v_sat - v_rx) = 800
  EXPECT_DOUBLE_EQ(predict_range_rate(rx, {0, 0, 0}, 0.0, o), 800.0);
  EXPECT_DOUBLE_EQ(predict_range_rate(rx, {1.5, 0, 0}, 0.0, o), 798.5);
}

TEST(RangeRate, ReducesToGeometricWhenYComponentsVanish) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const EcefPoint rx(uniform(rng, -7e6, 7e6), 0, uniform(rng, -7e6, 7e6));
    const EcefVelocity vr(uniform(rng, -3, 3), 0, uniform(rng, -3, 3));
    SatObservation o;
    o.sat_pos = {uniform(rng, -3e7, 3e7), 0, uniform(rng, -3e7, 3e7)};
    o.sat_vel = {uniform(rng, -3e3, 3e3), 0, uniform(rng, -3e3, 3e3)};
    const double drift = uniform(rng, -10, 10);
    const Eigen::Vector3d los = (o.sat_pos - rx).normalized();
    EXPECT_NEAR(predict_range_rate(rx, vr, drift, o), los.dot(o.sat_vel - vr) + drift, 1e-9);
  }
}

TEST(Variance, Examples) {
  const WeightModel w;
  const double s2 = w.sigma0 * w.sigma0;
  EXPECT_DOUBLE_EQ(pseudorange_variance(w.snr_ref, kPi / 2, w), s2);
  EXPECT_DOUBLE_EQ(pseudorange_variance(w.snr_ref + 5, kPi / 2, w), s2);
  EXPECT_NEAR(pseudorange_variance(w.snr_ref - 10, kPi / 2, w), 10 * s2, 1e-12);
  EXPECT_NEAR(pseudorange_variance(w.snr_ref - 5, kPi / 6, w), s2 * std::pow(10, 0.5) * 4,
              1e-12);
  EXPECT_NEAR(doppler_variance(w.snr_ref, kPi / 2, w), s2 / 10, 1e-15);
  WeightModel one = w;
  one.doppler_weight_scale = 1.0;
  EXPECT_DOUBLE_EQ(doppler_variance(33, 0.7, one), pseudorange_variance(33, 0.7, one));
  EXPECT_TRUE(ThrowsKind([&] { pseudorange_variance(40, 0.0, w); }, ErrorKind::kInvalidElevation));
  EXPECT_TRUE(ThrowsKind([&] { doppler_variance(40, -0.1, w); }, ErrorKind::kInvalidElevation));
}

TEST(Variance, PositiveMonotoneAndFixedRatio) {
  const WeightModel w;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 2000; ++i) {
    const double snr = uniform(rng, 0, 60), el = uniform(rng, 1e-3, kPi / 2);
    const double v = pseudorange_variance(snr, el, w);
    EXPECT_GT(v, 0.0);
    EXPECT_LE(pseudorange_variance(snr + 1.0, el, w), v);
    EXPECT_LE(pseudorange_variance(snr, std::min(el + 0.05, kPi / 2), w), v);
    EXPECT_NEAR(v / doppler_variance(snr, el, w), w.doppler_weight_scale, 1e-9);
  }
}

TEST(Variance, WeightModelValidation) {
  WeightModel w;
  w.sigma0 = 0.0;
  EXPECT_TRUE(ThrowsKind([&] { w.validate(); }, ErrorKind::kConfigError));
  w = {};
  w.snr_floor = w.snr_ref;
  EXPECT_TRUE(ThrowsKind([&] { w.validate(); }, ErrorKind::kConfigError));
  w = {};
  w.doppler_weight_scale = 0.5;
  EXPECT_TRUE(ThrowsKind([&] { w.validate(); }, ErrorKind::kConfigError));
}

TEST(Mask, Boundaries) {
  auto obs = [](double el_deg, double snr) {
    SatObservation o;
    o.elevation = deg2rad(el_deg);
    o.snr = snr;
    return o;
  };
  EXPECT_TRUE(mask_observations({obs(14.9, 45)}).empty());
  EXPECT_TRUE(mask_observations({obs(60, 19)}).empty());
  EXPECT_EQ(mask_observations({obs(15, 20)}).size(), 1u);
  EXPECT_TRUE(mask_observations({}).empty());
}

TEST(Mask, Idempotent) {
  std::mt19937_64 rng(9);
  EpochObservations in;
  for (int i = 0; i < 200; ++i) {
    SatObservation o;
    o.sat_id = "G" + std::to_string(i);
    o.elevation = uniform(rng, -0.2, 1.5);
    o.snr = uniform(rng, 5, 55);
    in.push_back(o);
  }
  const auto once = mask_observations(in);
  const auto twice = mask_observations(once);
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].sat_id, twice[i].sat_id);
  EXPECT_LT(once.size(), in.size());
}

TEST(Mask, AssignElevations) {
  std::mt19937_64 rng(6);
  const EpochState truth = testsupport::random_state(rng);
  EpochObservations obs = testsupport::random_epoch(truth, rng);
  std::vector<double> want;
  for (auto& o : obs) {
    want.push_back(o.elevation);
    o.elevation = 0.0;
  }
  assign_elevations(obs, truth.p);
  for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_NEAR(obs[i].elevation, want[i], 1e-9);
}
