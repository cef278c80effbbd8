#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gnsspdr/errors.h"
#include "gnsspdr/geodesy.h"
#include "error_matchers.h"
#include "support.h"

using namespace gnsspdr;
using testsupport::kPi;
using testsupport::uniform;

namespace {

using E = EarthConstants;

// Second conversion: point on the meridian ellipse whose normal has the
// geodetic latitude, pushed out along that normal by h.
EcefPoint oracle_geodetic_to_ecef(const GeodeticPoint& g) {
  const double a = E::kSemiMajorAxis, b = E::kSemiMinorAxis;
  const double c = std::cos(g.latitude), s = std::sin(g.latitude);
  const double den = std::sqrt(a * a * c * c + b * b * s * s);
  const double rho = a * a * c / den + g.height * c;
  const double z = b * b * s / den + g.height * s;
  return {rho * std::cos(g.longitude), rho * std::sin(g.longitude), z};
}

// ENU by explicit rotations: Rx(pi/2 - lat) * Rz(pi/2 + lon).
Eigen::Matrix3d oracle_enu_rotation(const GeodeticPoint& g) {
  auto rz = [](double t) {
    Eigen::Matrix3d m;
    m << std::cos(t), std::sin(t), 0, -std::sin(t), std::cos(t), 0, 0, 0, 1;
    return m;
  };
  auto rx = [](double t) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(t), std::sin(t), 0, -std::sin(t), std::cos(t);
    return m;
  };
  return rx(kPi / 2 - g.latitude) * rz(kPi / 2 + g.longitude);
}

}  // namespace

TEST(Geodesy, EquatorPrimeMeridian) {
  const EcefPoint p = geodetic_to_ecef({0, 0, 0});
  EXPECT_DOUBLE_EQ(p.x(), 6378137.0);
  EXPECT_NEAR(p.y(), 0.0, 1e-9);
  EXPECT_NEAR(p.z(), 0.0, 1e-9);
  const GeodeticPoint g = ecef_to_geodetic({6378137.0, 0, 0});
  EXPECT_NEAR(g.latitude, 0.0, 1e-12);
  EXPECT_NEAR(g.longitude, 0.0, 1e-12);
  EXPECT_NEAR(g.height, 0.0, 1e-6);
}

TEST(Geodesy, Pole) {
  const EcefPoint p = geodetic_to_ecef({kPi / 2, 0, 0});
  EXPECT_NEAR(p.x(), 0.0, 1e-6);
  EXPECT_NEAR(p.y(), 0.0, 1e-9);
  EXPECT_NEAR(p.z(), E::kSemiMinorAxis, 1e-6);
  const GeodeticPoint g = ecef_to_geodetic({0, 0, E::kSemiMinorAxis});
  EXPECT_NEAR(g.latitude, kPi / 2, 1e-12);
  EXPECT_EQ(g.longitude, 0.0);
  EXPECT_NEAR(g.height, 0.0, 1e-6);
  const GeodeticPoint s = ecef_to_geodetic({0, 0, -E::kSemiMinorAxis - 10});
  EXPECT_NEAR(s.latitude, -kPi / 2, 1e-12);
  EXPECT_NEAR(s.height, 10.0, 1e-6);
}

TEST(Geodesy, MatchesSecondConversion) {
  const GeodeticPoint g{0.3894, 2.0, 50.0};
  EXPECT_LT((geodetic_to_ecef(g) - oracle_geodetic_to_ecef(g)).norm(), 1e-6);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const GeodeticPoint r = testsupport::random_geodetic(rng, -500, 1e5);
    EXPECT_LT((geodetic_to_ecef(r) - oracle_geodetic_to_ecef(r)).norm(), 1e-6);
  }
}

TEST(Geodesy, RoundTripTenThousandSurfacePoints) {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const EcefPoint p = geodetic_to_ecef(testsupport::random_geodetic(rng));
    worst = std::max(worst, (geodetic_to_ecef(ecef_to_geodetic(p)) - p).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Geodesy, NearCenterRejected) {
  EXPECT_TRUE(ThrowsKind([] { ecef_to_geodetic({1e5, 0, 0}); }, ErrorKind::kNearSingularInput));
  EXPECT_TRUE(ThrowsKind([] { ecef_to_geodetic({10, 20, 30}); }, ErrorKind::kNearSingularInput));
}

TEST(Geodesy, EnuBasics) {
  const GeodeticPoint o{deg2rad(22.3), deg2rad(114.18), 10.0};
  const EcefPoint p0 = geodetic_to_ecef(o);
  EXPECT_LT(ecef_to_enu(p0, o).norm(), 1e-9);
  GeodeticPoint up = o;
  up.height += 1.0;
  const EnuVector e = ecef_to_enu(geodetic_to_ecef(up), o);
  EXPECT_NEAR(e.x(), 0.0, 1e-9);
  EXPECT_NEAR(e.y(), 0.0, 1e-9);
  EXPECT_NEAR(e.z(), 1.0, 1e-9);
  EXPECT_LT((ecef_to_enu_rotation(o) - oracle_enu_rotation(o)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Geodesy, EnuIsometry) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    const GeodeticPoint o = testsupport::random_geodetic(rng);
    const EcefPoint a = geodetic_to_ecef(o);
    const Eigen::Vector3d d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const EcefPoint b = a + 10.0 * d.normalized();
    const double sep = (ecef_to_enu(a, o) - ecef_to_enu(b, o)).norm();
    EXPECT_NEAR(sep, 10.0, 1e-9);
    const EcefPoint c = a + Eigen::Vector3d(uniform(rng, -1e4, 1e4), uniform(rng, -1e4, 1e4),
                                            uniform(rng, -1e4, 1e4));
    const double want = (c - b).norm();
    EXPECT_NEAR((ecef_to_enu(c, o) - ecef_to_enu(b, o)).norm() / want, 1.0, 1e-9);
    EXPECT_LT((enu_to_ecef(ecef_to_enu(c, o), o) - c).norm(), 1e-6);
  }
}

TEST(Geodesy, ElevationAzimuthSpecialCases) {
  const GeodeticPoint o{deg2rad(40), deg2rad(-75), 100};
  const EcefPoint rx = geodetic_to_ecef(o);
  const Eigen::Matrix3d r = oracle_enu_rotation(o);
  const EcefPoint zenith = rx + r.transpose() * Eigen::Vector3d(0, 0, 2e7);
  EXPECT_NEAR(elevation_azimuth(rx, zenith).elevation, kPi / 2, 1e-9);
  const EcefPoint north = rx + r.transpose() * Eigen::Vector3d(0, 2e7, 0);
  const ElevationAzimuth n = elevation_azimuth(rx, north);
  EXPECT_NEAR(n.elevation, 0.0, 1e-12);
  EXPECT_NEAR(n.azimuth, 0.0, 1e-12);
  const EcefPoint east = rx + r.transpose() * Eigen::Vector3d(5e6, 0, 0);
  EXPECT_NEAR(elevation_azimuth(rx, east).azimuth, kPi / 2, 1e-12);
  EXPECT_TRUE(ThrowsKind([&] { elevation_azimuth(rx, rx + Eigen::Vector3d(0.5, 0, 0)); },
                         ErrorKind::kDegenerateGeometry));
}

TEST(Geodesy, ElevationAzimuthMatchesRotationOracleAndScaling) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    GeodeticPoint o = testsupport::random_geodetic(rng);
    o.latitude = std::clamp(o.latitude, -1.5, 1.5);
    const EcefPoint rx = geodetic_to_ecef(o);
    const Eigen::Vector3d d(uniform(rng, -2e7, 2e7), uniform(rng, -2e7, 2e7),
                            uniform(rng, -2e7, 2e7));
    const Eigen::Vector3d enu = oracle_enu_rotation(o) * d;
    const double el = std::asin(enu.z() / enu.norm());
    double az = std::atan2(enu.x(), enu.y());
    if (az < 0) az += 2 * kPi;
    const ElevationAzimuth got = elevation_azimuth(rx, rx + d);
    EXPECT_NEAR(got.elevation, el, 1e-9);
    EXPECT_NEAR(std::remainder(got.azimuth - az, 2 * kPi), 0.0, 1e-9);
    EXPECT_GE(got.azimuth, 0.0);
    EXPECT_LT(got.azimuth, 2 * kPi);
    const ElevationAzimuth scaled = elevation_azimuth(rx, rx + 0.37 * d);
    EXPECT_NEAR(scaled.elevation, got.elevation, 1e-12);
    EXPECT_NEAR(std::remainder(scaled.azimuth - got.azimuth, 2 * kPi), 0.0, 1e-12);
  }
}

TEST(Geodesy, Constants) {
  EXPECT_EQ(E::kOmegaEarth, 7.2921151467e-5);
  EXPECT_EQ(E::kSpeedOfLight, 299792458.0);
  EXPECT_EQ(E::kSemiMajorAxis, 6378137.0);
  EXPECT_NEAR(rad2deg(deg2rad(33.0)), 33.0, 1e-12);
}
