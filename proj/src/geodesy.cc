#include "gnsspdr/geodesy.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gnsspdr/errors.h"

namespace gnsspdr {

namespace {
using C = EarthConstants;
constexpr double kPi = std::numbers::pi;
}  // namespace

double deg2rad(double deg) { return deg * kPi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / kPi; }

EcefPoint geodetic_to_ecef(const GeodeticPoint& g) {
  const double sin_lat = std::sin(g.latitude);
  const double cos_lat = std::cos(g.latitude);
  const double n =
      C::kSemiMajorAxis / std::sqrt(1.0 - C::kEccentricitySq * sin_lat * sin_lat);
  return {(n + g.height) * cos_lat * std::cos(g.longitude),
          (n + g.height) * cos_lat * std::sin(g.longitude),
          (n * (1.0 - C::kEccentricitySq) + g.height) * sin_lat};
}

GeodeticPoint ecef_to_geodetic(const EcefPoint& p) {
  if (!(p.norm() > 1e5)) {
    throw Error(ErrorKind::kNearSingularInput,
                "ECEF point within 100 km of the geocenter");
  }
  const double e2 = C::kEccentricitySq;
  const double rho = std::hypot(p.x(), p.y());
  GeodeticPoint g;
  if (rho < 1e-9) {
    g.latitude = p.z() >= 0.0 ? kPi / 2.0 : -kPi / 2.0;
    g.longitude = 0.0;
    g.height = std::abs(p.z()) - C::kSemiMinorAxis;
    return g;
  }
  g.longitude = std::atan2(p.y(), p.x());
  // Fixed-point iteration on tan(lat) = (z + e2 N sin(lat)) / rho; contracts
  // by roughly e2 per pass.
  double lat = std::atan2(p.z(), rho * (1.0 - e2));
  for (int i = 0; i < 30; ++i) {
    const double s = std::sin(lat);
    const double n = C::kSemiMajorAxis / std::sqrt(1.0 - e2 * s * s);
    const double next = std::atan2(p.z() + e2 * n * s, rho);
    const bool done = std::abs(next - lat) < 1e-15;
    lat = next;
    if (done) break;
  }
  const double s = std::sin(lat);
  g.latitude = lat;
  g.height = rho * std::cos(lat) + p.z() * s -
             C::kSemiMajorAxis * std::sqrt(1.0 - e2 * s * s);
  return g;
}

Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticPoint& origin) {
  const double sl = std::sin(origin.latitude), cl = std::cos(origin.latitude);
  const double so = std::sin(origin.longitude), co = std::cos(origin.longitude);
  Eigen::Matrix3d r;
  r << -so, co, 0.0,
       -sl * co, -sl * so, cl,
       cl * co, cl * so, sl;
  return r;
}

EnuVector ecef_to_enu(const EcefPoint& p, const GeodeticPoint& origin) {
  return ecef_to_enu_rotation(origin) * (p - geodetic_to_ecef(origin));
}

EcefPoint enu_to_ecef(const EnuVector& enu, const GeodeticPoint& origin) {
  return geodetic_to_ecef(origin) +
         ecef_to_enu_rotation(origin).transpose() * enu;
}

ElevationAzimuth elevation_azimuth(const EcefPoint& receiver,
                                   const EcefPoint& satellite) {
  const Eigen::Vector3d los = satellite - receiver;
  const double range = los.norm();
  if (range < 1.0) {
    throw Error(ErrorKind::kDegenerateGeometry,
                "satellite coincides with receiver");
  }
  const Eigen::Vector3d enu =
      ecef_to_enu_rotation(ecef_to_geodetic(receiver)) * (los / range);
  ElevationAzimuth out;
  out.elevation = std::asin(std::clamp(enu.z(), -1.0, 1.0));
  double az = std::atan2(enu.x(), enu.y());
  if (az < 0.0) az += 2.0 * kPi;
  if (az >= 2.0 * kPi) az -= 2.0 * kPi;
  out.azimuth = az;
  return out;
}

}  // namespace gnsspdr
