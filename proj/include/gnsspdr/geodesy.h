// Earth model and frame conversions (WGS-84).
#pragma once

#include <Eigen/Core>

namespace gnsspdr {

/// Position in the Earth-centered Earth-fixed frame [m].
using EcefPoint = Eigen::Vector3d;
/// Velocity in the ECEF frame [m/s].
using EcefVelocity = Eigen::Vector3d;
/// Local east/north/up vector [m] (or [m/s], [m/s^2] by context).
using EnuVector = Eigen::Vector3d;

/// Geodetic coordinates on the WGS-84 ellipsoid.
struct GeodeticPoint {
  double latitude = 0.0;   ///< [rad], [-pi/2, pi/2]
  double longitude = 0.0;  ///< [rad], (-pi, pi]
  double height = 0.0;     ///< [m] above the ellipsoid
};

struct EarthConstants {
  static constexpr double kSemiMajorAxis = 6378137.0;
  static constexpr double kFlattening = 1.0 / 298.257223563;
  static constexpr double kSemiMinorAxis =
      kSemiMajorAxis * (1.0 - kFlattening);
  static constexpr double kEccentricitySq =
      kFlattening * (2.0 - kFlattening);
  static constexpr double kOmegaEarth = 7.2921151467e-5;  ///< [rad/s]
  static constexpr double kSpeedOfLight = 299792458.0;    ///< [m/s]
  static constexpr double kGm = 3.986004418e14;           ///< [m^3/s^2]
};

struct ElevationAzimuth {
  double elevation = 0.0;  ///< [rad], may be negative
  double azimuth = 0.0;    ///< [rad], clockwise from north, [0, 2pi)
};

EcefPoint geodetic_to_ecef(const GeodeticPoint& g);

/// Throws NearSingularInput if |p| <= 1e5 m. Longitude is 0 on the polar axis.
GeodeticPoint ecef_to_geodetic(const EcefPoint& p);

/// Rotation taking ECEF vectors to local ENU at `origin`. Rows are the
/// east, north and up unit vectors expressed in ECEF.
Eigen::Matrix3d ecef_to_enu_rotation(const GeodeticPoint& origin);

EnuVector ecef_to_enu(const EcefPoint& p, const GeodeticPoint& origin);
EcefPoint enu_to_ecef(const EnuVector& enu, const GeodeticPoint& origin);

/// Throws DegenerateGeometry if the two points are closer than 1 m.
ElevationAzimuth elevation_azimuth(const EcefPoint& receiver,
                                   const EcefPoint& satellite);

double deg2rad(double deg);
double rad2deg(double rad);

}  // namespace gnsspdr
