#pragma once

#include <cmath>
#include <stdexcept>

namespace isac {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

/// Point in the shared Cartesian frame, meters.
struct GlobalPoint {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const GlobalPoint& a, const GlobalPoint& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Target parameters in a BS-local frame: range, bearing, round-trip delay.
struct LocalPolar {
    double r = 0.0;      // m, >= 0
    double theta = 0.0;  // rad, (-pi, pi]
    double tau = 0.0;    // s, round-trip delay = 2r/c
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

/// Pose of a BS in the global frame (position + array boresight rotation).
struct BsPose {
    GlobalPoint position;
    double orientation = 0.0;  // rad, (-pi, pi]
};

/// Global position -> local polar coordinates of a BS rotated by its
/// orientation. Throws on zero range.
inline LocalPolar global_to_local(const GlobalPoint& p, const BsPose& bs) {
    const double xp = p.x - bs.position.x;
    const double yp = p.y - bs.position.y;
    const double c = std::cos(bs.orientation);
    const double s = std::sin(bs.orientation);
    const double xl = xp * c + yp * s;
    const double yl = -xp * s + yp * c;
    const double r = std::hypot(xl, yl);
    if (r == 0.0) throw std::domain_error("global_to_local: point coincides with BS");
    LocalPolar lp;
    lp.r = r;
    lp.theta = std::atan2(yl, xl);
    lp.tau = 2.0 * r / kSpeedOfLight;
    return lp;
}

/// Exact inverse of global_to_local.
inline GlobalPoint local_polar_to_global(const LocalPolar& lp, const BsPose& bs) {
    const double xl = lp.r * std::cos(lp.theta);
    const double yl = lp.r * std::sin(lp.theta);
    const double c = std::cos(bs.orientation);
    const double s = std::sin(bs.orientation);
    return GlobalPoint{bs.position.x + xl * c - yl * s,
                       bs.position.y + xl * s + yl * c};
}

}  // namespace isac
