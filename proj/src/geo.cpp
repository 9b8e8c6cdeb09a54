#include "sectorflow/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sectorflow::geo {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace

double normalize_lon(double lon_deg) {
    double lon = std::fmod(lon_deg + 180.0, 360.0);
    if (lon < 0.0) lon += 360.0;
    return lon - 180.0;
}

double normalize_bearing(double bearing_deg) {
    double b = std::fmod(bearing_deg, 360.0);
    if (b < 0.0) b += 360.0;
    return b;
}

double haversine_nm(const GcsPoint& a, const GcsPoint& b) {
    const double phi1 = deg2rad(a.lat_deg);
    const double phi2 = deg2rad(b.lat_deg);
    const double dphi = deg2rad(b.lat_deg - a.lat_deg);
    const double dlam = deg2rad(b.lon_deg - a.lon_deg);

    const double sp = std::sin(0.5 * dphi);
    const double sl = std::sin(0.5 * dlam);
    double h = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusNm * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
}

double initial_bearing_deg(const GcsPoint& a, const GcsPoint& b) {
    if (haversine_nm(a, b) < 1e-9) {
        throw std::invalid_argument("initial_bearing_deg: coincident points");
    }
    const double phi1 = deg2rad(a.lat_deg);
    const double phi2 = deg2rad(b.lat_deg);
    const double dlam = deg2rad(b.lon_deg - a.lon_deg);

    // theta = atan2(sin(dlam) cos(phi2), cos(phi1) sin(phi2) - sin(phi1) cos(phi2) cos(dlam))
    // see http://www.movable-type.co.uk/scripts/latlong.html#bearing
    const double y = std::sin(dlam) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
    return normalize_bearing(rad2deg(std::atan2(y, x)));
}

GcsPoint destination_point(const GcsPoint& a, double bearing_deg, double dist_nm) {
    if (dist_nm < 0.0) {
        throw std::invalid_argument("destination_point: negative distance");
    }
    const double phi1 = deg2rad(a.lat_deg);
    const double lam1 = deg2rad(a.lon_deg);
    const double theta = deg2rad(bearing_deg);
    const double delta = dist_nm / kEarthRadiusNm;  // angular distance

    // phi2 = asin(sin(phi1) cos(delta) + cos(phi1) sin(delta) cos(theta))
    // lam2 = lam1 + atan2(sin(theta) sin(delta) cos(phi1), cos(delta) - sin(phi1) sin(phi2))
    // see http://www.movable-type.co.uk/scripts/latlong.html#destPoint
    const double sphi2 = std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
    const double phi2 = std::asin(std::clamp(sphi2, -1.0, 1.0));
    const double lam2 = lam1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                                          std::cos(delta) - std::sin(phi1) * sphi2);
    return GcsPoint{rad2deg(phi2), normalize_lon(rad2deg(lam2))};
}

LocalFrame::LocalFrame(const GcsPoint& origin)
    : origin_(origin), cos_lat_(std::cos(deg2rad(origin.lat_deg))) {}

LocalFrame::Xy LocalFrame::to_local(const GcsPoint& p) const {
    return Xy{normalize_lon(p.lon_deg - origin_.lon_deg) * cos_lat_ * kNmPerDeg,
              (p.lat_deg - origin_.lat_deg) * kNmPerDeg};
}

GcsPoint LocalFrame::to_gcs(const Xy& q) const {
    return GcsPoint{origin_.lat_deg + q.y / kNmPerDeg,
                    normalize_lon(origin_.lon_deg + q.x / (cos_lat_ * kNmPerDeg))};
}

std::optional<PlaneCrossing> plane_crossing(std::span<const GcsPoint> polyline,
                                            const CrossingPlane& plane) {
    if (polyline.size() < 2) {
        return std::nullopt;
    }
    const LocalFrame frame(plane.origin);

    // The plane is a straight segment in the tangent frame, perpendicular to the
    // route bearing and clipped at +-half_width from the origin.
    const double theta = deg2rad(plane.route_bearing_deg);
    const LocalFrame::Xy e1{-plane.half_width_nm * std::cos(theta),
                            plane.half_width_nm * std::sin(theta)};
    const LocalFrame::Xy e2{plane.half_width_nm * std::cos(theta),
                            -plane.half_width_nm * std::sin(theta)};
    const double sx = e2.x - e1.x;
    const double sy = e2.y - e1.y;

    auto prev = frame.to_local(polyline[0]);
    for (std::size_t i = 1; i < polyline.size(); ++i) {
        const auto cur = frame.to_local(polyline[i]);
        const double rx = cur.x - prev.x;
        const double ry = cur.y - prev.y;
        const double denom = rx * sy - ry * sx;
        if (std::abs(denom) > 1e-12) {
            const double qx = e1.x - prev.x;
            const double qy = e1.y - prev.y;
            const double t = (qx * sy - qy * sx) / denom;  // along the track segment
            const double u = (qx * ry - qy * rx) / denom;  // along the plane segment
            if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
                const GcsPoint point = frame.to_gcs({prev.x + t * rx, prev.y + t * ry});
                const double heading = initial_bearing_deg(polyline[i - 1], polyline[i]);
                return PlaneCrossing{point, heading};
            }
        }
        prev = cur;
    }
    return std::nullopt;
}

}  // namespace sectorflow::geo
