// Spherical-geometry primitives for ground-track work: Haversine distance,
// initial bearing, destination point and polyline/plane crossing detection.
// All angles in degrees, all distances in nautical miles.

#pragma once

#include <optional>
#include <span>
#include <vector>

namespace sectorflow::geo {

// Mean Earth radius. 6371.0088 km / 1.852 km per nm.
inline constexpr double kEarthRadiusNm = 3440.065;

// Length of one degree of arc on the model sphere, R * pi / 180.
inline constexpr double kNmPerDeg = kEarthRadiusNm * 3.14159265358979323846 / 180.0;

// Latitude/longitude pair on the sphere, degrees.
// lat_deg in [-90, 90], lon_deg normalized into [-180, 180).
struct GcsPoint {
    double lat_deg = 0.0;
    double lon_deg = 0.0;
};

// Wrap a longitude into [-180, 180).
double normalize_lon(double lon_deg);

// Wrap a bearing into [0, 360).
double normalize_bearing(double bearing_deg);

// Great-circle distance between two points.
//   a = sin^2(dphi/2) + cos(phi1) cos(phi2) sin^2(dlam/2)
//   d = 2 R atan2(sqrt(a), sqrt(1-a))
// see http://www.movable-type.co.uk/scripts/latlong.html#ortho-dist
double haversine_nm(const GcsPoint& a, const GcsPoint& b);

// Forward azimuth from a toward b, clockwise from true north, in [0, 360).
// Throws std::invalid_argument when the points coincide (< 1e-9 nm apart).
double initial_bearing_deg(const GcsPoint& a, const GcsPoint& b);

// Great-circle destination from a on the given bearing after dist_nm.
GcsPoint destination_point(const GcsPoint& a, double bearing_deg, double dist_nm);

// Evaluation plane: the geodesic through `origin` perpendicular to
// `route_bearing_deg`, truncated at +/- half_width_nm.
struct CrossingPlane {
    GcsPoint origin;
    double route_bearing_deg = 0.0;
    double half_width_nm = 100.0;
};

struct PlaneCrossing {
    GcsPoint point;      // where the polyline crosses the plane segment
    double heading_deg;  // initial bearing of the crossing polyline segment
};

// First segment (in traversal order) of the polyline that crosses the plane
// segment, or nullopt when none does. Detection runs in a local
// equirectangular frame centered on the plane origin; sector spans are small
// against the Earth radius, so the flat-frame intersection is accurate there.
std::optional<PlaneCrossing> plane_crossing(std::span<const GcsPoint> polyline,
                                            const CrossingPlane& plane);

// Equirectangular tangent frame about a reference point: x east, y north, nm.
class LocalFrame {
  public:
    explicit LocalFrame(const GcsPoint& origin);

    struct Xy {
        double x = 0.0;
        double y = 0.0;
    };

    Xy to_local(const GcsPoint& p) const;
    GcsPoint to_gcs(const Xy& q) const;

  private:
    GcsPoint origin_;
    double cos_lat_;
};

}  // namespace sectorflow::geo
