#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sectorflow/data.hpp"
#include "sectorflow/geo.hpp"
#include "sectorflow/trackfit.hpp"

namespace sectorflow::eval {

// One crossing of the route's evaluation plane: offset from the plane origin
// and the sine of the crossing heading (sine keeps headings continuous).
struct CrossingRecord {
    double d_h_nm = 0.0;
    double sin_phi = 0.0;
};

struct CrossingStats {
    std::vector<CrossingRecord> records;  // crossing tracks only, input order
    std::size_t n_tracks = 0;

    double crossing_rate() const {
        return n_tracks == 0 ? 0.0
                             : static_cast<double>(records.size()) / static_cast<double>(n_tracks);
    }
};

// Plane through the last waypoint inside the sector boundary (buffer
// excluded), perpendicular to the plan leg departing it (arriving leg when it
// is the final waypoint). Throws when no waypoint lies inside.
geo::CrossingPlane build_plane(const std::vector<geo::GcsPoint>& canonical_plan,
                               const data::SectorGeometry& sector, double half_width_nm);

CrossingStats crossing_stats(const std::vector<std::vector<geo::GcsPoint>>& tracks,
                             const geo::CrossingPlane& plane);
CrossingStats crossing_stats_serial(const std::vector<std::vector<geo::GcsPoint>>& tracks,
                                    const geo::CrossingPlane& plane);

// Polyline sampled at m uniform normalized times; generated tracks go through
// this before crossing detection so both corpora share one code path.
std::vector<geo::GcsPoint> resample_track(const trackfit::PiecewiseTrack& track, int m = 200);

// Exact two-sample Kolmogorov-Smirnov distance, sup evaluated at every pooled
// sample point.
double ks_distance(std::vector<double> a, std::vector<double> b);

// 100 |mean(gen) - mean(ref)| / |mean(ref)|; nullopt when |mean(ref)| <= 1e-12
// (the percentage is ill-posed there).
std::optional<double> mean_pct_error(std::span<const double> gen, std::span<const double> ref);

// Scott's rule: stdev * n^(-1/5), floored at 1e-6 for degenerate samples.
double scott_bandwidth(std::span<const double> sample);

std::vector<double> kde(std::span<const double> sample, std::span<const double> grid,
                        double bandwidth);

struct KdeCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0.0;
};

// Gaussian KDE on a uniform grid spanning the sample range +- 4 bandwidths.
KdeCurve kde_curve(std::span<const double> sample, int grid_points = 256);

struct RouteComparison {
    std::string route_id;
    double ks_dh = 0.0;
    double ks_sinphi = 0.0;
    std::optional<double> dmean_dh_pct;
    std::optional<double> dmean_sinphi_pct;
    double crossing_rate_test = 0.0;
    double crossing_rate_gen = 0.0;
};

// Throws when either side has no crossings, naming the side.
RouteComparison compare_route(const CrossingStats& test, const CrossingStats& generated,
                              const std::string& route_id);

}  // namespace sectorflow::eval
