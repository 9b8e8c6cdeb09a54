#include "sectorflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace sectorflow::eval {

namespace {

constexpr double kPi = 3.14159265358979323846;

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

geo::CrossingPlane build_plane(const std::vector<geo::GcsPoint>& canonical_plan,
                               const data::SectorGeometry& sector, double half_width_nm) {
    if (canonical_plan.size() < 2) {
        throw std::invalid_argument("build_plane: plan needs >= 2 waypoints");
    }
    if (!(half_width_nm > 0.0)) {
        throw std::invalid_argument("build_plane: half_width_nm must be positive");
    }
    std::optional<std::size_t> origin_idx;
    for (std::size_t k = 0; k < canonical_plan.size(); ++k) {
        if (data::point_in_polygon(canonical_plan[k], sector.boundary)) origin_idx = k;
    }
    if (!origin_idx) {
        throw std::runtime_error("build_plane: no plan waypoint inside the sector boundary");
    }
    const std::size_t i = *origin_idx;
    geo::CrossingPlane plane;
    plane.origin = canonical_plan[i];
    plane.half_width_nm = half_width_nm;
    if (i + 1 < canonical_plan.size()) {
        plane.route_bearing_deg =
            geo::initial_bearing_deg(canonical_plan[i], canonical_plan[i + 1]);
    } else {
        plane.route_bearing_deg =
            geo::initial_bearing_deg(canonical_plan[i - 1], canonical_plan[i]);
    }
    return plane;
}

namespace {

CrossingStats crossing_stats_impl(const std::vector<std::vector<geo::GcsPoint>>& tracks,
                                  const geo::CrossingPlane& plane, bool parallel) {
    for (const auto& t : tracks) {
        if (t.size() < 2) throw std::invalid_argument("crossing_stats: track with < 2 points");
    }
    const std::int64_t n = static_cast<std::int64_t>(tracks.size());
    std::vector<std::optional<CrossingRecord>> hits(tracks.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto c = geo::plane_crossing(tracks[i], plane);
        if (c) {
            hits[i] = CrossingRecord{geo::haversine_nm(plane.origin, c->point),
                                     std::sin(c->heading_deg * kPi / 180.0)};
        }
    }
    CrossingStats out;
    out.n_tracks = tracks.size();
    for (const auto& h : hits) {
        if (h) out.records.push_back(*h);
    }
    return out;
}

}  // namespace

CrossingStats crossing_stats(const std::vector<std::vector<geo::GcsPoint>>& tracks,
                             const geo::CrossingPlane& plane) {
    return crossing_stats_impl(tracks, plane, true);
}

CrossingStats crossing_stats_serial(const std::vector<std::vector<geo::GcsPoint>>& tracks,
                                    const geo::CrossingPlane& plane) {
    return crossing_stats_impl(tracks, plane, false);
}

std::vector<geo::GcsPoint> resample_track(const trackfit::PiecewiseTrack& track, int m) {
    if (m < 2) throw std::invalid_argument("resample_track: need >= 2 samples");
    std::vector<geo::GcsPoint> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        out.push_back(trackfit::interpolate(track, static_cast<double>(k) / (m - 1)));
    }
    return out;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        const double x = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

std::optional<double> mean_pct_error(std::span<const double> gen, std::span<const double> ref) {
    if (gen.empty() || ref.empty()) throw std::invalid_argument("mean_pct_error: empty sample");
    const double mr = mean_of(ref);
    if (std::abs(mr) <= 1e-12) return std::nullopt;
    return 100.0 * std::abs(mean_of(gen) - mr) / std::abs(mr);
}

double scott_bandwidth(std::span<const double> sample) {
    if (sample.size() < 2) throw std::invalid_argument("scott_bandwidth: need >= 2 samples");
    const double m = mean_of(sample);
    double ss = 0.0;
    for (double x : sample) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / (static_cast<double>(sample.size()) - 1.0));
    const double h = sd * std::pow(static_cast<double>(sample.size()), -0.2);
    return std::max(h, 1e-6);
}

std::vector<double> kde(std::span<const double> sample, std::span<const double> grid,
                        double bandwidth) {
    if (sample.empty()) throw std::invalid_argument("kde: empty sample");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("kde: bandwidth must be positive");
    const double norm =
        1.0 / (static_cast<double>(sample.size()) * bandwidth * std::sqrt(2.0 * kPi));
    std::vector<double> out;
    out.reserve(grid.size());
    for (double x : grid) {
        double acc = 0.0;
        for (double s : sample) {
            const double u = (x - s) / bandwidth;
            acc += std::exp(-0.5 * u * u);
        }
        out.push_back(norm * acc);
    }
    return out;
}

KdeCurve kde_curve(std::span<const double> sample, int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("kde_curve: need >= 2 grid points");
    KdeCurve curve;
    curve.bandwidth = scott_bandwidth(sample);
    if (curve.bandwidth == 1e-6) {
        std::cerr << "warning: kde bandwidth floored at 1e-6 (near-degenerate sample)\n";
    }
    const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
    const double lo = *mn - 4.0 * curve.bandwidth;
    const double hi = *mx + 4.0 * curve.bandwidth;
    curve.x.reserve(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k) {
        curve.x.push_back(lo + (hi - lo) * static_cast<double>(k) / (grid_points - 1));
    }
    curve.density = kde(sample, curve.x, curve.bandwidth);
    return curve;
}

RouteComparison compare_route(const CrossingStats& test, const CrossingStats& generated,
                              const std::string& route_id) {
    if (test.records.empty()) {
        throw std::runtime_error("compare_route: route '" + route_id +
                                 "': no crossings in the test set");
    }
    if (generated.records.empty()) {
        throw std::runtime_error("compare_route: route '" + route_id +
                                 "': no crossings in the generated set");
    }
    std::vector<double> t_dh, t_sp, g_dh, g_sp;
    for (const auto& r : test.records) {
        t_dh.push_back(r.d_h_nm);
        t_sp.push_back(r.sin_phi);
    }
    for (const auto& r : generated.records) {
        g_dh.push_back(r.d_h_nm);
        g_sp.push_back(r.sin_phi);
    }
    RouteComparison out;
    out.route_id = route_id;
    out.ks_dh = ks_distance(g_dh, t_dh);
    out.ks_sinphi = ks_distance(g_sp, t_sp);
    out.dmean_dh_pct = mean_pct_error(g_dh, t_dh);
    out.dmean_sinphi_pct = mean_pct_error(g_sp, t_sp);
    out.crossing_rate_test = test.crossing_rate();
    out.crossing_rate_gen = generated.crossing_rate();
    return out;
}

}  // namespace sectorflow::eval
