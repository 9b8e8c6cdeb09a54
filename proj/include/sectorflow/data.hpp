#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sectorflow/geo.hpp"
#include "sectorflow/models.hpp"
#include "sectorflow/nn.hpp"
#include "sectorflow/trackfit.hpp"

namespace sectorflow::data {

struct FlightRecord {
    std::string flight_id;
    trackfit::Track track;
    std::vector<geo::GcsPoint> flight_plan;
    double entry_flight_level = 0.0;
};

struct SectorGeometry {
    std::vector<geo::GcsPoint> boundary;  // simple polygon, implicit closure
    double buffer_nm = 50.0;
};

// Ray-casting test on raw lat/lon (adequate away from poles/antimeridian).
bool point_in_polygon(const geo::GcsPoint& p, const std::vector<geo::GcsPoint>& poly);

struct RouteGroup {
    std::string route_id;
    std::vector<geo::GcsPoint> canonical_plan;  // waypoints rounded to 1e-6 deg
    std::vector<FlightRecord> members;
};

// CSV ingestion/writing. Formats:
//   tracks: flight_id,t_sec,lat_deg,lon_deg      (rows contiguous per flight)
//   plans:  flight_id,entry_fl,wpt_index,lat_deg,lon_deg
std::vector<FlightRecord> ingest(const std::string& tracks_path, const std::string& plans_path);
void write_tracks(const std::string& path, const std::vector<FlightRecord>& records);
void write_plans(const std::string& path, const std::vector<FlightRecord>& records);

std::vector<RouteGroup> group_routes(std::vector<FlightRecord> records, std::size_t top_k = 8);

struct Pair {
    std::string flight_id;
    std::string route_id;
    std::vector<double> xi;
    std::vector<double> y;
};

struct SplitDataset {
    std::vector<Pair> train;
    std::vector<Pair> test;
    std::uint64_t split_seed = 0;
    double fraction = 0.8;
};

struct PairConfig {
    trackfit::FitConfig fit;
    std::size_t plan_width = 6;  // W waypoints encoded into xi
    double fraction = 0.8;
    std::uint64_t split_seed = 0;
    bool parallel = true;
};

// Pad short plans by repeating the final waypoint; truncate long ones to the
// first W-1 plus the final waypoint (the exit dominates lateral intent).
std::vector<double> encode_plan(const std::vector<geo::GcsPoint>& plan, std::size_t width);

// Fits every member track, builds (xi, y) pairs, and splits flights 80:20 by
// seeded shuffle. Per-flight fit failures are skipped with a warning line.
SplitDataset build_pairs(const std::vector<RouteGroup>& groups, const PairConfig& cfg,
                         std::ostream* warnings = nullptr);

struct StandardizedSplit {
    nn::Dataset train;
    nn::Dataset test;
    models::Standardizer features;
    models::Standardizer targets;
};

// Standardization constants come from TRAIN pairs only.
StandardizedSplit standardize_pairs(const SplitDataset& split);

struct RouteScenario {
    std::string name;
    std::vector<geo::GcsPoint> waypoints;
    double entry_fl = 300.0;
    double weight = 1.0;
    double heading_jitter_deg = 0.0;
    double cross_track_sigma_nm = 0.0;
    double shortcut_prob = 0.0;
    double ground_speed_kts = 450.0;
    double speed_jitter_kts = 0.0;
    double fl_spread = 0.0;
};

struct ScenarioConfig {
    SectorGeometry sector;
    std::vector<RouteScenario> routes;
    double sample_spacing_sec = 6.0;
};

ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::string& path);
const std::string& default_scenario_json();

struct SynthResult {
    std::vector<FlightRecord> records;
    SectorGeometry sector;
};

// Samples flights along scenario routes: per-flight heading rotation about the
// entry, constant cross-track offset, optional direct-to shortcuts skipping one
// interior waypoint, and constant-speed timestamps. Deterministic given seed.
SynthResult synth_sector(const ScenarioConfig& scenario, int n_flights, std::uint64_t seed);

}  // namespace sectorflow::data
