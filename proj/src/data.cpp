#include "sectorflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sectorflow/csvio.hpp"
#include "sectorflow/rng.hpp"

namespace sectorflow::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

std::string loc(const std::string& path, std::size_t line_no) {
    return path + ":" + std::to_string(line_no);
}

}  // namespace

bool point_in_polygon(const geo::GcsPoint& p, const std::vector<geo::GcsPoint>& poly) {
    if (poly.size() < 3) throw std::invalid_argument("point_in_polygon: need >= 3 vertices");
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.lat_deg > p.lat_deg) != (b.lat_deg > p.lat_deg)) {
            const double x = (b.lon_deg - a.lon_deg) * (p.lat_deg - a.lat_deg) /
                                 (b.lat_deg - a.lat_deg) +
                             a.lon_deg;
            if (p.lon_deg < x) inside = !inside;
        }
    }
    return inside;
}

std::vector<FlightRecord> ingest(const std::string& tracks_path, const std::string& plans_path) {
    const auto tlines = csvio::read_lines(tracks_path);
    const auto plines = csvio::read_lines(plans_path);

    // Tracks: rows contiguous per flight, sorted by time within a flight.
    std::vector<std::string> order;
    std::map<std::string, trackfit::Track> tracks;
    if (!tlines.empty()) {
        if (tlines[0] != "flight_id,t_sec,lat_deg,lon_deg") {
            throw std::runtime_error(loc(tracks_path, 1) + ": bad header '" + tlines[0] + "'");
        }
        std::string current;
        for (std::size_t ln = 1; ln < tlines.size(); ++ln) {
            if (tlines[ln].empty()) continue;
            const auto f = csvio::split_csv(tlines[ln]);
            if (f.size() != 4) {
                throw std::runtime_error(loc(tracks_path, ln + 1) + ": expected 4 fields, got " +
                                         std::to_string(f.size()));
            }
            const std::string id(f[0]);
            double t, lat, lon;
            try {
                t = csvio::parse_double(f[1]);
                lat = csvio::parse_double(f[2]);
                lon = csvio::parse_double(f[3]);
            } catch (const std::exception& e) {
                throw std::runtime_error(loc(tracks_path, ln + 1) + ": " + e.what());
            }
            if (id != current) {
                if (tracks.count(id)) {
                    throw std::runtime_error(loc(tracks_path, ln + 1) + ": rows for flight '" +
                                             id + "' are not contiguous");
                }
                current = id;
                order.push_back(id);
                tracks.emplace(id, trackfit::Track{});
            }
            auto& tr = tracks[id];
            tr.points.push_back({lat, lon});
            tr.times_sec.push_back(t);
        }
    }

    // Plans: wpt_index must count up from 0; entry_fl constant per flight.
    struct RawPlan {
        double entry_fl = 0.0;
        std::vector<geo::GcsPoint> waypoints;
    };
    std::map<std::string, RawPlan> plans;
    if (!plines.empty()) {
        if (plines[0] != "flight_id,entry_fl,wpt_index,lat_deg,lon_deg") {
            throw std::runtime_error(loc(plans_path, 1) + ": bad header '" + plines[0] + "'");
        }
        for (std::size_t ln = 1; ln < plines.size(); ++ln) {
            if (plines[ln].empty()) continue;
            const auto f = csvio::split_csv(plines[ln]);
            if (f.size() != 5) {
                throw std::runtime_error(loc(plans_path, ln + 1) + ": expected 5 fields, got " +
                                         std::to_string(f.size()));
            }
            const std::string id(f[0]);
            double fl, lat, lon;
            long long idx;
            try {
                fl = csvio::parse_double(f[1]);
                idx = csvio::parse_int(f[2]);
                lat = csvio::parse_double(f[3]);
                lon = csvio::parse_double(f[4]);
            } catch (const std::exception& e) {
                throw std::runtime_error(loc(plans_path, ln + 1) + ": " + e.what());
            }
            auto& plan = plans[id];
            if (idx != static_cast<long long>(plan.waypoints.size())) {
                throw std::runtime_error(loc(plans_path, ln + 1) + ": wpt_index " +
                                         std::to_string(idx) + " out of order for flight '" + id +
                                         "'");
            }
            if (plan.waypoints.empty()) {
                plan.entry_fl = fl;
            } else if (plan.entry_fl != fl) {
                throw std::runtime_error(loc(plans_path, ln + 1) +
                                         ": inconsistent entry_fl for flight '" + id + "'");
            }
            plan.waypoints.push_back({lat, lon});
        }
    }

    // Join and validate.
    std::vector<FlightRecord> records;
    std::vector<std::string> problems;
    for (const auto& id : order) {
        const auto& tr = tracks[id];
        if (tr.points.size() < 2) {
            problems.push_back("flight '" + id + "': fewer than 2 track points");
            continue;
        }
        bool monotone = true;
        for (std::size_t k = 1; k < tr.times_sec.size(); ++k) {
            if (tr.times_sec[k] <= tr.times_sec[k - 1]) {
                problems.push_back("flight '" + id + "': non-monotone timestamps (observation " +
                                   std::to_string(k) + ")");
                monotone = false;
                break;
            }
        }
        if (!monotone) continue;
        const auto it = plans.find(id);
        if (it == plans.end()) {
            problems.push_back("flight '" + id + "': no flight plan");
            continue;
        }
        records.push_back({id, tr, it->second.waypoints, it->second.entry_fl});
    }
    if (!problems.empty()) {
        std::string msg = "validation failed: ";
        for (std::size_t k = 0; k < problems.size(); ++k) {
            if (k) msg += "; ";
            msg += problems[k];
        }
        throw std::runtime_error(msg);
    }
    return records;
}

void write_tracks(const std::string& path, const std::vector<FlightRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "flight_id,t_sec,lat_deg,lon_deg\n";
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.track.points.size(); ++k) {
            out << r.flight_id << ',' << csvio::fmt_double(r.track.times_sec[k]) << ','
                << csvio::fmt_double(r.track.points[k].lat_deg) << ','
                << csvio::fmt_double(r.track.points[k].lon_deg) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

void write_plans(const std::string& path, const std::vector<FlightRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "flight_id,entry_fl,wpt_index,lat_deg,lon_deg\n";
    for (const auto& r : records) {
        for (std::size_t k = 0; k < r.flight_plan.size(); ++k) {
            out << r.flight_id << ',' << csvio::fmt_double(r.entry_flight_level) << ',' << k
                << ',' << csvio::fmt_double(r.flight_plan[k].lat_deg) << ','
                << csvio::fmt_double(r.flight_plan[k].lon_deg) << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

// Canonical key: waypoints rounded to 1e-6 degrees, serialized as integers.
std::string canonical_key(const std::vector<geo::GcsPoint>& plan) {
    std::string key;
    for (const auto& w : plan) {
        key += std::to_string(std::llround(w.lat_deg * 1e6));
        key += ':';
        key += std::to_string(std::llround(w.lon_deg * 1e6));
        key += ';';
    }
    return key;
}

std::vector<geo::GcsPoint> rounded_plan(const std::vector<geo::GcsPoint>& plan) {
    std::vector<geo::GcsPoint> out;
    out.reserve(plan.size());
    for (const auto& w : plan) {
        out.push_back({std::llround(w.lat_deg * 1e6) / 1e6, std::llround(w.lon_deg * 1e6) / 1e6});
    }
    return out;
}

}  // namespace

std::vector<RouteGroup> group_routes(std::vector<FlightRecord> records, std::size_t top_k) {
    if (records.empty()) throw std::invalid_argument("group_routes: no records");
    struct Bucket {
        std::string key;
        std::vector<geo::GcsPoint> plan;
        std::vector<FlightRecord> members;
    };
    std::map<std::string, Bucket> buckets;
    for (auto& r : records) {
        const std::string key = canonical_key(r.flight_plan);
        auto& b = buckets[key];
        if (b.members.empty()) {
            b.key = key;
            b.plan = rounded_plan(r.flight_plan);
        }
        b.members.push_back(std::move(r));
    }
    std::vector<Bucket> sorted;
    sorted.reserve(buckets.size());
    for (auto& [key, b] : buckets) sorted.push_back(std::move(b));
    std::sort(sorted.begin(), sorted.end(), [](const Bucket& a, const Bucket& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.key < b.key;
    });
    if (sorted.size() > top_k) sorted.resize(top_k);

    std::vector<RouteGroup> groups;
    groups.reserve(sorted.size());
    for (std::size_t g = 0; g < sorted.size(); ++g) {
        char id[16];
        std::snprintf(id, sizeof(id), "route_%02u", static_cast<unsigned>(g + 1));
        groups.push_back({id, std::move(sorted[g].plan), std::move(sorted[g].members)});
    }
    return groups;
}

std::vector<double> encode_plan(const std::vector<geo::GcsPoint>& plan, std::size_t width) {
    if (plan.empty()) throw std::invalid_argument("encode_plan: empty flight plan");
    if (width == 0) throw std::invalid_argument("encode_plan: width must be positive");
    std::vector<geo::GcsPoint> w;
    if (plan.size() <= width) {
        w = plan;
        while (w.size() < width) w.push_back(plan.back());
    } else {
        w.assign(plan.begin(), plan.begin() + (width - 1));
        w.push_back(plan.back());
    }
    std::vector<double> out;
    out.reserve(2 * width);
    for (const auto& p : w) {
        out.push_back(p.lat_deg);
        out.push_back(p.lon_deg);
    }
    return out;
}

SplitDataset build_pairs(const std::vector<RouteGroup>& groups, const PairConfig& cfg,
                         std::ostream* warnings) {
    struct Item {
        const FlightRecord* rec;
        const RouteGroup* grp;
    };
    std::vector<Item> items;
    for (const auto& g : groups) {
        for (const auto& m : g.members) items.push_back({&m, &g});
    }
    if (items.empty()) throw std::invalid_argument("build_pairs: no flights");
    if (cfg.fraction < 0.0 || cfg.fraction > 1.0) {
        throw std::invalid_argument("build_pairs: fraction outside [0, 1]");
    }

    const std::int64_t n = static_cast<std::int64_t>(items.size());
    std::vector<std::optional<trackfit::FitResult>> fits(items.size());
    std::vector<std::string> errors(items.size());
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
    for (std::int64_t i = 0; i < n; ++i) {
        trackfit::FitConfig fc = cfg.fit;
        fc.seed = rng::mix(cfg.fit.seed, static_cast<std::uint64_t>(i));
        try {
            fits[i] = trackfit::fit(items[i].rec->track, fc);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    std::vector<Pair> pairs;
    pairs.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& rec = *items[i].rec;
        if (!fits[i]) {
            if (warnings) {
                *warnings << "warning: skipping flight '" << rec.flight_id << "': " << errors[i]
                          << "\n";
            }
            continue;
        }
        Pair p;
        p.flight_id = rec.flight_id;
        p.route_id = items[i].grp->route_id;
        p.xi.push_back(rec.track.points.front().lat_deg);
        p.xi.push_back(rec.track.points.front().lon_deg);
        p.xi.push_back(rec.entry_flight_level);
        const auto plan = encode_plan(rec.flight_plan, cfg.plan_width);
        p.xi.insert(p.xi.end(), plan.begin(), plan.end());
        const auto& cp = fits[i]->track.control_points;
        for (std::size_t k = 1; k < cp.size(); ++k) {
            p.y.push_back(cp[k].lat_deg);
            p.y.push_back(cp[k].lon_deg);
        }
        pairs.push_back(std::move(p));
    }
    if (pairs.empty()) throw std::runtime_error("build_pairs: every flight failed to fit");

    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 gen(cfg.split_seed);
    std::shuffle(idx.begin(), idx.end(), gen);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(
        cfg.fraction * static_cast<double>(pairs.size())));
    std::vector<bool> is_train(pairs.size(), false);
    for (std::size_t k = 0; k < std::min(n_train, idx.size()); ++k) is_train[idx[k]] = true;

    SplitDataset out;
    out.split_seed = cfg.split_seed;
    out.fraction = cfg.fraction;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        (is_train[k] ? out.train : out.test).push_back(std::move(pairs[k]));
    }
    return out;
}

StandardizedSplit standardize_pairs(const SplitDataset& split) {
    if (split.train.size() < 2) {
        throw std::invalid_argument("standardize_pairs: need >= 2 training pairs");
    }
    std::vector<std::vector<double>> xs, ys;
    xs.reserve(split.train.size());
    ys.reserve(split.train.size());
    for (const auto& p : split.train) {
        xs.push_back(p.xi);
        ys.push_back(p.y);
    }
    StandardizedSplit out;
    out.features = models::fit_standardizer(xs);
    out.targets = models::fit_standardizer(ys);
    for (const auto& p : split.train) {
        out.train.inputs.push_back(models::standardize(out.features, p.xi));
        out.train.targets.push_back(models::standardize(out.targets, p.y));
    }
    for (const auto& p : split.test) {
        out.test.inputs.push_back(models::standardize(out.features, p.xi));
        out.test.targets.push_back(models::standardize(out.targets, p.y));
    }
    return out;
}

namespace {

void validate_scenario(const ScenarioConfig& sc) {
    if (sc.sector.boundary.size() < 3) {
        throw std::invalid_argument("scenario: sector boundary needs >= 3 vertices");
    }
    if (sc.sector.buffer_nm < 0.0) throw std::invalid_argument("scenario: negative buffer_nm");
    if (!(sc.sample_spacing_sec > 0.0)) {
        throw std::invalid_argument("scenario: sample_spacing_sec must be positive");
    }
    if (sc.routes.empty()) throw std::invalid_argument("scenario: needs >= 1 route");
    for (const auto& r : sc.routes) {
        if (r.waypoints.size() < 2) {
            throw std::invalid_argument("scenario: route '" + r.name + "' needs >= 2 waypoints");
        }
        for (std::size_t k = 1; k < r.waypoints.size(); ++k) {
            if (geo::haversine_nm(r.waypoints[k - 1], r.waypoints[k]) < 0.1) {
                throw std::invalid_argument("scenario: route '" + r.name +
                                            "' has a near-zero leg");
            }
        }
        if (!(r.weight > 0.0)) {
            throw std::invalid_argument("scenario: route '" + r.name + "' weight must be > 0");
        }
        if (r.heading_jitter_deg < 0.0 || r.cross_track_sigma_nm < 0.0 ||
            r.speed_jitter_kts < 0.0 || r.fl_spread < 0.0) {
            throw std::invalid_argument("scenario: route '" + r.name +
                                        "' has a negative noise parameter");
        }
        if (r.shortcut_prob < 0.0 || r.shortcut_prob > 1.0) {
            throw std::invalid_argument("scenario: route '" + r.name +
                                        "' shortcut_prob outside [0, 1]");
        }
        if (!(r.ground_speed_kts > 0.0)) {
            throw std::invalid_argument("scenario: route '" + r.name + "' needs positive speed");
        }
    }
}

std::vector<geo::GcsPoint> parse_points(const nlohmann::json& arr, const std::string& what) {
    std::vector<geo::GcsPoint> out;
    for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2) {
            throw std::invalid_argument("scenario: " + what + " entries must be [lat, lon]");
        }
        out.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return out;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario: invalid JSON: ") + e.what());
    }
    ScenarioConfig sc;
    try {
        sc.sample_spacing_sec = j.value("sample_spacing_sec", 6.0);
        const auto& js = j.at("sector");
        sc.sector.buffer_nm = js.value("buffer_nm", 50.0);
        sc.sector.boundary = parse_points(js.at("boundary"), "boundary");
        for (const auto& jr : j.at("routes")) {
            RouteScenario r;
            r.name = jr.at("name").get<std::string>();
            r.waypoints = parse_points(jr.at("waypoints"), "waypoints");
            r.entry_fl = jr.value("entry_fl", 300.0);
            r.weight = jr.value("weight", 1.0);
            r.heading_jitter_deg = jr.value("heading_jitter_deg", 0.0);
            r.cross_track_sigma_nm = jr.value("cross_track_sigma_nm", 0.0);
            r.shortcut_prob = jr.value("shortcut_prob", 0.0);
            r.ground_speed_kts = jr.value("ground_speed_kts", 450.0);
            r.speed_jitter_kts = jr.value("speed_jitter_kts", 0.0);
            r.fl_spread = jr.value("fl_spread", 0.0);
            sc.routes.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario: missing or mistyped field: ") +
                                    e.what());
    }
    validate_scenario(sc);
    return sc;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

const std::string& default_scenario_json() {
    // Eight-route sector loosely modeled on a UK en-route sector: two
    // descending flows entering from the east/south heading north, six
    // climbing flows entering from the north heading south, two of which share
    // their entry legs and diverge near the exit. Route 8 is exactly straight.
    static const std::string kJson = R"({
  "sample_spacing_sec": 6.0,
  "sector": {
    "buffer_nm": 50.0,
    "boundary": [[50.3, -2.4], [51.4, -2.6], [52.3, -2.4], [52.3, 0.5], [50.9, 0.7], [50.3, 0.5]]
  },
  "routes": [
    {"name": "east_nw_descent", "entry_fl": 350, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.1,
     "ground_speed_kts": 430, "speed_jitter_kts": 25,
     "waypoints": [[51.0, 0.4], [51.5, -0.6], [52.0, -1.4], [52.6, -1.8]]},
    {"name": "north_s_alpha", "entry_fl": 260, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.05,
     "ground_speed_kts": 420, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -2.0], [51.4, -2.1], [50.6, -1.2], [50.0, -1.4]]},
    {"name": "north_s_beta", "entry_fl": 270, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.1,
     "ground_speed_kts": 430, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -0.3], [51.2, -0.7], [50.6, -0.9], [50.0, -1.3]]},
    {"name": "north_s_gamma", "entry_fl": 280, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.1,
     "ground_speed_kts": 430, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -0.3], [51.2, -0.7], [50.6, -0.3], [50.0, 0.0]]},
    {"name": "north_s_delta", "entry_fl": 290, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.05,
     "ground_speed_kts": 440, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -1.5], [51.5, -0.9], [50.7, -1.9], [50.1, -2.1]]},
    {"name": "north_s_epsilon", "entry_fl": 300, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.05,
     "ground_speed_kts": 440, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -2.2], [51.1, -2.0], [50.5, -1.0], [50.1, -0.6]]},
    {"name": "north_s_zeta", "entry_fl": 310, "fl_spread": 10,
     "heading_jitter_deg": 2.0, "cross_track_sigma_nm": 7.0, "shortcut_prob": 0.05,
     "ground_speed_kts": 430, "speed_jitter_kts": 25,
     "waypoints": [[52.2, -0.9], [51.6, -1.3], [50.8, -0.5], [50.2, -0.2]]},
    {"name": "south_n_straight", "entry_fl": 340, "fl_spread": 10,
     "heading_jitter_deg": 0.6, "cross_track_sigma_nm": 0.5, "shortcut_prob": 0.0,
     "ground_speed_kts": 450, "speed_jitter_kts": 25,
     "waypoints": [[50.4, -1.1], [51.3, -1.1], [52.6, -1.1]]}
  ]
})";
    return kJson;
}

SynthResult synth_sector(const ScenarioConfig& scenario, int n_flights, std::uint64_t seed) {
    validate_scenario(scenario);
    if (n_flights < 0) throw std::invalid_argument("synth_sector: negative n_flights");

    std::vector<double> cum;
    cum.reserve(scenario.routes.size());
    double total_w = 0.0;
    for (const auto& r : scenario.routes) {
        total_w += r.weight;
        cum.push_back(total_w);
    }

    SynthResult out;
    out.sector = scenario.sector;
    out.records.reserve(static_cast<std::size_t>(n_flights));
    for (int i = 0; i < n_flights; ++i) {
        std::mt19937_64 gen(rng::mix(seed, static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        // Fixed draw order keeps the stream stable across branches.
        const double u_route = u01(gen);
        const double u_short = u01(gen);
        const double u_skip = u01(gen);
        const double g_head = gauss(gen);
        const double g_cross = gauss(gen);
        const double g_speed = gauss(gen);
        const double u_fl = u01(gen);

        const std::size_t ri = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), u_route * total_w) - cum.begin());
        const auto& route = scenario.routes[std::min(ri, scenario.routes.size() - 1)];

        std::vector<geo::GcsPoint> flown = route.waypoints;
        if (flown.size() >= 3 && u_short < route.shortcut_prob) {
            const std::size_t skip =
                1 + std::min(flown.size() - 3,
                             static_cast<std::size_t>(u_skip * static_cast<double>(flown.size() - 2)));
            flown.erase(flown.begin() + static_cast<std::ptrdiff_t>(skip));
        }

        const double delta = deg2rad(route.heading_jitter_deg * g_head);
        const double offset_nm = route.cross_track_sigma_nm * g_cross;
        const double speed = std::max(50.0, route.ground_speed_kts + route.speed_jitter_kts * g_speed);
        const double fl = route.entry_fl + route.fl_spread * (std::floor(u_fl * 3.0) - 1.0);

        // Rotate the flown polyline about the entry, then sample at constant
        // ground speed with a constant cross-track offset.
        const geo::LocalFrame frame(flown[0]);
        const double cd = std::cos(delta), sd = std::sin(delta);
        std::vector<geo::LocalFrame::Xy> xy(flown.size());
        for (std::size_t k = 0; k < flown.size(); ++k) {
            const auto q = frame.to_local(flown[k]);
            xy[k] = {q.x * cd - q.y * sd, q.x * sd + q.y * cd};
        }
        std::vector<double> arc(flown.size(), 0.0);
        for (std::size_t k = 1; k < xy.size(); ++k) {
            const double dx = xy[k].x - xy[k - 1].x, dy = xy[k].y - xy[k - 1].y;
            arc[k] = arc[k - 1] + std::hypot(dx, dy);
        }
        const double step_nm = speed * scenario.sample_spacing_sec / 3600.0;

        trackfit::Track track;
        std::size_t seg = 0;
        for (int k = 0;; ++k) {
            const double s = static_cast<double>(k) * step_nm;
            if (s > arc.back()) break;
            while (seg + 2 < arc.size() && s > arc[seg + 1]) ++seg;
            const double len = arc[seg + 1] - arc[seg];
            const double tt = (s - arc[seg]) / len;
            const double dx = (xy[seg + 1].x - xy[seg].x) / len;
            const double dy = (xy[seg + 1].y - xy[seg].y) / len;
            geo::LocalFrame::Xy p{xy[seg].x + tt * (xy[seg + 1].x - xy[seg].x) + offset_nm * dy,
                                  xy[seg].y + tt * (xy[seg + 1].y - xy[seg].y) - offset_nm * dx};
            track.points.push_back(frame.to_gcs(p));
            track.times_sec.push_back(static_cast<double>(k) * scenario.sample_spacing_sec);
        }
        if (track.points.size() < 2) {
            throw std::runtime_error("synth_sector: route '" + route.name +
                                     "' shorter than one sampling step");
        }

        char id[16];
        std::snprintf(id, sizeof(id), "f%06d", i);
        out.records.push_back({id, std::move(track), route.waypoints, fl});
    }
    return out;
}

}  // namespace sectorflow::data
