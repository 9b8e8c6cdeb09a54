#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "sectorflow/geo.hpp"
#include "sectorflow/rng.hpp"
#include "sectorflow/trackfit.hpp"

using namespace sectorflow;
using geo::GcsPoint;
using trackfit::FitConfig;
using trackfit::PiecewiseTrack;
using trackfit::Track;

namespace {

// Independent step-by-step composition of the arrival-time, interpolation,
// turn-angle and penalty rules, structured differently from the library
// (explicit per-observation binary search, separate normalization pass).
double oracle_cost(const std::vector<GcsPoint>& p, const Track& x, double lambda, double phi_u) {
    std::vector<double> legs{0.0};
    for (std::size_t i = 1; i < p.size(); ++i) legs.push_back(geo::haversine_nm(p[i - 1], p[i]));
    double total = 0.0;
    for (double l : legs) total += l;
    std::vector<double> knots{0.0};
    double cum = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        cum += legs[i];
        knots.push_back(cum / total);
    }
    knots.back() = 1.0;

    double data = 0.0;
    for (std::size_t j = 0; j < x.points.size(); ++j) {
        double t = x.times_sec[j] / x.times_sec.back();
        if (j + 1 == x.points.size()) t = 1.0;
        std::size_t k = 0;
        while (k + 2 < knots.size() && knots[k + 1] < t) ++k;
        double lat, lon;
        if (t == knots[k]) {
            lat = p[k].lat_deg;
            lon = p[k].lon_deg;
        } else if (t == knots[k + 1]) {
            lat = p[k + 1].lat_deg;
            lon = p[k + 1].lon_deg;
        } else {
            const double u = (t - knots[k]) / (knots[k + 1] - knots[k]);
            lat = p[k].lat_deg + u * (p[k + 1].lat_deg - p[k].lat_deg);
            lon = p[k].lon_deg + u * (p[k + 1].lon_deg - p[k].lon_deg);
        }
        const double dlat = x.points[j].lat_deg - lat;
        const double dlon = x.points[j].lon_deg - lon;
        data += dlat * dlat + dlon * dlon;
    }

    double turn = 0.0;
    bool have = false;
    double prev = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (geo::haversine_nm(p[i - 1], p[i]) < 1e-2) continue;  // zero-length rule
        const double b = geo::initial_bearing_deg(p[i - 1], p[i]);
        if (have) {
            double db = std::fmod(std::abs(b - prev), 360.0);
            if (db > 180.0) db = 360.0 - db;
            turn += db;
        }
        prev = b;
        have = true;
    }
    return data + (turn > phi_u ? lambda : 0.0);
}

// Degree-3 piecewise track with two >= 10 degree interior turns.
PiecewiseTrack make_bent_pwt() {
    std::vector<GcsPoint> cp;
    cp.push_back({51.0, -1.0});
    cp.push_back(geo::destination_point(cp[0], 45.0, 30.0));
    cp.push_back(geo::destination_point(cp[1], 75.0, 40.0));
    cp.push_back(geo::destination_point(cp[2], 45.0, 35.0));
    return {cp, trackfit::arrival_times(cp)};
}

// Noiseless observations sampled from a piecewise track at uniform times.
Track sample_track(const PiecewiseTrack& pwt, int n_obs) {
    Track x;
    for (int j = 0; j < n_obs; ++j) {
        x.times_sec.push_back(10.0 * j);
    }
    for (int j = 0; j < n_obs; ++j) {
        double t = x.times_sec[j] / x.times_sec.back();
        if (j + 1 == n_obs) t = 1.0;
        x.points.push_back(trackfit::interpolate(pwt, t));
    }
    return x;
}

}  // namespace

TEST_CASE("arrival times: equal legs give thirds") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}, {0, 2}, {0, 3}};
    const auto t = trackfit::arrival_times(cp);
    REQUIRE(t.size() == 4);
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(t[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(t[3] == 1.0);
}

TEST_CASE("arrival times: legs of 10 and 30 nm") {
    const GcsPoint a{0, 0};
    const GcsPoint b = geo::destination_point(a, 90.0, 10.0);
    const GcsPoint c = geo::destination_point(b, 90.0, 30.0);
    const auto t = trackfit::arrival_times(std::vector<GcsPoint>{a, b, c});
    CHECK(t[0] == 0.0);
    CHECK(t[1] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(t[2] == 1.0);
}

TEST_CASE("arrival times: repeated control point gives a zero-length increment") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}, {0, 1}, {0, 2}};
    const auto t = trackfit::arrival_times(cp);
    CHECK(t[1] == t[2]);
}

TEST_CASE("arrival times: degenerate control points throw") {
    const std::vector<GcsPoint> cp{{10, 10}, {10, 10}, {10, 10}};
    CHECK_THROWS_AS((void)trackfit::arrival_times(cp), std::invalid_argument);
}

TEST_CASE("arrival times: increments sum to one on random control points") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> lat(40, 60), lon(-5, 5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<GcsPoint> cp;
        for (int i = 0; i < 5; ++i) cp.push_back({lat(rng), lon(rng)});
        const auto t = trackfit::arrival_times(cp);
        CHECK(t.front() == 0.0);
        CHECK(t.back() == 1.0);
        double sum = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i) {
            CHECK(t[i] >= t[i - 1]);
            sum += t[i] - t[i - 1];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("interpolate: endpoints and knots are bit-exact") {
    const auto pwt = make_bent_pwt();
    for (std::size_t i = 0; i < pwt.arrival_times.size(); ++i) {
        const auto p = trackfit::interpolate(pwt, pwt.arrival_times[i]);
        CHECK(p.lat_deg == pwt.control_points[i].lat_deg);
        CHECK(p.lon_deg == pwt.control_points[i].lon_deg);
    }
}

TEST_CASE("interpolate: midpoint of a single segment") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}};
    const PiecewiseTrack pwt{cp, trackfit::arrival_times(cp)};
    const auto p = trackfit::interpolate(pwt, 0.5);
    CHECK(p.lat_deg == doctest::Approx(0.0));
    CHECK(p.lon_deg == doctest::Approx(0.5));
}

TEST_CASE("interpolate: interior points lie on their lat/lon segment") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> lat(40, 60), lon(-5, 5), uu(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<GcsPoint> cp;
        for (int i = 0; i < 4; ++i) cp.push_back({lat(rng), lon(rng)});
        const PiecewiseTrack pwt{cp, trackfit::arrival_times(cp)};
        for (std::size_t k = 0; k + 1 < cp.size(); ++k) {
            const double lo = pwt.arrival_times[k], hi = pwt.arrival_times[k + 1];
            if (hi <= lo) continue;
            const double t = lo + uu(rng) * (hi - lo);
            const auto p = trackfit::interpolate(pwt, t);
            const double sx = cp[k + 1].lat_deg - cp[k].lat_deg;
            const double sy = cp[k + 1].lon_deg - cp[k].lon_deg;
            const double dx = p.lat_deg - cp[k].lat_deg;
            const double dy = p.lon_deg - cp[k].lon_deg;
            CHECK(std::abs(sx * dy - sy * dx) < 1e-12);  // collinear
            CHECK(dx * sx + dy * sy >= -1e-15);          // between the endpoints
        }
    }
}

TEST_CASE("interpolate: out-of-range times throw") {
    const auto pwt = make_bent_pwt();
    CHECK_THROWS_AS((void)trackfit::interpolate(pwt, -0.01), std::out_of_range);
    CHECK_THROWS_AS((void)trackfit::interpolate(pwt, 1.01), std::out_of_range);
}

TEST_CASE("resample: uniform-in-time track is recovered exactly") {
    Track x;
    for (int j = 0; j < 7; ++j) {
        x.times_sec.push_back(30.0 * j);
        x.points.push_back({50.0 + 0.1 * j, -1.0 + 0.07 * j * j});
    }
    const auto rs = trackfit::resample(x, 7);
    REQUIRE(rs.size() == 7);
    for (int j = 0; j < 7; ++j) {
        CHECK(rs[j].second.lat_deg == x.points[j].lat_deg);
        CHECK(rs[j].second.lon_deg == x.points[j].lon_deg);
    }
}

TEST_CASE("resample: two samples give the endpoints") {
    Track x;
    x.times_sec = {0, 17, 60, 95};
    x.points = {{50, -1}, {50.3, -0.8}, {50.9, -0.4}, {51.4, 0.2}};
    const auto rs = trackfit::resample(x, 2);
    REQUIRE(rs.size() == 2);
    CHECK(rs[0].second.lat_deg == x.points.front().lat_deg);
    CHECK(rs[1].second.lon_deg == x.points.back().lon_deg);
}

TEST_CASE("resample: linear-in-time track stays collinear") {
    Track x;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> gap(5.0, 40.0);
    double tau = 0.0;
    for (int j = 0; j < 12; ++j) {
        if (j > 0) tau += gap(rng);
        x.times_sec.push_back(tau);
        x.points.push_back({50.0 + 0.012 * tau, -2.0 + 0.02 * tau});
    }
    const auto rs = trackfit::resample(x, 41);
    const auto& a = rs.front().second;
    const auto& b = rs.back().second;
    const double sx = b.lat_deg - a.lat_deg, sy = b.lon_deg - a.lon_deg;
    for (const auto& [t, p] : rs) {
        const double dx = p.lat_deg - a.lat_deg, dy = p.lon_deg - a.lon_deg;
        CHECK(std::abs(sx * dy - sy * dx) < 1e-9);
    }
}

TEST_CASE("turn angle: collinear points along the equator") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}, {0, 2}, {0, 3}};
    CHECK(trackfit::total_turn_angle_deg(cp) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("turn angle: right-angle dogleg") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}, {1, 1}};
    CHECK(std::abs(trackfit::total_turn_angle_deg(cp) - 90.0) < 0.1);
}

TEST_CASE("turn angle: opposite-sense turns accumulate in absolute value") {
    // bearings ~45, ~90, ~45: two 45-degree turns of opposite sign
    const std::vector<GcsPoint> cp{{0, 0}, {0.5, 0.5}, {0.5, 1.0}, {1.0, 1.5}};
    CHECK(std::abs(trackfit::total_turn_angle_deg(cp) - 90.0) < 0.1);
}

TEST_CASE("turn angle: zero-length legs are skipped") {
    const std::vector<GcsPoint> cp{{0, 0}, {0, 1}, {0, 1}, {1, 1}};
    CHECK(std::abs(trackfit::total_turn_angle_deg(cp) - 90.0) < 0.1);
}

TEST_CASE("cost: perfect fit is exactly zero, penalty isolates exactly lambda") {
    const auto pwt = make_bent_pwt();
    const auto x = sample_track(pwt, 60);

    FitConfig cfg;
    cfg.degree = 3;
    cfg.lambda = 0.7;
    cfg.phi_u_deg = 120.0;  // total turn is ~60, under the cap
    CHECK(trackfit::cost(pwt.control_points, x, cfg) == 0.0);

    cfg.phi_u_deg = 45.0;  // now the cap is violated and only the penalty remains
    CHECK(trackfit::cost(pwt.control_points, x, cfg) == 0.7);
}

TEST_CASE("cost: matches the compositional oracle on random instances") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> lat(49, 53), lon(-3, 1), nudge(-0.05, 0.05);
    std::uniform_real_distribution<double> gap(5.0, 30.0), u01(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        Track x;
        double tau = 0.0;
        for (int j = 0; j < 30; ++j) {
            if (j > 0) tau += gap(rng);
            x.times_sec.push_back(tau);
            x.points.push_back({lat(rng) * 0.02 + 50.0 + 0.01 * j, lon(rng) * 0.02 - 1.0 + 0.02 * j});
        }
        std::vector<GcsPoint> p{x.points.front()};
        for (int i = 0; i < 3; ++i) {
            p.push_back({x.points[9 * (i + 1)].lat_deg + nudge(rng),
                         x.points[9 * (i + 1)].lon_deg + nudge(rng)});
        }
        FitConfig cfg;
        cfg.degree = 3;
        cfg.lambda = u01(rng);
        cfg.phi_u_deg = 60.0 * u01(rng);
        const double got = trackfit::cost(p, x, cfg);
        const double want = oracle_cost(p, x, cfg.lambda, cfg.phi_u_deg);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("cost: anchor and size violations throw") {
    const auto pwt = make_bent_pwt();
    const auto x = sample_track(pwt, 20);
    FitConfig cfg;
    cfg.degree = 3;

    auto moved = pwt.control_points;
    moved[0].lat_deg += 1e-9;
    CHECK_THROWS_AS((void)trackfit::cost(moved, x, cfg), std::invalid_argument);

    auto short_p = pwt.control_points;
    short_p.pop_back();
    CHECK_THROWS_AS((void)trackfit::cost(short_p, x, cfg), std::invalid_argument);
}

TEST_CASE("fit: recovers a noiseless degree-3 track") {
    const auto truth = make_bent_pwt();
    const auto x = sample_track(truth, 200);

    FitConfig cfg;
    cfg.degree = 3;
    cfg.lambda = 1.0;
    cfg.phi_u_deg = 180.0;
    cfg.seed = 5;
    const auto res = trackfit::fit(x, cfg);

    CHECK(res.objective < 1e-8);
    for (std::size_t i = 1; i < truth.control_points.size(); ++i) {
        CHECK(std::abs(res.track.control_points[i].lat_deg - truth.control_points[i].lat_deg) < 1e-3);
        CHECK(std::abs(res.track.control_points[i].lon_deg - truth.control_points[i].lon_deg) < 1e-3);
    }
    // Entry anchoring: t = 0 returns the first radar point exactly.
    const auto p0 = trackfit::interpolate(res.track, 0.0);
    CHECK(p0.lat_deg == x.points.front().lat_deg);
    CHECK(p0.lon_deg == x.points.front().lon_deg);
}

TEST_CASE("fit: straight-line data stays straight") {
    // Constant latitude keeps the arc parametrization uniform, so the model
    // class contains an exact representation of the straight line.
    Track x;
    for (int j = 0; j < 100; ++j) {
        x.times_sec.push_back(12.0 * j);
        x.points.push_back({50.0, -1.0 + 0.012 * j});
    }
    FitConfig cfg;
    cfg.degree = 3;
    cfg.seed = 3;
    const auto res = trackfit::fit(x, cfg);
    CHECK(trackfit::total_turn_angle_deg(res.track.control_points) < 1.0);
    CHECK(std::sqrt(res.objective / 100.0) < 1e-6);  // RMSE in degrees
}

TEST_CASE("fit: turn cap steers the solution into the feasible basin") {
    // A sharp 90-degree dogleg with a 45-degree cap and a large penalty: the
    // best solution must spend misfit to stay under the cap.
    Track x;
    int j = 0;
    for (; j < 50; ++j) {
        x.times_sec.push_back(10.0 * j);
        x.points.push_back({50.0, -1.0 + 0.01 * j});
    }
    for (; j < 100; ++j) {
        x.times_sec.push_back(10.0 * j);
        x.points.push_back({50.0 + 0.01 * (j - 49), -1.0 + 0.49});
    }
    FitConfig cfg;
    cfg.degree = 3;
    cfg.lambda = 10.0;
    cfg.phi_u_deg = 45.0;
    cfg.seed = 17;
    const auto res = trackfit::fit(x, cfg);

    CHECK(trackfit::total_turn_angle_deg(res.track.control_points) <= 45.0 + 1e-9);
    CHECK(res.objective < cfg.lambda);  // no penalty inside the reported cost
    CHECK(res.objective == doctest::Approx(trackfit::cost(res.track.control_points, x, cfg)));
}

TEST_CASE("fit: best objective is monotone in the evaluation budget") {
    const auto truth = make_bent_pwt();
    const auto x = sample_track(truth, 120);
    FitConfig cfg;
    cfg.degree = 3;
    cfg.phi_u_deg = 180.0;
    cfg.seed = 9;
    cfg.restarts = 2;
    double prev = std::numeric_limits<double>::infinity();
    for (int budget : {200, 500, 1200, 3000}) {
        cfg.budget = budget;
        const auto res = trackfit::fit(x, cfg);
        CHECK(res.objective <= prev + 1e-15);
        prev = res.objective;
    }
}

TEST_CASE("fit: too few observations throw") {
    Track x;
    x.times_sec = {0, 10, 20, 30};
    x.points = {{50, 0}, {50.1, 0}, {50.2, 0}, {50.3, 0}};
    FitConfig cfg;
    cfg.degree = 3;  // needs at least 5 observations
    CHECK_THROWS_AS((void)trackfit::fit(x, cfg), std::invalid_argument);
}

TEST_CASE("calibrate: follows the 10x-median and max-turn rules") {
    // Two bent tracks with a little observation noise so misfits are nonzero.
    std::mt19937_64 rng(55);
    std::normal_distribution<double> noise(0.0, 0.003);
    std::vector<Track> tracks;
    for (int k = 0; k < 2; ++k) {
        auto x = sample_track(make_bent_pwt(), 80);
        for (auto& p : x.points) {
            p.lat_deg += noise(rng);
            p.lon_deg += noise(rng);
        }
        tracks.push_back(std::move(x));
    }

    FitConfig cfg;
    cfg.degree = 3;
    cfg.phi_u_deg = 180.0;
    cfg.seed = 77;
    const auto cal = trackfit::calibrate(tracks, cfg);

    // Replicate the rule with the same per-track seeds and unpenalized fits.
    FitConfig prelim = cfg;
    prelim.lambda = 0.0;
    std::vector<double> misfits;
    double max_turn = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        FitConfig c = prelim;
        c.seed = sectorflow::rng::mix(prelim.seed, i);
        const auto f = trackfit::fit(tracks[i], c);
        misfits.push_back(f.objective);
        max_turn = std::max(max_turn, trackfit::total_turn_angle_deg(f.track.control_points));
    }
    std::sort(misfits.begin(), misfits.end());
    const double want_lambda = 10.0 * 0.5 * (misfits[0] + misfits[1]);
    CHECK(cal.lambda == doctest::Approx(want_lambda).epsilon(1e-12));
    CHECK(cal.phi_u_deg == doctest::Approx(std::max(max_turn, 5.0)).epsilon(1e-12));
    CHECK(cal.lambda > 0.0);
}

TEST_CASE("calibrate: straight corpus floors phi_u at five degrees") {
    std::vector<Track> tracks;
    for (int k = 0; k < 3; ++k) {
        Track x;
        for (int j = 0; j < 40; ++j) {
            x.times_sec.push_back(15.0 * j);
            x.points.push_back({50.0 + 0.01 * j, -1.0 + 0.005 * k + 0.015 * j});
        }
        tracks.push_back(std::move(x));
    }
    FitConfig cfg;
    cfg.degree = 3;
    const auto cal = trackfit::calibrate(tracks, cfg);
    CHECK(cal.phi_u_deg == 5.0);
}

TEST_CASE("calibrate: empty collection throws") {
    FitConfig cfg;
    CHECK_THROWS_AS((void)trackfit::calibrate({}, cfg), std::invalid_argument);
}

TEST_CASE("fit corpus: serial and parallel results are identical") {
    std::vector<Track> tracks;
    std::mt19937_64 rng(66);
    std::normal_distribution<double> noise(0.0, 0.002);
    for (int k = 0; k < 6; ++k) {
        auto x = sample_track(make_bent_pwt(), 60);
        for (auto& p : x.points) {
            p.lat_deg += noise(rng);
            p.lon_deg += noise(rng);
        }
        tracks.push_back(std::move(x));
    }
    FitConfig cfg;
    cfg.degree = 3;
    cfg.phi_u_deg = 180.0;
    cfg.budget = 1500;
    cfg.restarts = 3;
    cfg.seed = 12;

    const auto par = trackfit::fit_corpus(tracks, cfg);
    const auto ser = trackfit::fit_corpus_serial(tracks, cfg);
    REQUIRE(par.size() == ser.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
        CHECK(par[i].objective == ser[i].objective);
        for (std::size_t c = 0; c < par[i].track.control_points.size(); ++c) {
            CHECK(par[i].track.control_points[c].lat_deg == ser[i].track.control_points[c].lat_deg);
            CHECK(par[i].track.control_points[c].lon_deg == ser[i].track.control_points[c].lon_deg);
        }
    }
}
