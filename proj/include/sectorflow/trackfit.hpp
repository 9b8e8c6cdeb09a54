#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sectorflow/geo.hpp"

namespace sectorflow::trackfit {

// A radar ground track: observed positions with elapsed seconds, tau0 = 0,
// strictly increasing.
struct Track {
    std::vector<geo::GcsPoint> points;
    std::vector<double> times_sec;
};

// Piecewise-linear representation: control points p0..pd with normalized
// arrival times t0 = 0 .. td = 1, each increment proportional to the
// Haversine length of its leg.
struct PiecewiseTrack {
    std::vector<geo::GcsPoint> control_points;
    std::vector<double> arrival_times;
};

struct FitConfig {
    int degree = 3;
    double lambda = 1.0;       // turn penalty weight, squared-degrees
    double phi_u_deg = 45.0;   // max total turn angle before the penalty kicks in
    int resample_count = 200;  // samples used for the arc-length warm start
    int budget = 5000;         // objective evaluations per restart
    int restarts = 5;
    std::uint64_t seed = 0;
};

struct FitResult {
    PiecewiseTrack track;
    double objective = 0.0;
    // True when the winning restart reached the optimizer's step floor before
    // its evaluation budget ran out; false means the budget was exhausted and
    // the best point found so far is returned.
    bool converged = false;
};

struct Calibration {
    double lambda = 0.0;
    double phi_u_deg = 0.0;
};

std::vector<double> arrival_times(std::span<const geo::GcsPoint> control_points);
geo::GcsPoint interpolate(const PiecewiseTrack& pt, double t);
std::vector<std::pair<double, geo::GcsPoint>> resample(const Track& track, int m);
double total_turn_angle_deg(std::span<const geo::GcsPoint> control_points);

// J(P) = sum_j ||x_j - xhat(tau_j / tau_n)||^2 (degrees^2 on lat/lon) plus
// lambda when the total turn angle exceeds phi_u. P[0] must equal the first
// observation; a degenerate P (zero total length) evaluates to +inf.
double cost(std::span<const geo::GcsPoint> control_points, const Track& track,
            const FitConfig& cfg);

// Multi-start Nelder-Mead over the 2*degree free coordinates (p1..pd), with
// p0 anchored to the first observation. Deterministic given cfg.seed.
FitResult fit(const Track& track, const FitConfig& cfg);

// lambda = 10 x median unpenalized misfit, phi_u = max observed turn angle of
// the unpenalized fits (floored at 5 degrees).
Calibration calibrate(const std::vector<Track>& tracks, const FitConfig& cfg);

// Fits every track with a per-track derived seed; parallel and serial
// variants produce identical results.
std::vector<FitResult> fit_corpus(const std::vector<Track>& tracks, const FitConfig& cfg);
std::vector<FitResult> fit_corpus_serial(const std::vector<Track>& tracks, const FitConfig& cfg);

}  // namespace sectorflow::trackfit
