// Times the OpenMP kernels against their serial reference implementations and
// verifies the results are bitwise identical: corpus fitting, deep-ensemble
// training, and crossing-plane statistics.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "sectorflow/data.hpp"
#include "sectorflow/eval.hpp"
#include "sectorflow/models.hpp"
#include "sectorflow/trackfit.hpp"

namespace sf = sectorflow;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_doubles(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

void print_row(const char* kernel, double t_serial, double t_parallel, bool match) {
    std::printf("%-18s %10.3fs %10.3fs %8.2fx   %s\n", kernel, t_serial, t_parallel,
                t_parallel > 0 ? t_serial / t_parallel : 0.0, match ? "bitwise match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serial-vs-parallel benchmark for the heavy kernels"};
    int n_flights = 60;
    int epochs = 150;
    int members = 4;
    int stat_repeats = 50;
    std::uint64_t seed = 0;
    app.add_option("--flights", n_flights, "Synthetic flights to fit")->capture_default_str();
    app.add_option("--epochs", epochs, "Ensemble training epochs")->capture_default_str();
    app.add_option("--members", members, "Ensemble members")->capture_default_str();
    app.add_option("--repeats", stat_repeats, "Track-list replication for the stats kernel")
        ->capture_default_str();
    app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (no OpenMP)\n");
#endif

    const auto scenario = sf::data::parse_scenario(sf::data::default_scenario_json());
    const auto synth = sf::data::synth_sector(scenario, n_flights, seed);
    auto groups = sf::data::group_routes(synth.records, synth.records.size());

    std::vector<sf::trackfit::Track> tracks;
    for (const auto& g : groups)
        for (const auto& r : g.members) tracks.push_back(r.track);

    sf::trackfit::FitConfig fit_cfg;
    fit_cfg.seed = seed;
    const auto cal = sf::trackfit::calibrate(tracks, fit_cfg);
    fit_cfg.lambda = cal.lambda;
    fit_cfg.phi_u_deg = cal.phi_u_deg;

    std::printf("%-18s %11s %11s %9s\n", "kernel", "serial", "parallel", "speedup");

    auto t0 = std::chrono::steady_clock::now();
    const auto fits_serial = sf::trackfit::fit_corpus_serial(tracks, fit_cfg);
    const double fit_ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto fits_parallel = sf::trackfit::fit_corpus(tracks, fit_cfg);
    const double fit_tp = seconds_since(t0);
    bool fit_match = fits_serial.size() == fits_parallel.size();
    for (std::size_t i = 0; fit_match && i < fits_serial.size(); ++i) {
        const auto& a = fits_serial[i];
        const auto& b = fits_parallel[i];
        fit_match = a.objective == b.objective &&
                    a.track.control_points.size() == b.track.control_points.size();
        for (std::size_t j = 0; fit_match && j < a.track.control_points.size(); ++j)
            fit_match = a.track.control_points[j].lat_deg == b.track.control_points[j].lat_deg &&
                        a.track.control_points[j].lon_deg == b.track.control_points[j].lon_deg;
    }
    print_row("fit_corpus", fit_ts, fit_tp, fit_match);

    // Ensemble training on the (context, control point) pairs of those fits.
    std::vector<std::vector<double>> xi_rows;
    std::vector<std::vector<double>> y_rows;
    std::size_t k = 0;
    for (const auto& g : groups) {
        for (const auto& r : g.members) {
            sf::models::Context ctx;
            ctx.entry_point = r.track.points.front();
            ctx.entry_flight_level = r.entry_flight_level;
            auto plan = sf::data::encode_plan(r.flight_plan, 6);
            for (std::size_t w = 0; w + 1 < plan.size(); w += 2)
                ctx.flight_plan.push_back({plan[w], plan[w + 1]});
            xi_rows.push_back(sf::models::encode_context(ctx));
            std::vector<double> y;
            const auto& cps = fits_serial[k++].track.control_points;
            for (std::size_t j = 1; j < cps.size(); ++j) {
                y.push_back(cps[j].lat_deg);
                y.push_back(cps[j].lon_deg);
            }
            y_rows.push_back(std::move(y));
        }
    }
    const auto fstd = sf::models::fit_standardizer(xi_rows);
    const auto tstd = sf::models::fit_standardizer(y_rows);
    sf::nn::Dataset ds;
    for (std::size_t i = 0; i < xi_rows.size(); ++i) {
        ds.inputs.push_back(sf::models::standardize(fstd, xi_rows[i]));
        ds.targets.push_back(sf::models::standardize(tstd, y_rows[i]));
    }
    sf::nn::NetworkSpec spec;
    spec.input_dim = static_cast<int>(ds.inputs[0].size());
    spec.output_dim = static_cast<int>(ds.targets[0].size());
    spec.head = sf::nn::OutputHead::kGaussian;
    sf::nn::TrainConfig tc;
    tc.epochs = epochs;
    tc.seed = seed;

    t0 = std::chrono::steady_clock::now();
    const auto de_serial = sf::models::de_train_serial(ds, members, spec, tc);
    const double de_ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto de_parallel = sf::models::de_train(ds, members, spec, tc);
    const double de_tp = seconds_since(t0);
    bool de_match = de_serial.size() == de_parallel.size();
    for (std::size_t i = 0; de_match && i < de_serial.size(); ++i)
        de_match = same_doubles(de_serial[i].theta, de_parallel[i].theta);
    print_row("de_train", de_ts, de_tp, de_match);

    // Crossing statistics over a replicated polyline list to get a stable time.
    const auto plane = sf::eval::build_plane(groups[0].canonical_plan, synth.sector, 60.0);
    std::vector<std::vector<sf::geo::GcsPoint>> polylines;
    for (int rep = 0; rep < stat_repeats; ++rep)
        for (const auto& f : fits_serial) polylines.push_back(sf::eval::resample_track(f.track));

    t0 = std::chrono::steady_clock::now();
    const auto cs_serial = sf::eval::crossing_stats_serial(polylines, plane);
    const double cs_ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto cs_parallel = sf::eval::crossing_stats(polylines, plane);
    const double cs_tp = seconds_since(t0);
    bool cs_match = cs_serial.n_tracks == cs_parallel.n_tracks &&
                    cs_serial.records.size() == cs_parallel.records.size();
    for (std::size_t i = 0; cs_match && i < cs_serial.records.size(); ++i)
        cs_match = cs_serial.records[i].d_h_nm == cs_parallel.records[i].d_h_nm &&
                   cs_serial.records[i].sin_phi == cs_parallel.records[i].sin_phi;
    print_row("crossing_stats", cs_ts, cs_tp, cs_match);

    return fit_match && de_match && cs_match ? 0 : 1;
}
