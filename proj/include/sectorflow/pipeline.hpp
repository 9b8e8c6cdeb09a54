#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sectorflow/data.hpp"
#include "sectorflow/eval.hpp"
#include "sectorflow/model_io.hpp"
#include "sectorflow/nn.hpp"
#include "sectorflow/trackfit.hpp"

namespace sectorflow::pipeline {

// Training schedule long enough for the MAP heading biases to settle; the
// light weight decay matters for the BNN, whose Gaussian prior already
// regularizes the last layer.
inline nn::TrainConfig default_train_config() {
    nn::TrainConfig cfg;
    cfg.epochs = 2000;
    cfg.weight_decay = 1e-5;
    return cfg;
}

// Everything the pipeline stages need beyond their input/output paths. CLI
// flags and config-file entries map one-to-one onto these fields.
struct PipelineConfig {
    // corpus -> pairs
    trackfit::FitConfig fit;
    bool auto_calibrate = true;  // derive lambda / phi_u from the corpus
    std::size_t top_k = 8;       // routes kept by group_routes
    std::size_t plan_width = 6;  // waypoints encoded into xi
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;

    // model
    std::string model_kind = "de";  // linear | de | bnn
    std::vector<int> hidden = {128, 128};
    std::string activation = "tanh";  // tanh | relu
    nn::TrainConfig train = default_train_config();
    int n_members = 5;
    double prior_precision = 6000.0;
    double sigma_jitter_deg = 0.05;

    // generation / evaluation
    int samples_per_context = 10;
    int resample_count = 200;  // points per resampled polyline
    double half_width_nm = 60.0;
    std::uint64_t sample_seed = 0;

    bool parallel = true;
};

// --- sector geometry file -------------------------------------------------

// JSON: {"boundary": [[lat, lon], ...], "buffer_nm": x}
void write_sector(const std::string& path, const data::SectorGeometry& sector);
data::SectorGeometry load_sector(const std::string& path);

// --- pairs file -----------------------------------------------------------

// CSV: flight_id,route_id,split,xi0..xi{3+2W-1},y0..y{2d-1}; split is
// "train" or "test". W and d are recovered from the column counts.
struct PairsFile {
    data::SplitDataset split;
    std::size_t plan_width = 0;
    int degree = 0;
};

void write_pairs(const std::string& path, const data::SplitDataset& split);
PairsFile read_pairs(const std::string& path);

// --- generated-track file -------------------------------------------------

struct GeneratedTrack {
    std::string route_id;
    std::string context_flight_id;  // test flight whose context seeded the sample
    int sample_idx = 0;
    std::vector<geo::GcsPoint> points;  // sampled at uniform normalized time
};

// CSV: route_id,context_flight_id,sample_idx,t_norm,lat_deg,lon_deg with rows
// contiguous per (route, context, sample).
void write_generated(const std::string& path, const std::vector<GeneratedTrack>& tracks);
std::vector<GeneratedTrack> read_generated(const std::string& path);

// --- stages ---------------------------------------------------------------

// Samples a synthetic sector corpus and writes tracks.csv, plans.csv and
// sector.json into out_dir. Empty scenario_path selects the built-in scenario.
void run_synth(const std::string& scenario_path, int n_flights, std::uint64_t seed,
               const std::string& out_dir, std::ostream& log);

// Ingests a corpus, keeps the top_k routes, calibrates the fit, fits every
// track and writes the (context, target) pairs file.
void run_fit(const std::string& tracks_path, const std::string& plans_path,
             const std::string& pairs_out, const PipelineConfig& cfg, std::ostream& log);

// Trains cfg.model_kind on the train split of the pairs file.
void run_train(const std::string& pairs_path, const std::string& model_out,
               const PipelineConfig& cfg, std::ostream& log);

// samples_per_context tracks for every test context, resampled to uniform
// normalized time. Sample seeds derive from (sample_seed, test row index).
std::vector<GeneratedTrack> generate_tracks(const model_io::AnyModel& model,
                                            const PairsFile& pairs, const PipelineConfig& cfg);
void run_generate(const std::string& model_path, const std::string& pairs_path,
                  const std::string& gen_out, const PipelineConfig& cfg, std::ostream& log);

// --- evaluation -----------------------------------------------------------

struct ModelEval {
    std::string model;  // report column: linear | de | bnn
    eval::CrossingStats stats;
    std::optional<eval::RouteComparison> comparison;  // nullopt: a side had no crossings
};

struct RouteReport {
    std::string route_id;
    eval::CrossingStats test_stats;
    std::vector<ModelEval> models;
};

// Crossing-plane statistics per route: held-out real tracks against each
// generated set. Test tracks use their raw observed points.
std::vector<RouteReport> evaluate_routes(
    const std::vector<data::RouteGroup>& groups, const std::set<std::string>& test_ids,
    const data::SectorGeometry& sector,
    const std::vector<std::pair<std::string, std::vector<GeneratedTrack>>>& generated,
    const PipelineConfig& cfg);

// CSV: route_id,metric,linear,de,bnn with metric rows ks_dh, ks_sinphi,
// dmean_dh_pct, dmean_sinphi_pct, crossing_rate, crossing_rate_test.
// Ill-posed cells hold "undefined"; absent models leave cells empty.
void write_report(const std::string& path, const std::vector<RouteReport>& reports);

// kde_<route>_<dh|sinphi>_<model|test>.csv files (x,density), one per
// nonempty crossing sample.
void write_kde_curves(const std::string& out_dir, const std::vector<RouteReport>& reports);

// generated_paths pairs a report column name with its generated-track file.
void run_evaluate(const std::string& tracks_path, const std::string& plans_path,
                  const std::string& sector_path, const std::string& pairs_path,
                  const std::vector<std::pair<std::string, std::string>>& generated_paths,
                  const std::string& out_dir, const PipelineConfig& cfg, std::ostream& log);

// Renders report.csv as an aligned text table.
std::string format_report(const std::string& report_csv_path);

}  // namespace sectorflow::pipeline
