#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sectorflow/geo.hpp"
#include "sectorflow/nn.hpp"
#include "sectorflow/trackfit.hpp"

namespace sectorflow::models {

// Flight-plan context conditioning the generative models. The flight plan is
// a fixed-length (W) waypoint sequence; padding/truncation happens upstream.
struct Context {
    geo::GcsPoint entry_point;
    double entry_flight_level = 0.0;
    std::vector<geo::GcsPoint> flight_plan;
};

// [entry lat, entry lon, flight level, wp1 lat, wp1 lon, ..., wpW lat, wpW lon]
std::vector<double> encode_context(const Context& ctx);

// Inverse of encode_context for a width-W plan encoding.
Context decode_context(std::span<const double> xi, std::size_t width);

// Per-dimension affine map to zero mean / unit variance (population stdev;
// zero-variance dimensions keep scale 1 so they pass through unchanged).
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;
};

Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows);
std::vector<double> standardize(const Standardizer& s, std::span<const double> row);
std::vector<double> destandardize(const Standardizer& s, std::span<const double> row);

// --- linear baseline ------------------------------------------------------

struct LinearModel {
    double sigma_jitter_deg = 0.05;
};

// Straight line from the entry point to the last flight-plan waypoint with
// N(0, sigma^2 I) jitter on the exit point, one 2-point polyline per sample.
std::vector<trackfit::PiecewiseTrack> linear_sample(const Context& ctx, int n,
                                                    double sigma_jitter_deg,
                                                    std::uint64_t seed);

// --- deep ensemble --------------------------------------------------------

struct EnsemblePrediction {
    std::vector<double> mu;     // mean per target coordinate
    std::vector<double> var;    // total variance: spread of means + mean member variance
    std::vector<double> sigma;  // sqrt(var)
};

struct EnsembleModel {
    int degree = 3;
    nn::NetworkSpec spec;  // gaussian head, output_dim = 2 * degree
    std::vector<nn::Params> members;
    Standardizer features;
    Standardizer targets;
};

// Pools member outputs: mu* = mean of member means, var = spread of member
// means plus mean member variance.
EnsemblePrediction combine_members(const std::vector<nn::Output>& outs);

// Trains n_e gaussian-head members on the standardized dataset with member
// seeds derived from cfg.seed; parallel and serial variants are identical.
std::vector<nn::Params> de_train(const nn::Dataset& data, int n_e, const nn::NetworkSpec& spec,
                                 const nn::TrainConfig& cfg);
std::vector<nn::Params> de_train_serial(const nn::Dataset& data, int n_e,
                                        const nn::NetworkSpec& spec, const nn::TrainConfig& cfg);

// Prediction in standardized target space for standardized features.
EnsemblePrediction de_predict(const EnsembleModel& m, std::span<const double> xi_std);

// Target vectors in degrees: each coordinate drawn independently from its
// pooled Gaussian, then de-standardized.
std::vector<std::vector<double>> de_sample(const EnsembleModel& m, const Context& ctx, int n,
                                           std::uint64_t seed);

// --- last-layer Laplace BNN ----------------------------------------------

struct LaplacePosterior {
    nn::NetworkSpec spec;  // point head
    nn::Params theta_map;
    // Variances for the last linear layer in slice order (weights row-major,
    // then biases): 1 / (ggn_diag + prior_precision).
    std::vector<double> last_layer_var;
    double prior_precision = 1.0;
};

struct BnnModel {
    int degree = 3;
    LaplacePosterior posterior;
    Standardizer features;
    Standardizer targets;
};

LaplacePosterior bnn_fit(const nn::Dataset& data, const nn::NetworkSpec& spec,
                         const nn::TrainConfig& cfg, double prior_precision);

// Draws last-layer weights from the diagonal posterior (rest of the network
// at the MAP), one forward evaluation per sample, in standardized space.
std::vector<std::vector<double>> bnn_sample_std(const LaplacePosterior& post,
                                                std::span<const double> xi_std, int n,
                                                std::uint64_t seed);

// Target vectors in degrees.
std::vector<std::vector<double>> bnn_sample(const BnnModel& m, const Context& ctx, int n,
                                            std::uint64_t seed);

// --- track assembly -------------------------------------------------------

// Control points [entry, unflatten(y)] with arc-length arrival times; y is the
// flattened (lat, lon) sequence of p1..pd in degrees.
trackfit::PiecewiseTrack finalize_track(const Context& ctx, std::span<const double> y);

std::vector<trackfit::PiecewiseTrack> sample_tracks(const EnsembleModel& m, const Context& ctx,
                                                    int n, std::uint64_t seed);
std::vector<trackfit::PiecewiseTrack> sample_tracks(const BnnModel& m, const Context& ctx,
                                                    int n, std::uint64_t seed);

}  // namespace sectorflow::models
