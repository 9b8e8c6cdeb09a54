#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sectorflow::nn {

enum class Activation { kTanh, kRelu };
enum class OutputHead { kPoint, kGaussian };
enum class Loss { kL2, kNll };

struct NetworkSpec {
    int input_dim = 1;
    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::kTanh;
    int output_dim = 1;
    OutputHead head = OutputHead::kPoint;
};

// One linear layer's slice of the flat parameter vector: weights are
// row-major (out x in) at w_off, biases follow at b_off.
struct LayerSlice {
    std::size_t w_off = 0;
    std::size_t b_off = 0;
    int in = 0;
    int out = 0;
};

struct Layout {
    std::vector<LayerSlice> layers;
    std::size_t total = 0;
};

Layout make_layout(const NetworkSpec& spec);

struct Params {
    std::vector<double> theta;
};

// Xavier-uniform weights, zero biases; deterministic in the seed.
Params init_params(const NetworkSpec& spec, std::uint64_t seed);

struct Output {
    std::vector<double> mu;     // point head: the plain network output
    std::vector<double> sigma;  // gaussian head only: softplus(rho) + 1e-6
};

Output forward(const NetworkSpec& spec, const Params& params, std::span<const double> xi);

// Activations of the last hidden layer (the network input when there are no
// hidden layers); used by the last-layer Laplace approximation.
std::vector<double> last_hidden(const NetworkSpec& spec, const Params& params,
                                std::span<const double> xi);

// sum_m [ log sigma_m + (y_m - mu_m)^2 / (2 sigma_m^2) ], constant dropped.
double gaussian_nll(std::span<const double> mu, std::span<const double> sigma,
                    std::span<const double> y);

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> targets;
};

// Mean per-sample loss over the dataset plus weight_decay * ||theta||^2.
double batch_loss(const NetworkSpec& spec, const Params& params, const Dataset& data,
                  Loss loss, double weight_decay);

// Exact reverse-mode gradient of batch_loss.
std::vector<double> grad(const NetworkSpec& spec, const Params& params, const Dataset& data,
                         Loss loss, double weight_decay);

struct TrainConfig {
    int epochs = 500;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
};

struct TrainResult {
    Params params;
    std::vector<double> loss_trace;  // mean batch loss per epoch
};

TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& cfg, Loss loss);

// Diagonal of the unit-noise generalized Gauss-Newton over the last linear
// layer, in slice order (weights row-major, then biases): weight (m, i) gets
// sum_k h_i(xi_k)^2, bias m gets the sample count. Point head only.
std::vector<double> last_layer_ggn_diag(const NetworkSpec& spec, const Params& params,
                                        const Dataset& data);

}  // namespace sectorflow::nn
