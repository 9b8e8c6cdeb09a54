#include "sectorflow/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "sectorflow/rng.hpp"

namespace sectorflow::nn {

namespace {

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

int raw_output_width(const NetworkSpec& spec) {
    return spec.head == OutputHead::kGaussian ? 2 * spec.output_dim : spec.output_dim;
}

void validate_spec(const NetworkSpec& spec) {
    if (spec.input_dim < 1 || spec.output_dim < 1) {
        throw std::invalid_argument("network spec: input and output dims must be >= 1");
    }
    for (int w : spec.hidden) {
        if (w < 1) throw std::invalid_argument("network spec: hidden widths must be >= 1");
    }
}

// Per-sample activations; act[0] is the input, act.back() the raw output.
struct Work {
    std::vector<std::vector<double>> act;
    std::vector<std::vector<double>> delta;  // dLoss/d(pre-activation) per layer
};

void ensure_work(Work& w, const NetworkSpec& spec, const Layout& lay) {
    const std::size_t n_layers = lay.layers.size();
    w.act.resize(n_layers + 1);
    w.delta.resize(n_layers);
    w.act[0].resize(static_cast<std::size_t>(spec.input_dim));
    for (std::size_t l = 0; l < n_layers; ++l) {
        w.act[l + 1].resize(static_cast<std::size_t>(lay.layers[l].out));
        w.delta[l].resize(static_cast<std::size_t>(lay.layers[l].out));
    }
}

void forward_into(const NetworkSpec& spec, const Layout& lay, const double* theta,
                  std::span<const double> xi, Work& w) {
    if (xi.size() != static_cast<std::size_t>(spec.input_dim)) {
        throw std::invalid_argument("forward: input length does not match input_dim");
    }
    std::copy(xi.begin(), xi.end(), w.act[0].begin());
    const std::size_t n_layers = lay.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& s = lay.layers[l];
        const auto& in = w.act[l];
        auto& out = w.act[l + 1];
        for (int m = 0; m < s.out; ++m) {
            const double* row = theta + s.w_off + static_cast<std::size_t>(m) * s.in;
            double acc = theta[s.b_off + static_cast<std::size_t>(m)];
            for (int i = 0; i < s.in; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(m)] = acc;
        }
        if (l + 1 < n_layers) {  // hidden layers get the nonlinearity
            if (spec.activation == Activation::kTanh) {
                for (double& v : out) v = std::tanh(v);
            } else {
                for (double& v : out) v = v > 0.0 ? v : 0.0;
            }
        }
    }
}

// Fills w.delta.back() with dLoss/d(raw output) for one sample and returns the
// sample's loss.
double loss_and_output_delta(const NetworkSpec& spec, Loss loss, const Work& w,
                             std::span<const double> y, std::vector<double>& dout) {
    const auto& raw = w.act.back();
    const int d = spec.output_dim;
    if (y.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("loss: target length does not match output_dim");
    }
    dout.assign(raw.size(), 0.0);
    double value = 0.0;
    if (loss == Loss::kL2) {
        for (int m = 0; m < d; ++m) {
            const double r = raw[static_cast<std::size_t>(m)] - y[static_cast<std::size_t>(m)];
            value += r * r;
            dout[static_cast<std::size_t>(m)] = 2.0 * r;
        }
    } else {
        if (spec.head != OutputHead::kGaussian) {
            throw std::invalid_argument("loss: NLL requires a gaussian head");
        }
        for (int m = 0; m < d; ++m) {
            const double mu = raw[static_cast<std::size_t>(m)];
            const double rho = raw[static_cast<std::size_t>(d + m)];
            const double sg = softplus(rho) + 1e-6;
            const double r = y[static_cast<std::size_t>(m)] - mu;
            value += std::log(sg) + r * r / (2.0 * sg * sg);
            dout[static_cast<std::size_t>(m)] = -r / (sg * sg);
            const double dsg = 1.0 / sg - r * r / (sg * sg * sg);
            dout[static_cast<std::size_t>(d + m)] = dsg * sigmoid(rho);
        }
    }
    return value;
}

void backward_into(const NetworkSpec& spec, const Layout& lay, const double* theta, Work& w,
                   std::vector<double>& grad_out) {
    const std::size_t n_layers = lay.layers.size();
    for (std::size_t li = n_layers; li-- > 0;) {
        const auto& s = lay.layers[li];
        const auto& in = w.act[li];
        auto& delta = w.delta[li];
        for (int m = 0; m < s.out; ++m) {
            const double dm = delta[static_cast<std::size_t>(m)];
            double* grow = grad_out.data() + s.w_off + static_cast<std::size_t>(m) * s.in;
            for (int i = 0; i < s.in; ++i) grow[i] += dm * in[static_cast<std::size_t>(i)];
            grad_out[s.b_off + static_cast<std::size_t>(m)] += dm;
        }
        if (li == 0) continue;
        auto& prev = w.delta[li - 1];
        std::fill(prev.begin(), prev.end(), 0.0);
        for (int m = 0; m < s.out; ++m) {
            const double dm = delta[static_cast<std::size_t>(m)];
            const double* row = theta + s.w_off + static_cast<std::size_t>(m) * s.in;
            for (int i = 0; i < s.in; ++i) prev[static_cast<std::size_t>(i)] += row[i] * dm;
        }
        // activation derivative from the stored post-activation value
        const auto& a = w.act[li];
        if (spec.activation == Activation::kTanh) {
            for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= 1.0 - a[i] * a[i];
        } else {
            for (std::size_t i = 0; i < prev.size(); ++i) {
                if (a[i] <= 0.0) prev[i] = 0.0;
            }
        }
    }
}

void validate_dataset(const NetworkSpec& spec, const Dataset& data) {
    if (data.inputs.empty() || data.inputs.size() != data.targets.size()) {
        throw std::invalid_argument("dataset: need matching, non-empty inputs and targets");
    }
    for (const auto& x : data.inputs) {
        if (x.size() != static_cast<std::size_t>(spec.input_dim)) {
            throw std::invalid_argument("dataset: input length does not match input_dim");
        }
    }
    for (const auto& y : data.targets) {
        if (y.size() != static_cast<std::size_t>(spec.output_dim)) {
            throw std::invalid_argument("dataset: target length does not match output_dim");
        }
    }
}

// Mean loss over the index set plus weight_decay * ||theta||^2; accumulates
// the matching gradient into grad_out when it is non-null.
double loss_and_grad(const NetworkSpec& spec, const Layout& lay, const double* theta,
                     const Dataset& data, std::span<const std::size_t> idx, Loss loss,
                     double weight_decay, std::vector<double>* grad_out, Work& w,
                     std::vector<double>& dout) {
    double total = 0.0;
    if (grad_out) std::fill(grad_out->begin(), grad_out->end(), 0.0);
    for (std::size_t k : idx) {
        forward_into(spec, lay, theta, data.inputs[k], w);
        total += loss_and_output_delta(spec, loss, w, data.targets[k], dout);
        if (grad_out) {
            w.delta.back() = dout;
            backward_into(spec, lay, theta, w, *grad_out);
        }
    }
    const double inv = 1.0 / static_cast<double>(idx.size());
    total *= inv;
    if (grad_out) {
        for (double& g : *grad_out) g *= inv;
    }
    if (weight_decay != 0.0) {
        double sq = 0.0;
        for (std::size_t j = 0; j < lay.total; ++j) sq += theta[j] * theta[j];
        total += weight_decay * sq;
        if (grad_out) {
            for (std::size_t j = 0; j < lay.total; ++j) {
                (*grad_out)[j] += 2.0 * weight_decay * theta[j];
            }
        }
    }
    return total;
}

}  // namespace

Layout make_layout(const NetworkSpec& spec) {
    validate_spec(spec);
    Layout lay;
    int in = spec.input_dim;
    std::vector<int> widths = spec.hidden;
    widths.push_back(raw_output_width(spec));
    for (int out : widths) {
        LayerSlice s;
        s.in = in;
        s.out = out;
        s.w_off = lay.total;
        s.b_off = lay.total + static_cast<std::size_t>(in) * out;
        lay.total = s.b_off + static_cast<std::size_t>(out);
        lay.layers.push_back(s);
        in = out;
    }
    return lay;
}

Params init_params(const NetworkSpec& spec, std::uint64_t seed) {
    const Layout lay = make_layout(spec);
    Params p;
    p.theta.assign(lay.total, 0.0);
    std::mt19937_64 gen(seed);
    for (const auto& s : lay.layers) {
        const double limit = std::sqrt(6.0 / (s.in + s.out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (std::size_t j = 0; j < static_cast<std::size_t>(s.in) * s.out; ++j) {
            p.theta[s.w_off + j] = u(gen);
        }
    }
    return p;
}

Output forward(const NetworkSpec& spec, const Params& params, std::span<const double> xi) {
    const Layout lay = make_layout(spec);
    if (params.theta.size() != lay.total) {
        throw std::invalid_argument("forward: parameter vector does not match the layout");
    }
    Work w;
    ensure_work(w, spec, lay);
    forward_into(spec, lay, params.theta.data(), xi, w);
    Output out;
    const auto& raw = w.act.back();
    const int d = spec.output_dim;
    out.mu.assign(raw.begin(), raw.begin() + d);
    if (spec.head == OutputHead::kGaussian) {
        out.sigma.resize(static_cast<std::size_t>(d));
        for (int m = 0; m < d; ++m) {
            out.sigma[static_cast<std::size_t>(m)] = softplus(raw[static_cast<std::size_t>(d + m)]) + 1e-6;
        }
    }
    return out;
}

std::vector<double> last_hidden(const NetworkSpec& spec, const Params& params,
                                std::span<const double> xi) {
    const Layout lay = make_layout(spec);
    if (params.theta.size() != lay.total) {
        throw std::invalid_argument("last_hidden: parameter vector does not match the layout");
    }
    Work w;
    ensure_work(w, spec, lay);
    forward_into(spec, lay, params.theta.data(), xi, w);
    return w.act[w.act.size() - 2];
}

double gaussian_nll(std::span<const double> mu, std::span<const double> sigma,
                    std::span<const double> y) {
    if (mu.size() != sigma.size() || mu.size() != y.size()) {
        throw std::invalid_argument("gaussian_nll: mismatched lengths");
    }
    double value = 0.0;
    for (std::size_t m = 0; m < mu.size(); ++m) {
        if (!(sigma[m] > 0.0)) throw std::invalid_argument("gaussian_nll: sigma must be positive");
        const double r = y[m] - mu[m];
        value += std::log(sigma[m]) + r * r / (2.0 * sigma[m] * sigma[m]);
    }
    return value;
}

double batch_loss(const NetworkSpec& spec, const Params& params, const Dataset& data,
                  Loss loss, double weight_decay) {
    const Layout lay = make_layout(spec);
    validate_dataset(spec, data);
    if (params.theta.size() != lay.total) {
        throw std::invalid_argument("batch_loss: parameter vector does not match the layout");
    }
    std::vector<std::size_t> idx(data.inputs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Work w;
    ensure_work(w, spec, lay);
    std::vector<double> dout;
    return loss_and_grad(spec, lay, params.theta.data(), data, idx, loss, weight_decay,
                         nullptr, w, dout);
}

std::vector<double> grad(const NetworkSpec& spec, const Params& params, const Dataset& data,
                         Loss loss, double weight_decay) {
    const Layout lay = make_layout(spec);
    validate_dataset(spec, data);
    if (params.theta.size() != lay.total) {
        throw std::invalid_argument("grad: parameter vector does not match the layout");
    }
    std::vector<std::size_t> idx(data.inputs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Work w;
    ensure_work(w, spec, lay);
    std::vector<double> dout;
    std::vector<double> g(lay.total, 0.0);
    loss_and_grad(spec, lay, params.theta.data(), data, idx, loss, weight_decay, &g, w, dout);
    return g;
}

TrainResult train(const NetworkSpec& spec, const Dataset& data, const TrainConfig& cfg,
                  Loss loss) {
    const Layout lay = make_layout(spec);
    validate_dataset(spec, data);
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw std::invalid_argument("train: epochs and batch_size must be positive");
    }
    if (!(cfg.learning_rate > 0.0) || !(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) ||
        !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
        throw std::invalid_argument("train: bad optimizer hyperparameters");
    }

    TrainResult res;
    res.params = init_params(spec, cfg.seed);
    auto& theta = res.params.theta;

    std::vector<double> g(lay.total, 0.0), m(lay.total, 0.0), v(lay.total, 0.0);
    Work w;
    ensure_work(w, spec, lay);
    std::vector<double> dout;

    std::vector<std::size_t> idx(data.inputs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 shuffler(rng::mix(cfg.seed, 1));  // decoupled from the init draws

    long t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(idx.begin(), idx.end(), shuffler);
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const std::size_t len = std::min<std::size_t>(cfg.batch_size, idx.size() - start);
            const std::span<const std::size_t> batch(idx.data() + start, len);
            const double bl = loss_and_grad(spec, lay, theta.data(), data, batch, loss,
                                            cfg.weight_decay, &g, w, dout);
            if (!std::isfinite(bl)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch));
            }
            epoch_loss += bl;
            ++n_batches;
            ++t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
            for (std::size_t j = 0; j < lay.total; ++j) {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                theta[j] -= cfg.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.eps);
            }
        }
        res.loss_trace.push_back(epoch_loss / n_batches);
    }
    return res;
}

std::vector<double> last_layer_ggn_diag(const NetworkSpec& spec, const Params& params,
                                        const Dataset& data) {
    if (spec.head != OutputHead::kPoint) {
        throw std::invalid_argument("last_layer_ggn_diag: point head required");
    }
    const Layout lay = make_layout(spec);
    validate_dataset(spec, data);
    if (params.theta.size() != lay.total) {
        throw std::invalid_argument("last_layer_ggn_diag: parameter vector does not match the layout");
    }
    const auto& s = lay.layers.back();
    std::vector<double> diag(static_cast<std::size_t>(s.in) * s.out + s.out, 0.0);

    Work w;
    ensure_work(w, spec, lay);
    std::vector<double> hsq(static_cast<std::size_t>(s.in), 0.0);
    for (const auto& xi : data.inputs) {
        forward_into(spec, lay, params.theta.data(), xi, w);
        const auto& h = w.act[w.act.size() - 2];
        for (int i = 0; i < s.in; ++i) hsq[static_cast<std::size_t>(i)] += h[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
    }
    for (int mrow = 0; mrow < s.out; ++mrow) {
        for (int i = 0; i < s.in; ++i) {
            diag[static_cast<std::size_t>(mrow) * s.in + i] = hsq[static_cast<std::size_t>(i)];
        }
        diag[static_cast<std::size_t>(s.in) * s.out + mrow] = static_cast<double>(data.inputs.size());
    }
    return diag;
}

}  // namespace sectorflow::nn
