#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "sectorflow/nn.hpp"
#include "sectorflow/rng.hpp"

using namespace sectorflow;
using nn::Activation;
using nn::Dataset;
using nn::Loss;
using nn::NetworkSpec;
using nn::OutputHead;
using nn::Params;

namespace {

// Independent forward pass: explicit matrix-vector loops over the same layout
// convention (row-major weights then biases, hidden nonlinearity only).
std::vector<double> oracle_forward_raw(const NetworkSpec& spec, const std::vector<double>& theta,
                                       const std::vector<double>& xi) {
    std::vector<int> widths{spec.input_dim};
    for (int h : spec.hidden) widths.push_back(h);
    widths.push_back(spec.head == OutputHead::kGaussian ? 2 * spec.output_dim : spec.output_dim);

    std::vector<double> a = xi;
    std::size_t off = 0;
    for (std::size_t l = 1; l < widths.size(); ++l) {
        const int in = widths[l - 1], out = widths[l];
        std::vector<double> z(out, 0.0);
        for (int m = 0; m < out; ++m) {
            for (int i = 0; i < in; ++i) z[m] += theta[off + m * in + i] * a[i];
        }
        off += static_cast<std::size_t>(in) * out;
        for (int m = 0; m < out; ++m) z[m] += theta[off + m];
        off += out;
        if (l + 1 < widths.size()) {
            for (double& v : z) {
                v = spec.activation == Activation::kTanh ? std::tanh(v) : std::max(0.0, v);
            }
        }
        a = std::move(z);
    }
    return a;
}

Dataset random_dataset(const NetworkSpec& spec, int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Dataset d;
    for (int k = 0; k < n; ++k) {
        std::vector<double> x(spec.input_dim), y(spec.output_dim);
        for (auto& v : x) v = g(rng);
        for (auto& v : y) v = g(rng);
        d.inputs.push_back(std::move(x));
        d.targets.push_back(std::move(y));
    }
    return d;
}

}  // namespace

TEST_CASE("layout: parameter counts for point and gaussian heads") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden = {4, 5};
    spec.output_dim = 2;
    spec.head = OutputHead::kPoint;
    CHECK(nn::make_layout(spec).total == (3 * 4 + 4) + (4 * 5 + 5) + (5 * 2 + 2));
    spec.head = OutputHead::kGaussian;  // doubles the final layer width
    CHECK(nn::make_layout(spec).total == (3 * 4 + 4) + (4 * 5 + 5) + (5 * 4 + 4));
}

TEST_CASE("forward: zero parameters give zero point output") {
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.hidden = {8};
    spec.output_dim = 3;
    Params p;
    p.theta.assign(nn::make_layout(spec).total, 0.0);
    const auto out = nn::forward(spec, p, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    for (double v : out.mu) CHECK(v == 0.0);
}

TEST_CASE("forward: identity single linear layer returns the input slice") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden = {};
    spec.output_dim = 2;
    Params p;
    p.theta.assign(nn::make_layout(spec).total, 0.0);
    p.theta[0] = 1.0;  // W[0][0]
    p.theta[4] = 1.0;  // W[1][1]
    const std::vector<double> xi{0.25, -1.5, 7.0};
    const auto out = nn::forward(spec, p, xi);
    CHECK(out.mu[0] == 0.25);
    CHECK(out.mu[1] == -1.5);
}

TEST_CASE("forward: matches the matrix-arithmetic oracle") {
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        NetworkSpec spec;
        spec.input_dim = 2 + trial % 4;
        spec.hidden = (trial % 3 == 0) ? std::vector<int>{} : std::vector<int>{5, 1 + trial % 6};
        spec.activation = trial % 2 ? Activation::kTanh : Activation::kRelu;
        spec.output_dim = 1 + trial % 3;
        spec.head = trial % 2 ? OutputHead::kGaussian : OutputHead::kPoint;

        Params p = nn::init_params(spec, 100 + trial);
        for (auto& v : p.theta) v += 0.1 * g(rng);  // nonzero biases too
        std::vector<double> xi(spec.input_dim);
        for (auto& v : xi) v = g(rng);

        const auto want = oracle_forward_raw(spec, p.theta, xi);
        const auto got = nn::forward(spec, p, xi);
        for (int m = 0; m < spec.output_dim; ++m) {
            CHECK(got.mu[m] == doctest::Approx(want[m]).epsilon(1e-12));
        }
        if (spec.head == OutputHead::kGaussian) {
            for (int m = 0; m < spec.output_dim; ++m) {
                const double rho = want[spec.output_dim + m];
                const double soft = rho > 0 ? rho + std::log1p(std::exp(-rho))
                                            : std::log1p(std::exp(rho));
                CHECK(got.sigma[m] == doctest::Approx(soft + 1e-6).epsilon(1e-12));
                CHECK(got.sigma[m] >= 1e-6);
            }
        }
    }
}

TEST_CASE("forward: dimension mismatch throws") {
    NetworkSpec spec;
    spec.input_dim = 3;
    Params p = nn::init_params(spec, 0);
    CHECK_THROWS_AS((void)nn::forward(spec, p, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("gaussian nll: frozen hand values") {
    const std::vector<double> one{1.0};
    CHECK(nn::gaussian_nll(std::vector<double>{1.0}, one, std::vector<double>{1.0}) == 0.0);
    CHECK(nn::gaussian_nll(std::vector<double>{0.0}, one, std::vector<double>{1.0}) ==
          doctest::Approx(0.5).epsilon(1e-15));
    const double e = std::exp(1.0);
    CHECK(nn::gaussian_nll(std::vector<double>{0.0}, std::vector<double>{e},
                           std::vector<double>{0.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS((void)nn::gaussian_nll(one, std::vector<double>{0.0}, one),
                    std::invalid_argument);
}

TEST_CASE("grad: zero at a stationary construction and pure weight decay") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden = {6};
    spec.output_dim = 2;
    Params p = nn::init_params(spec, 7);
    std::mt19937_64 rng(8);
    Dataset d = random_dataset(spec, 12, rng);
    for (std::size_t k = 0; k < d.inputs.size(); ++k) {
        d.targets[k] = nn::forward(spec, p, d.inputs[k]).mu;  // residuals vanish
    }
    const auto g0 = nn::grad(spec, p, d, Loss::kL2, 0.0);
    for (double v : g0) CHECK(v == 0.0);

    const double wd = 0.037;
    const auto gw = nn::grad(spec, p, d, Loss::kL2, wd);
    for (std::size_t j = 0; j < gw.size(); ++j) {
        CHECK(gw[j] == doctest::Approx(2.0 * wd * p.theta[j]).epsilon(1e-12));
    }
}

TEST_CASE("grad: matches central finite differences on 100 random networks") {
    std::mt19937_64 rng(4321);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        NetworkSpec spec;
        spec.input_dim = 2 + trial % 3;
        spec.hidden = (trial % 4 == 0) ? std::vector<int>{} : std::vector<int>{4};
        spec.activation = trial % 2 ? Activation::kTanh : Activation::kRelu;
        spec.output_dim = 1 + trial % 2;
        const bool use_nll = trial % 3 == 0;
        spec.head = use_nll ? OutputHead::kGaussian : OutputHead::kPoint;
        const Loss loss = use_nll ? Loss::kNll : Loss::kL2;
        const double wd = (trial % 5 == 0) ? 1e-3 : 0.0;

        Params p = nn::init_params(spec, 999 + trial);
        std::normal_distribution<double> g(0.0, 0.3);
        for (auto& v : p.theta) v += g(rng);
        Dataset d = random_dataset(spec, 6, rng);

        const auto an = nn::grad(spec, p, d, loss, wd);
        for (std::size_t j = 0; j < an.size(); ++j) {
            Params pp = p, pm = p;
            pp.theta[j] += h;
            pm.theta[j] -= h;
            const double fd = (nn::batch_loss(spec, pp, d, loss, wd) -
                               nn::batch_loss(spec, pm, d, loss, wd)) / (2.0 * h);
            const double rel = std::abs(an[j] - fd) / std::max({std::abs(an[j]), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("train: linear regression recovers the least-squares line") {
    NetworkSpec spec;
    spec.input_dim = 1;
    spec.hidden = {};
    spec.output_dim = 1;
    Dataset d;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double sxy = 0.0, sxx = 0.0, sx = 0.0, sy = 0.0;
    const int n = 200;
    for (int k = 0; k < n; ++k) {
        const double x = u(rng);
        const double y = 2.0 * x;
        d.inputs.push_back({x});
        d.targets.push_back({y});
        sxy += x * y;
        sxx += x * x;
        sx += x;
        sy += y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);  // OLS oracle

    nn::TrainConfig cfg;
    cfg.seed = 42;
    cfg.weight_decay = 0.0;
    const auto res = nn::train(spec, d, cfg, Loss::kL2);
    CHECK(res.params.theta[0] == doctest::Approx(slope).epsilon(0.005));
    CHECK(std::abs(res.params.theta[1]) < 0.01);  // zero intercept
}

TEST_CASE("train: memorizes a single repeated pair") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden = {8};
    spec.output_dim = 1;
    Dataset d;
    for (int k = 0; k < 16; ++k) {
        d.inputs.push_back({0.3, -0.7});
        d.targets.push_back({1.25});
    }
    nn::TrainConfig cfg;
    cfg.epochs = 300;
    cfg.weight_decay = 0.0;
    cfg.seed = 6;
    const auto res = nn::train(spec, d, cfg, Loss::kL2);
    CHECK(res.loss_trace.back() < 1e-5);
    // monotone decrease after warmup, until Adam reaches its step-size floor
    for (std::size_t e = res.loss_trace.size() / 3; e + 1 < res.loss_trace.size(); ++e) {
        if (res.loss_trace[e] < 1e-6) break;
        CHECK(res.loss_trace[e + 1] <= res.loss_trace[e] + 1e-9);
    }
}

TEST_CASE("train: gaussian head recovers a known noise profile") {
    // y ~ N(x, sigma(x)) with sigma(x) = 0.1 + 0.2 (x + 1)
    NetworkSpec spec;
    spec.input_dim = 1;
    spec.hidden = {16};
    spec.output_dim = 1;
    spec.head = OutputHead::kGaussian;
    Dataset d;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 3000; ++k) {
        const double x = u(rng);
        const double sg = 0.1 + 0.2 * (x + 1.0);
        d.inputs.push_back({x});
        d.targets.push_back({x + sg * g(rng)});
    }
    nn::TrainConfig cfg;
    cfg.epochs = 400;
    cfg.learning_rate = 3e-3;
    cfg.weight_decay = 0.0;
    cfg.seed = 13;
    const auto res = nn::train(spec, d, cfg, Loss::kNll);
    for (double x = -0.8; x <= 0.81; x += 0.2) {
        const auto out = nn::forward(spec, res.params, std::vector<double>{x});
        const double truth = 0.1 + 0.2 * (x + 1.0);
        CHECK(std::abs(out.sigma[0] - truth) / truth < 0.2);
    }
}

TEST_CASE("train: identical seeds are bitwise reproducible") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden = {6};
    spec.output_dim = 2;
    std::mt19937_64 rng(15);
    Dataset d = random_dataset(spec, 40, rng);
    nn::TrainConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 31;
    const auto a = nn::train(spec, d, cfg, Loss::kL2);
    const auto b = nn::train(spec, d, cfg, Loss::kL2);
    REQUIRE(a.params.theta.size() == b.params.theta.size());
    for (std::size_t j = 0; j < a.params.theta.size(); ++j) {
        CHECK(a.params.theta[j] == b.params.theta[j]);
    }
}

TEST_CASE("ggn diag: closed form on a bare linear layer") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden = {};
    spec.output_dim = 1;
    Params p = nn::init_params(spec, 3);
    Dataset d;
    d.inputs.push_back({1.0, 2.0});
    d.targets.push_back({0.0});
    const auto diag = nn::last_layer_ggn_diag(spec, p, d);
    REQUIRE(diag.size() == 3);
    CHECK(diag[0] == 1.0);
    CHECK(diag[1] == 4.0);
    CHECK(diag[2] == 1.0);
}

TEST_CASE("ggn diag: zero activations leave only the bias count") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden = {};
    spec.output_dim = 2;
    Params p = nn::init_params(spec, 4);
    Dataset d;
    for (int k = 0; k < 3; ++k) {
        d.inputs.push_back({0.0, 0.0});
        d.targets.push_back({0.0, 0.0});
    }
    const auto diag = nn::last_layer_ggn_diag(spec, p, d);
    REQUIRE(diag.size() == 6);
    CHECK(diag[0] == 0.0);
    CHECK(diag[1] == 0.0);
    CHECK(diag[2] == 0.0);
    CHECK(diag[3] == 0.0);
    CHECK(diag[4] == 3.0);
    CHECK(diag[5] == 3.0);
}

TEST_CASE("ggn diag: matches a finite-difference Jacobian-squared oracle") {
    NetworkSpec spec;
    spec.input_dim = 3;
    spec.hidden = {5, 4};
    spec.output_dim = 2;
    Params p = nn::init_params(spec, 21);
    std::mt19937_64 rng(22);
    Dataset d = random_dataset(spec, 9, rng);

    const auto lay = nn::make_layout(spec);
    const auto& last = lay.layers.back();
    const std::size_t n_last = static_cast<std::size_t>(last.in) * last.out + last.out;
    const auto diag = nn::last_layer_ggn_diag(spec, p, d);
    REQUIRE(diag.size() == n_last);

    // outputs are linear in the last-layer parameters, so central differences
    // recover the Jacobian to round-off
    const double h = 1e-4;
    for (std::size_t j = 0; j < n_last; ++j) {
        const std::size_t gj = last.w_off + j;  // contiguous: weights then biases
        double acc = 0.0;
        for (std::size_t k = 0; k < d.inputs.size(); ++k) {
            Params pp = p, pm = p;
            pp.theta[gj] += h;
            pm.theta[gj] -= h;
            const auto fp = nn::forward(spec, pp, d.inputs[k]).mu;
            const auto fm = nn::forward(spec, pm, d.inputs[k]).mu;
            for (int m = 0; m < spec.output_dim; ++m) {
                const double dj = (fp[m] - fm[m]) / (2.0 * h);
                acc += dj * dj;
            }
        }
        CHECK(diag[j] == doctest::Approx(acc).epsilon(1e-8));
    }
}

TEST_CASE("ggn diag: additive over dataset shards") {
    NetworkSpec spec;
    spec.input_dim = 2;
    spec.hidden = {4};
    spec.output_dim = 1;
    Params p = nn::init_params(spec, 30);
    std::mt19937_64 rng(31);
    Dataset all = random_dataset(spec, 10, rng);
    Dataset a, b;
    for (std::size_t k = 0; k < all.inputs.size(); ++k) {
        auto& dst = (k < 5) ? a : b;
        dst.inputs.push_back(all.inputs[k]);
        dst.targets.push_back(all.targets[k]);
    }
    const auto full = nn::last_layer_ggn_diag(spec, p, all);
    const auto da = nn::last_layer_ggn_diag(spec, p, a);
    const auto db = nn::last_layer_ggn_diag(spec, p, b);
    for (std::size_t j = 0; j < full.size(); ++j) {
        CHECK(full[j] == doctest::Approx(da[j] + db[j]).epsilon(1e-12));
        CHECK(full[j] >= 0.0);
    }
}

TEST_CASE("ggn diag: gaussian head is rejected") {
    NetworkSpec spec;
    spec.head = OutputHead::kGaussian;
    Params p = nn::init_params(spec, 1);
    Dataset d;
    d.inputs.push_back({0.5});
    d.targets.push_back({0.5});
    CHECK_THROWS_AS((void)nn::last_layer_ggn_diag(spec, p, d), std::invalid_argument);
}
