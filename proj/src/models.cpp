#include "sectorflow/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "sectorflow/rng.hpp"

namespace sectorflow::models {

namespace {

void check_count(int n) {
    if (n < 1) throw std::invalid_argument("sample count must be positive");
}

}  // namespace

std::vector<double> encode_context(const Context& ctx) {
    std::vector<double> xi;
    xi.reserve(3 + 2 * ctx.flight_plan.size());
    xi.push_back(ctx.entry_point.lat_deg);
    xi.push_back(ctx.entry_point.lon_deg);
    xi.push_back(ctx.entry_flight_level);
    for (const auto& w : ctx.flight_plan) {
        xi.push_back(w.lat_deg);
        xi.push_back(w.lon_deg);
    }
    return xi;
}

Context decode_context(std::span<const double> xi, std::size_t width) {
    if (xi.size() != 3 + 2 * width) {
        throw std::invalid_argument("decode_context: xi length does not match width");
    }
    Context ctx;
    ctx.entry_point = {xi[0], xi[1]};
    ctx.entry_flight_level = xi[2];
    ctx.flight_plan.reserve(width);
    for (std::size_t w = 0; w < width; ++w) {
        ctx.flight_plan.push_back({xi[3 + 2 * w], xi[4 + 2 * w]});
    }
    return ctx;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("fit_standardizer: no rows");
    const std::size_t dim = rows[0].size();
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.scale.assign(dim, 0.0);
    for (const auto& r : rows) {
        if (r.size() != dim) throw std::invalid_argument("fit_standardizer: ragged rows");
        for (std::size_t j = 0; j < dim; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = r[j] - s.mean[j];
            s.scale[j] += d * d;
        }
    }
    for (double& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(rows.size()));
        if (v < 1e-12) v = 1.0;  // constant dimensions pass through unscaled
    }
    return s;
}

std::vector<double> standardize(const Standardizer& s, std::span<const double> row) {
    if (row.size() != s.mean.size()) throw std::invalid_argument("standardize: wrong length");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - s.mean[j]) / s.scale[j];
    return out;
}

std::vector<double> destandardize(const Standardizer& s, std::span<const double> row) {
    if (row.size() != s.mean.size()) throw std::invalid_argument("destandardize: wrong length");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * s.scale[j] + s.mean[j];
    return out;
}

std::vector<trackfit::PiecewiseTrack> linear_sample(const Context& ctx, int n,
                                                    double sigma_jitter_deg,
                                                    std::uint64_t seed) {
    check_count(n);
    if (ctx.flight_plan.empty()) {
        throw std::invalid_argument("linear_sample: empty flight plan");
    }
    const geo::GcsPoint exit = ctx.flight_plan.back();
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<trackfit::PiecewiseTrack> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const double e_lat = sigma_jitter_deg * g(gen);
        const double e_lon = sigma_jitter_deg * g(gen);
        std::vector<geo::GcsPoint> cp{ctx.entry_point,
                                      {exit.lat_deg + e_lat, exit.lon_deg + e_lon}};
        out.push_back({cp, trackfit::arrival_times(cp)});
    }
    return out;
}

EnsemblePrediction combine_members(const std::vector<nn::Output>& outs) {
    if (outs.empty()) throw std::invalid_argument("combine_members: no members");
    const std::size_t dim = outs[0].mu.size();
    const double inv = 1.0 / static_cast<double>(outs.size());
    EnsemblePrediction pred;
    pred.mu.assign(dim, 0.0);
    pred.var.assign(dim, 0.0);
    pred.sigma.assign(dim, 0.0);
    for (const auto& o : outs) {
        if (o.mu.size() != dim || o.sigma.size() != dim) {
            throw std::invalid_argument("combine_members: member output size mismatch");
        }
    }
    for (std::size_t m = 0; m < dim; ++m) {
        double sum_mu = 0.0, sum_mu2 = 0.0, sum_var = 0.0;
        for (const auto& o : outs) {
            sum_mu += o.mu[m];
            sum_mu2 += o.mu[m] * o.mu[m];
            sum_var += o.sigma[m] * o.sigma[m];
        }
        const double mu_star = sum_mu * inv;
        double var_mu = sum_mu2 * inv - mu_star * mu_star;  // spread of member means
        if (var_mu < 0.0) var_mu = 0.0;                     // guard fp cancellation
        pred.mu[m] = mu_star;
        pred.var[m] = var_mu + sum_var * inv;
        pred.sigma[m] = std::sqrt(pred.var[m]);
    }
    return pred;
}

namespace {

std::vector<nn::Params> de_train_impl(const nn::Dataset& data, int n_e,
                                      const nn::NetworkSpec& spec, const nn::TrainConfig& cfg,
                                      bool parallel) {
    if (n_e < 2) throw std::invalid_argument("de_train: ensemble size must be >= 2");
    if (spec.head != nn::OutputHead::kGaussian) {
        throw std::invalid_argument("de_train: ensemble members need a gaussian head");
    }
    std::vector<nn::Params> members(static_cast<std::size_t>(n_e));
    std::vector<std::string> errors(static_cast<std::size_t>(n_e));
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int o = 0; o < n_e; ++o) {
        try {
            nn::TrainConfig c = cfg;
            c.seed = rng::mix(cfg.seed, static_cast<std::uint64_t>(o));
            members[static_cast<std::size_t>(o)] =
                nn::train(spec, data, c, nn::Loss::kNll).params;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(o)] = e.what();
        }
    }
    for (int o = 0; o < n_e; ++o) {
        if (!errors[static_cast<std::size_t>(o)].empty()) {
            throw std::runtime_error("de_train: member " + std::to_string(o) + " failed: " +
                                     errors[static_cast<std::size_t>(o)]);
        }
    }
    return members;
}

}  // namespace

std::vector<nn::Params> de_train(const nn::Dataset& data, int n_e, const nn::NetworkSpec& spec,
                                 const nn::TrainConfig& cfg) {
    return de_train_impl(data, n_e, spec, cfg, true);
}

std::vector<nn::Params> de_train_serial(const nn::Dataset& data, int n_e,
                                        const nn::NetworkSpec& spec,
                                        const nn::TrainConfig& cfg) {
    return de_train_impl(data, n_e, spec, cfg, false);
}

EnsemblePrediction de_predict(const EnsembleModel& m, std::span<const double> xi_std) {
    if (m.members.empty()) throw std::invalid_argument("de_predict: untrained ensemble");
    std::vector<nn::Output> outs;
    outs.reserve(m.members.size());
    for (const auto& p : m.members) outs.push_back(nn::forward(m.spec, p, xi_std));
    return combine_members(outs);
}

std::vector<std::vector<double>> de_sample(const EnsembleModel& m, const Context& ctx, int n,
                                           std::uint64_t seed) {
    check_count(n);
    const auto xi = standardize(m.features, encode_context(ctx));
    const auto pred = de_predict(m, xi);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<double> z(pred.mu.size());
    for (int s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < z.size(); ++j) {
            z[j] = pred.mu[j] + pred.sigma[j] * g(gen);  // i.i.d. per coordinate
        }
        out.push_back(destandardize(m.targets, z));
    }
    return out;
}

LaplacePosterior bnn_fit(const nn::Dataset& data, const nn::NetworkSpec& spec,
                         const nn::TrainConfig& cfg, double prior_precision) {
    if (spec.head != nn::OutputHead::kPoint) {
        throw std::invalid_argument("bnn_fit: point head required for the MAP network");
    }
    if (!(prior_precision > 0.0)) {
        throw std::invalid_argument("bnn_fit: prior precision must be positive");
    }
    LaplacePosterior post;
    post.spec = spec;
    post.theta_map = nn::train(spec, data, cfg, nn::Loss::kL2).params;
    const auto ggn = nn::last_layer_ggn_diag(spec, post.theta_map, data);
    post.last_layer_var.resize(ggn.size());
    for (std::size_t j = 0; j < ggn.size(); ++j) {
        post.last_layer_var[j] = 1.0 / (ggn[j] + prior_precision);
    }
    post.prior_precision = prior_precision;
    return post;
}

std::vector<std::vector<double>> bnn_sample_std(const LaplacePosterior& post,
                                                std::span<const double> xi_std, int n,
                                                std::uint64_t seed) {
    check_count(n);
    const auto lay = nn::make_layout(post.spec);
    const auto& last = lay.layers.back();
    const std::size_t n_last = static_cast<std::size_t>(last.in) * last.out + last.out;
    if (post.last_layer_var.size() != n_last) {
        throw std::invalid_argument("bnn_sample: posterior variance size mismatch");
    }
    const auto h = nn::last_hidden(post.spec, post.theta_map, xi_std);

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> draw(n_last);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    const double* map = post.theta_map.theta.data() + last.w_off;
    for (int s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < n_last; ++j) {
            draw[j] = map[j] + std::sqrt(post.last_layer_var[j]) * g(gen);
        }
        std::vector<double> y(static_cast<std::size_t>(last.out));
        for (int m = 0; m < last.out; ++m) {
            // same accumulation order as the forward pass: bias first
            double acc = draw[static_cast<std::size_t>(last.in) * last.out + m];
            const double* row = draw.data() + static_cast<std::size_t>(m) * last.in;
            for (int i = 0; i < last.in; ++i) acc += row[i] * h[static_cast<std::size_t>(i)];
            y[static_cast<std::size_t>(m)] = acc;
        }
        out.push_back(std::move(y));
    }
    return out;
}

std::vector<std::vector<double>> bnn_sample(const BnnModel& m, const Context& ctx, int n,
                                            std::uint64_t seed) {
    const auto xi = standardize(m.features, encode_context(ctx));
    auto draws = bnn_sample_std(m.posterior, xi, n, seed);
    for (auto& y : draws) y = destandardize(m.targets, y);
    return draws;
}

trackfit::PiecewiseTrack finalize_track(const Context& ctx, std::span<const double> y) {
    if (y.empty() || y.size() % 2 != 0) {
        throw std::invalid_argument("finalize_track: target vector must hold (lat, lon) pairs");
    }
    std::vector<geo::GcsPoint> cp;
    cp.reserve(1 + y.size() / 2);
    cp.push_back(ctx.entry_point);
    for (std::size_t i = 0; i < y.size(); i += 2) {
        cp.push_back({y[i], y[i + 1]});
    }
    return {cp, trackfit::arrival_times(cp)};
}

std::vector<trackfit::PiecewiseTrack> sample_tracks(const EnsembleModel& m, const Context& ctx,
                                                    int n, std::uint64_t seed) {
    const auto ys = de_sample(m, ctx, n, seed);
    std::vector<trackfit::PiecewiseTrack> out;
    out.reserve(ys.size());
    for (const auto& y : ys) out.push_back(finalize_track(ctx, y));
    return out;
}

std::vector<trackfit::PiecewiseTrack> sample_tracks(const BnnModel& m, const Context& ctx,
                                                    int n, std::uint64_t seed) {
    const auto ys = bnn_sample(m, ctx, n, seed);
    std::vector<trackfit::PiecewiseTrack> out;
    out.reserve(ys.size());
    for (const auto& y : ys) out.push_back(finalize_track(ctx, y));
    return out;
}

}  // namespace sectorflow::models
