#include "sectorflow/trackfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sectorflow/rng.hpp"

namespace sectorflow::trackfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Legs shorter than ~18 m are treated as zero-length when accumulating turn
// angle: they are far below radar resolution and their bearings are numerical
// noise (exact straight-line fits can park control points arbitrarily close).
constexpr double kZeroLegNm = 1e-2;

void validate_track(const Track& x) {
    if (x.points.size() != x.times_sec.size() || x.points.size() < 2) {
        throw std::invalid_argument("track: need matching points/times with at least two samples");
    }
    if (x.times_sec.front() != 0.0) {
        throw std::invalid_argument("track: times must start at zero");
    }
    for (std::size_t j = 1; j < x.times_sec.size(); ++j) {
        if (!(x.times_sec[j] > x.times_sec[j - 1])) {
            throw std::invalid_argument("track: times must be strictly increasing");
        }
    }
}

// Arc-length-proportional knots; returns false when the total leg length is
// zero. Shared by arrival_times and the fit objective so both produce
// bit-identical knots.
bool knots_into(std::span<const geo::GcsPoint> p, std::vector<double>& out) {
    out.resize(p.size());
    out[0] = 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        out[i] = geo::haversine_nm(p[i - 1], p[i]);
        total += out[i];
    }
    if (!(total > 0.0)) return false;
    double cum = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        cum += out[i];
        out[i] = cum / total;
    }
    out.back() = 1.0;
    return true;
}

// Linear interpolation on segment [k, k+1]; exact at both knots.
geo::GcsPoint lerp_segment(std::span<const geo::GcsPoint> p, const std::vector<double>& knots,
                           std::size_t k, double t) {
    const double lo = knots[k], hi = knots[k + 1];
    if (t == lo) return p[k];
    if (t == hi) return p[k + 1];
    const double u = (t - lo) / (hi - lo);
    return {p[k].lat_deg + u * (p[k + 1].lat_deg - p[k].lat_deg),
            p[k].lon_deg + u * (p[k + 1].lon_deg - p[k].lon_deg)};
}

double turn_angle_impl(std::span<const geo::GcsPoint> p) {
    double turn = 0.0;
    double prev_bearing = 0.0;
    bool have_prev = false;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (geo::haversine_nm(p[i - 1], p[i]) < kZeroLegNm) continue;  // skip zero-length legs
        const double b = geo::initial_bearing_deg(p[i - 1], p[i]);
        if (have_prev) turn += std::abs(std::remainder(b - prev_bearing, 360.0));
        prev_bearing = b;
        have_prev = true;
    }
    return turn;
}

// Reusable objective evaluator: caches normalized observation times and
// scratch storage so repeated calls during optimization do not allocate.
class CostEval {
public:
    CostEval(const Track& x, double lambda, double phi_u_deg)
        : x_(x), lambda_(lambda), phi_u_(phi_u_deg) {
        const double tn = x.times_sec.back();
        ts_.reserve(x.times_sec.size());
        for (double tau : x.times_sec) ts_.push_back(tau / tn);
        ts_.back() = 1.0;
    }

    double operator()(std::span<const geo::GcsPoint> p) {
        if (!knots_into(p, knots_)) return kInf;
        double data = 0.0;
        std::size_t k = 0;
        for (std::size_t j = 0; j < ts_.size(); ++j) {
            const double t = ts_[j];
            while (k + 2 < p.size() && knots_[k + 1] < t) ++k;
            const auto hat = lerp_segment(p, knots_, k, t);
            const double dlat = x_.points[j].lat_deg - hat.lat_deg;
            const double dlon = x_.points[j].lon_deg - hat.lon_deg;
            data += dlat * dlat + dlon * dlon;
        }
        if (lambda_ != 0.0 && turn_angle_impl(p) > phi_u_) data += lambda_;
        return data;
    }

private:
    const Track& x_;
    double lambda_, phi_u_;
    std::vector<double> ts_;
    std::vector<double> knots_;
};

struct NmOutcome {
    std::vector<double> best_x;
    double best_f = kInf;
    bool converged = false;
};

// Nelder-Mead with deterministic rebuild-on-collapse: whenever the simplex
// contracts below a fraction of the current step, it is rebuilt around the
// best point with a 10x smaller step, down to a 1e-9 floor. The evaluation
// sequence depends only on the start point, so a larger budget extends (never
// reorders) the sequence and best-so-far is monotone in the budget.
template <class F>
NmOutcome nelder_mead(F&& f, std::vector<double> x0, double step0, long budget) {
    const std::size_t n = x0.size();
    NmOutcome out;
    long evals = 0;

    std::vector<std::vector<double>> sx(n + 1);
    std::vector<double> sf(n + 1);
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xx(n);

    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        if (v < out.best_f) {
            out.best_f = v;
            out.best_x = x;
        }
        return v;
    };

    double step = step0;
    auto build = [&](const std::vector<double>& center) {
        for (std::size_t i = 0; i <= n; ++i) {
            sx[i] = center;
            if (i > 0) sx[i][i - 1] += step;
            sf[i] = eval(sx[i]);
        }
    };

    build(x0);
    while (evals < budget) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return sf[a] < sf[b]; });

        // collapse check: coordinate spread relative to the current step
        double spread = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                spread = std::max(spread, std::abs(sx[order[i]][j] - sx[order[0]][j]));
            }
        }
        if (spread <= step * 1e-3) {
            if (step <= 1.0000001e-9) {
                out.converged = true;
                break;
            }
            step *= 0.1;
            build(out.best_x);
            continue;
        }

        const std::size_t ib = order[0], is = order[n - 1], iw = order[n];
        for (std::size_t j = 0; j < n; ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i <= n; ++i) {
                if (i != iw) c += sx[i][j];
            }
            centroid[j] = c / static_cast<double>(n);
        }

        for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - sx[iw][j]);
        const double fr = eval(xr);

        if (fr < sf[ib]) {
            for (std::size_t j = 0; j < n; ++j) xx[j] = centroid[j] + 2.0 * (centroid[j] - sx[iw][j]);
            const double fe = eval(xx);
            if (fe < fr) {
                sx[iw] = xx;
                sf[iw] = fe;
            } else {
                sx[iw] = xr;
                sf[iw] = fr;
            }
        } else if (fr < sf[is]) {
            sx[iw] = xr;
            sf[iw] = fr;
        } else {
            bool shrink = false;
            if (fr < sf[iw]) {  // outside contraction
                for (std::size_t j = 0; j < n; ++j) xx[j] = centroid[j] + 0.5 * (xr[j] - centroid[j]);
                const double fc = eval(xx);
                if (fc <= fr) {
                    sx[iw] = xx;
                    sf[iw] = fc;
                } else {
                    shrink = true;
                }
            } else {  // inside contraction
                for (std::size_t j = 0; j < n; ++j) xx[j] = centroid[j] + 0.5 * (sx[iw][j] - centroid[j]);
                const double fc = eval(xx);
                if (fc < sf[iw]) {
                    sx[iw] = xx;
                    sf[iw] = fc;
                } else {
                    shrink = true;
                }
            }
            if (shrink) {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == ib) continue;
                    for (std::size_t j = 0; j < n; ++j) {
                        sx[i][j] = sx[ib][j] + 0.5 * (sx[i][j] - sx[ib][j]);
                    }
                    sf[i] = eval(sx[i]);
                }
            }
        }
    }
    return out;
}

std::vector<FitResult> fit_many(const std::vector<Track>& tracks, const FitConfig& cfg,
                                bool parallel) {
    std::vector<FitResult> out(tracks.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tracks.size()); ++i) {
        try {
            FitConfig c = cfg;
            c.seed = rng::mix(cfg.seed, static_cast<std::uint64_t>(i));
            out[i] = fit(tracks[i], c);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

}  // namespace

std::vector<double> arrival_times(std::span<const geo::GcsPoint> control_points) {
    if (control_points.size() < 2) {
        throw std::invalid_argument("arrival_times: need at least two control points");
    }
    std::vector<double> t;
    if (!knots_into(control_points, t)) {
        throw std::invalid_argument("arrival_times: degenerate track, total leg length is zero");
    }
    return t;
}

geo::GcsPoint interpolate(const PiecewiseTrack& pt, double t) {
    const auto& p = pt.control_points;
    const auto& knots = pt.arrival_times;
    if (p.size() != knots.size() || p.size() < 2) {
        throw std::invalid_argument("interpolate: malformed piecewise track");
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::out_of_range("interpolate: t outside [0, 1]");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (t == knots[i]) return p[i];  // knots return control points bit-exactly
    }
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - knots.begin()) - 1;
    return lerp_segment(p, knots, k, t);
}

std::vector<std::pair<double, geo::GcsPoint>> resample(const Track& track, int m) {
    validate_track(track);
    if (m < 2) throw std::invalid_argument("resample: need at least two samples");
    const double tn = track.times_sec.back();
    std::vector<double> s(track.times_sec.size());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = track.times_sec[j] / tn;
    s.back() = 1.0;

    std::vector<std::pair<double, geo::GcsPoint>> out;
    out.reserve(static_cast<std::size_t>(m));
    std::size_t k = 0;
    for (int i = 0; i < m; ++i) {
        const double t = (i == m - 1) ? 1.0 : static_cast<double>(i) / (m - 1);
        while (k + 2 < s.size() && s[k + 1] < t) ++k;
        geo::GcsPoint p;
        if (t == s[k]) {
            p = track.points[k];
        } else if (t == s[k + 1]) {
            p = track.points[k + 1];
        } else {
            const double u = (t - s[k]) / (s[k + 1] - s[k]);
            p = {track.points[k].lat_deg + u * (track.points[k + 1].lat_deg - track.points[k].lat_deg),
                 track.points[k].lon_deg + u * (track.points[k + 1].lon_deg - track.points[k].lon_deg)};
        }
        out.emplace_back(t, p);
    }
    return out;
}

double total_turn_angle_deg(std::span<const geo::GcsPoint> control_points) {
    if (control_points.size() < 2) {
        throw std::invalid_argument("total_turn_angle_deg: need at least two control points");
    }
    return turn_angle_impl(control_points);
}

double cost(std::span<const geo::GcsPoint> control_points, const Track& track,
            const FitConfig& cfg) {
    validate_track(track);
    if (control_points.size() != static_cast<std::size_t>(cfg.degree) + 1) {
        throw std::invalid_argument("cost: control point count must be degree + 1");
    }
    const auto& x0 = track.points.front();
    if (control_points[0].lat_deg != x0.lat_deg || control_points[0].lon_deg != x0.lon_deg) {
        throw std::invalid_argument("cost: control points must be anchored at the first observation");
    }
    CostEval eval(track, cfg.lambda, cfg.phi_u_deg);
    return eval(control_points);
}

FitResult fit(const Track& track, const FitConfig& cfg) {
    validate_track(track);
    const int d = cfg.degree;
    if (d < 1) throw std::invalid_argument("fit: degree must be >= 1");
    if (static_cast<int>(track.points.size()) < d + 2) {
        throw std::invalid_argument("fit: need at least degree + 2 observations");
    }
    if (cfg.restarts < 1 || cfg.budget < 1) {
        throw std::invalid_argument("fit: restarts and budget must be positive");
    }

    // Arc-length table over the resampled track for the warm start.
    const auto rs = resample(track, std::max(cfg.resample_count, d + 2));
    std::vector<double> arc(rs.size(), 0.0);
    for (std::size_t j = 1; j < rs.size(); ++j) {
        arc[j] = arc[j - 1] + geo::haversine_nm(rs[j - 1].second, rs[j].second);
    }
    const double total_arc = arc.back();
    if (!(total_arc > 0.0)) {
        throw std::invalid_argument("fit: degenerate track, zero path length");
    }
    auto at_arc_fraction = [&](double f) -> geo::GcsPoint {
        const double target = f * total_arc;
        const auto it = std::upper_bound(arc.begin(), arc.end(), target);
        std::size_t k = std::min(static_cast<std::size_t>(it - arc.begin()),
                                 arc.size() - 1);
        if (k == 0) k = 1;
        const double span = arc[k] - arc[k - 1];
        const double u = span > 0.0 ? (target - arc[k - 1]) / span : 0.0;
        const auto& a = rs[k - 1].second;
        const auto& b = rs[k].second;
        return {a.lat_deg + u * (b.lat_deg - a.lat_deg), a.lon_deg + u * (b.lon_deg - a.lon_deg)};
    };

    const geo::GcsPoint anchor = track.points.front();
    const geo::GcsPoint last = track.points.back();
    std::vector<double> warm(2 * static_cast<std::size_t>(d));
    std::vector<double> chord(2 * static_cast<std::size_t>(d));
    for (int i = 1; i <= d; ++i) {
        const double f = static_cast<double>(i) / d;
        const auto p = at_arc_fraction(f);
        warm[2 * (i - 1)] = p.lat_deg;
        warm[2 * (i - 1) + 1] = p.lon_deg;
        // zero-turn start along the straight chord, so a feasible basin exists
        // even when the data path itself violates the turn budget
        chord[2 * (i - 1)] = anchor.lat_deg + f * (last.lat_deg - anchor.lat_deg);
        chord[2 * (i - 1) + 1] = anchor.lon_deg + f * (geo::normalize_lon(last.lon_deg - anchor.lon_deg));
    }

    CostEval eval_cost(track, cfg.lambda, cfg.phi_u_deg);
    std::vector<geo::GcsPoint> pbuf(static_cast<std::size_t>(d) + 1);
    pbuf[0] = anchor;
    auto objective = [&](const std::vector<double>& x) {
        for (int i = 0; i < d; ++i) {
            pbuf[static_cast<std::size_t>(i) + 1] = {x[2 * static_cast<std::size_t>(i)],
                                                     x[2 * static_cast<std::size_t>(i) + 1]};
        }
        return eval_cost(pbuf);
    };

    NmOutcome best;
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<double> x0 = (r == 1) ? chord : warm;
        if (r >= 2) {
            std::mt19937_64 gen(rng::mix(cfg.seed, static_cast<std::uint64_t>(r)));
            std::normal_distribution<double> jitter(0.0, 0.01);
            for (double& v : x0) v += jitter(gen);
        }
        auto nm = nelder_mead(objective, std::move(x0), 0.05, cfg.budget);
        if (nm.best_f < best.best_f) best = std::move(nm);
    }

    FitResult result;
    result.objective = best.best_f;
    result.converged = best.converged;
    auto& cp = result.track.control_points;
    cp.resize(static_cast<std::size_t>(d) + 1);
    cp[0] = anchor;
    for (int i = 0; i < d; ++i) {
        cp[static_cast<std::size_t>(i) + 1] = {best.best_x[2 * static_cast<std::size_t>(i)],
                                               best.best_x[2 * static_cast<std::size_t>(i) + 1]};
    }
    result.track.arrival_times = arrival_times(cp);
    return result;
}

Calibration calibrate(const std::vector<Track>& tracks, const FitConfig& cfg) {
    if (tracks.empty()) throw std::invalid_argument("calibrate: empty track collection");
    FitConfig prelim = cfg;
    prelim.lambda = 0.0;  // preliminary fits are unpenalized
    const auto fits = fit_many(tracks, prelim, true);

    std::vector<double> misfits;
    misfits.reserve(fits.size());
    double max_turn = 0.0;
    for (const auto& f : fits) {
        misfits.push_back(f.objective);
        max_turn = std::max(max_turn, total_turn_angle_deg(f.track.control_points));
    }
    std::sort(misfits.begin(), misfits.end());
    const std::size_t n = misfits.size();
    const double median = (n % 2 == 1) ? misfits[n / 2]
                                       : 0.5 * (misfits[n / 2 - 1] + misfits[n / 2]);
    Calibration cal;
    cal.lambda = std::max(10.0 * median, 1e-6);  // keep the penalty weight positive
    cal.phi_u_deg = std::max(max_turn, 5.0);
    return cal;
}

std::vector<FitResult> fit_corpus(const std::vector<Track>& tracks, const FitConfig& cfg) {
    return fit_many(tracks, cfg, true);
}

std::vector<FitResult> fit_corpus_serial(const std::vector<Track>& tracks, const FitConfig& cfg) {
    return fit_many(tracks, cfg, false);
}

}  // namespace sectorflow::trackfit
