#include "sectorflow/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <variant>

#include <json.hpp>

#include "sectorflow/csvio.hpp"
#include "sectorflow/models.hpp"
#include "sectorflow/rng.hpp"

namespace sectorflow::pipeline {

using json = nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

nn::Activation parse_activation(const std::string& name) {
    if (name == "tanh") return nn::Activation::kTanh;
    if (name == "relu") return nn::Activation::kRelu;
    throw std::invalid_argument("unknown activation: '" + name + "'");
}

}  // namespace

// --- sector geometry file -------------------------------------------------

void write_sector(const std::string& path, const data::SectorGeometry& sector) {
    json j;
    j["boundary"] = json::array();
    for (const auto& p : sector.boundary) j["boundary"].push_back({p.lat_deg, p.lon_deg});
    j["buffer_nm"] = sector.buffer_nm;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

data::SectorGeometry load_sector(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open sector file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": invalid JSON: " + e.what());
    }
    data::SectorGeometry sector;
    if (!j.contains("boundary") || !j["boundary"].is_array())
        throw std::runtime_error(path + ": missing boundary array");
    for (const auto& v : j["boundary"]) {
        if (!v.is_array() || v.size() != 2)
            throw std::runtime_error(path + ": boundary vertices must be [lat, lon]");
        sector.boundary.push_back({v[0].get<double>(), v[1].get<double>()});
    }
    if (sector.boundary.size() < 3) throw std::runtime_error(path + ": boundary needs >= 3 vertices");
    sector.buffer_nm = j.value("buffer_nm", 50.0);
    return sector;
}

// --- pairs file -----------------------------------------------------------

void write_pairs(const std::string& path, const data::SplitDataset& split) {
    const data::Pair* first = !split.train.empty()  ? &split.train.front()
                              : !split.test.empty() ? &split.test.front()
                                                    : nullptr;
    const std::size_t n_xi = first ? first->xi.size() : 0;
    const std::size_t n_y = first ? first->y.size() : 0;

    auto out = open_out(path);
    out << "flight_id,route_id,split";
    for (std::size_t i = 0; i < n_xi; ++i) out << ",xi" << i;
    for (std::size_t i = 0; i < n_y; ++i) out << ",y" << i;
    out << "\n";

    auto emit = [&](const std::vector<data::Pair>& pairs, const char* tag) {
        for (const auto& p : pairs) {
            if (p.xi.size() != n_xi || p.y.size() != n_y)
                throw std::invalid_argument("inconsistent pair dimensions for flight '" +
                                            p.flight_id + "'");
            out << p.flight_id << ',' << p.route_id << ',' << tag;
            for (double v : p.xi) out << ',' << csvio::fmt_double(v);
            for (double v : p.y) out << ',' << csvio::fmt_double(v);
            out << "\n";
        }
    };
    emit(split.train, "train");
    emit(split.test, "test");
}

PairsFile read_pairs(const std::string& path) {
    const auto lines = csvio::read_lines(path);
    if (lines.empty()) throw std::runtime_error(path + ": empty pairs file");

    const auto header = csvio::split_csv(lines[0]);
    if (header.size() < 3 || header[0] != "flight_id" || header[1] != "route_id" ||
        header[2] != "split")
        throw std::runtime_error(path + ": unexpected pairs header");
    std::size_t n_xi = 0;
    std::size_t n_y = 0;
    std::size_t col = 3;
    while (col < header.size() && header[col] == "xi" + std::to_string(n_xi)) {
        ++n_xi;
        ++col;
    }
    while (col < header.size() && header[col] == "y" + std::to_string(n_y)) {
        ++n_y;
        ++col;
    }
    if (col != header.size())
        throw std::runtime_error(path + ": unexpected pairs column '" + std::string(header[col]) +
                                 "'");
    if (n_xi != 0 || n_y != 0) {
        if (n_xi < 5 || n_xi % 2 == 0)
            throw std::runtime_error(path + ": xi column count must be 3 + 2W");
        if (n_y < 2 || n_y % 2 != 0)
            throw std::runtime_error(path + ": y column count must be 2d");
    }

    PairsFile pf;
    pf.plan_width = n_xi == 0 ? 0 : (n_xi - 3) / 2;
    pf.degree = static_cast<int>(n_y / 2);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = csvio::split_csv(lines[li]);
        const std::string where = path + ":" + std::to_string(li + 1);
        if (f.size() != 3 + n_xi + n_y)
            throw std::runtime_error(where + ": expected " + std::to_string(3 + n_xi + n_y) +
                                     " fields, got " + std::to_string(f.size()));
        data::Pair p;
        p.flight_id = std::string(f[0]);
        p.route_id = std::string(f[1]);
        try {
            for (std::size_t i = 0; i < n_xi; ++i) p.xi.push_back(csvio::parse_double(f[3 + i]));
            for (std::size_t i = 0; i < n_y; ++i)
                p.y.push_back(csvio::parse_double(f[3 + n_xi + i]));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        if (f[2] == "train")
            pf.split.train.push_back(std::move(p));
        else if (f[2] == "test")
            pf.split.test.push_back(std::move(p));
        else
            throw std::runtime_error(where + ": split must be train or test, got '" +
                                     std::string(f[2]) + "'");
    }
    return pf;
}

// --- generated-track file -------------------------------------------------

void write_generated(const std::string& path, const std::vector<GeneratedTrack>& tracks) {
    auto out = open_out(path);
    out << "route_id,context_flight_id,sample_idx,t_norm,lat_deg,lon_deg\n";
    for (const auto& tr : tracks) {
        const std::size_t m = tr.points.size();
        if (m < 2)
            throw std::invalid_argument("generated track for context '" + tr.context_flight_id +
                                        "' has fewer than 2 points");
        for (std::size_t k = 0; k < m; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(m - 1);
            out << tr.route_id << ',' << tr.context_flight_id << ',' << tr.sample_idx << ','
                << csvio::fmt_double(t) << ',' << csvio::fmt_double(tr.points[k].lat_deg) << ','
                << csvio::fmt_double(tr.points[k].lon_deg) << "\n";
        }
    }
}

std::vector<GeneratedTrack> read_generated(const std::string& path) {
    const auto lines = csvio::read_lines(path);
    if (lines.empty() || lines[0] != "route_id,context_flight_id,sample_idx,t_norm,lat_deg,lon_deg")
        throw std::runtime_error(path + ": unexpected generated-track header");

    std::vector<GeneratedTrack> tracks;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = csvio::split_csv(lines[li]);
        const std::string where = path + ":" + std::to_string(li + 1);
        if (f.size() != 6)
            throw std::runtime_error(where + ": expected 6 fields, got " +
                                     std::to_string(f.size()));
        try {
            const int sample_idx = static_cast<int>(csvio::parse_int(f[2]));
            const geo::GcsPoint p{csvio::parse_double(f[4]), csvio::parse_double(f[5])};
            csvio::parse_double(f[3]);  // t_norm: validated, implied by row order
            const bool fresh = tracks.empty() || tracks.back().route_id != f[0] ||
                               tracks.back().context_flight_id != f[1] ||
                               tracks.back().sample_idx != sample_idx;
            if (fresh) {
                auto key = std::make_tuple(std::string(f[0]), std::string(f[1]), sample_idx);
                if (!seen.insert(key).second)
                    throw std::runtime_error("rows for sample " + std::to_string(sample_idx) +
                                             " of context '" + std::string(f[1]) +
                                             "' are not contiguous");
                GeneratedTrack tr;
                tr.route_id = std::string(f[0]);
                tr.context_flight_id = std::string(f[1]);
                tr.sample_idx = sample_idx;
                tracks.push_back(std::move(tr));
            }
            tracks.back().points.push_back(p);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(where + ": " + e.what());
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
    }
    for (const auto& tr : tracks)
        if (tr.points.size() < 2)
            throw std::runtime_error(path + ": sample " + std::to_string(tr.sample_idx) +
                                     " of context '" + tr.context_flight_id +
                                     "' has fewer than 2 points");
    return tracks;
}

// --- stages ---------------------------------------------------------------

void run_synth(const std::string& scenario_path, int n_flights, std::uint64_t seed,
               const std::string& out_dir, std::ostream& log) {
    const auto scenario = scenario_path.empty()
                              ? data::parse_scenario(data::default_scenario_json())
                              : data::load_scenario(scenario_path);
    const auto result = data::synth_sector(scenario, n_flights, seed);
    std::filesystem::create_directories(out_dir);
    data::write_tracks(out_dir + "/tracks.csv", result.records);
    data::write_plans(out_dir + "/plans.csv", result.records);
    write_sector(out_dir + "/sector.json", result.sector);
    log << "synth: wrote " << result.records.size() << " flights to " << out_dir << "\n";
}

void run_fit(const std::string& tracks_path, const std::string& plans_path,
             const std::string& pairs_out, const PipelineConfig& cfg, std::ostream& log) {
    auto records = data::ingest(tracks_path, plans_path);
    if (records.empty()) {
        write_pairs(pairs_out, {});
        log << "fit: empty corpus, wrote header-only pairs file\n";
        return;
    }
    const auto groups = data::group_routes(std::move(records), cfg.top_k);

    std::vector<trackfit::Track> all_tracks;
    for (const auto& g : groups)
        for (const auto& r : g.members) all_tracks.push_back(r.track);

    trackfit::FitConfig fit_cfg = cfg.fit;
    if (cfg.auto_calibrate) {
        const auto cal = trackfit::calibrate(all_tracks, fit_cfg);
        fit_cfg.lambda = cal.lambda;
        fit_cfg.phi_u_deg = cal.phi_u_deg;
        log << "fit: calibrated lambda=" << csvio::fmt_double(cal.lambda)
            << " phi_u_deg=" << csvio::fmt_double(cal.phi_u_deg) << "\n";
    }

    data::PairConfig pc;
    pc.fit = fit_cfg;
    pc.plan_width = cfg.plan_width;
    pc.fraction = cfg.train_fraction;
    pc.split_seed = cfg.split_seed;
    pc.parallel = cfg.parallel;
    const auto split = data::build_pairs(groups, pc, &log);
    write_pairs(pairs_out, split);
    log << "fit: " << groups.size() << " routes, " << split.train.size() << " train / "
        << split.test.size() << " test pairs -> " << pairs_out << "\n";
}

void run_train(const std::string& pairs_path, const std::string& model_out,
               const PipelineConfig& cfg, std::ostream& log) {
    const auto pf = read_pairs(pairs_path);
    model_io::AnyModel model;
    if (cfg.model_kind == "linear") {
        model = model_io::LinearModelFile{cfg.sigma_jitter_deg};
    } else if (cfg.model_kind == "de" || cfg.model_kind == "bnn") {
        const auto std_split = data::standardize_pairs(pf.split);
        nn::NetworkSpec spec;
        spec.input_dim = static_cast<int>(3 + 2 * pf.plan_width);
        spec.hidden = cfg.hidden;
        spec.activation = parse_activation(cfg.activation);
        spec.output_dim = 2 * pf.degree;
        if (cfg.model_kind == "de") {
            spec.head = nn::OutputHead::kGaussian;
            models::EnsembleModel em;
            em.degree = pf.degree;
            em.spec = spec;
            em.members = cfg.parallel
                             ? models::de_train(std_split.train, cfg.n_members, spec, cfg.train)
                             : models::de_train_serial(std_split.train, cfg.n_members, spec,
                                                       cfg.train);
            em.features = std_split.features;
            em.targets = std_split.targets;
            model = std::move(em);
        } else {
            spec.head = nn::OutputHead::kPoint;
            models::BnnModel bm;
            bm.degree = pf.degree;
            bm.posterior = models::bnn_fit(std_split.train, spec, cfg.train, cfg.prior_precision);
            bm.features = std_split.features;
            bm.targets = std_split.targets;
            model = std::move(bm);
        }
    } else {
        throw std::invalid_argument("unknown model kind: '" + cfg.model_kind + "'");
    }
    model_io::save_model(model_out, model);
    log << "train: " << cfg.model_kind << " model on " << pf.split.train.size()
        << " train pairs -> " << model_out << "\n";
}

std::vector<GeneratedTrack> generate_tracks(const model_io::AnyModel& model,
                                            const PairsFile& pairs, const PipelineConfig& cfg) {
    std::vector<GeneratedTrack> out;
    const auto& test = pairs.split.test;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& pr = test[i];
        const auto ctx = models::decode_context(pr.xi, pairs.plan_width);
        const std::uint64_t seed = rng::mix(cfg.sample_seed, i);
        const int n = cfg.samples_per_context;
        std::vector<trackfit::PiecewiseTrack> samples;
        if (const auto* lm = std::get_if<model_io::LinearModelFile>(&model))
            samples = models::linear_sample(ctx, n, lm->sigma_jitter_deg, seed);
        else if (const auto* de = std::get_if<models::EnsembleModel>(&model))
            samples = models::sample_tracks(*de, ctx, n, seed);
        else
            samples = models::sample_tracks(std::get<models::BnnModel>(model), ctx, n, seed);
        for (int j = 0; j < n; ++j) {
            GeneratedTrack tr;
            tr.route_id = pr.route_id;
            tr.context_flight_id = pr.flight_id;
            tr.sample_idx = j;
            tr.points = eval::resample_track(samples[j], cfg.resample_count);
            out.push_back(std::move(tr));
        }
    }
    return out;
}

void run_generate(const std::string& model_path, const std::string& pairs_path,
                  const std::string& gen_out, const PipelineConfig& cfg, std::ostream& log) {
    const auto model = model_io::load_model(model_path);
    const auto pairs = read_pairs(pairs_path);
    const auto tracks = generate_tracks(model, pairs, cfg);
    write_generated(gen_out, tracks);
    log << "generate: " << model_io::model_kind(model) << " model, " << tracks.size()
        << " tracks for " << pairs.split.test.size() << " test contexts -> " << gen_out << "\n";
}

// --- evaluation -----------------------------------------------------------

std::vector<RouteReport> evaluate_routes(
    const std::vector<data::RouteGroup>& groups, const std::set<std::string>& test_ids,
    const data::SectorGeometry& sector,
    const std::vector<std::pair<std::string, std::vector<GeneratedTrack>>>& generated,
    const PipelineConfig& cfg) {
    std::vector<RouteReport> reports;
    for (const auto& g : groups) {
        const auto plane = eval::build_plane(g.canonical_plan, sector, cfg.half_width_nm);

        std::vector<std::vector<geo::GcsPoint>> test_tracks;
        for (const auto& r : g.members)
            if (test_ids.count(r.flight_id)) test_tracks.push_back(r.track.points);

        RouteReport rep;
        rep.route_id = g.route_id;
        rep.test_stats = cfg.parallel ? eval::crossing_stats(test_tracks, plane)
                                      : eval::crossing_stats_serial(test_tracks, plane);

        for (const auto& [name, tracks] : generated) {
            std::vector<std::vector<geo::GcsPoint>> gen_tracks;
            for (const auto& tr : tracks)
                if (tr.route_id == g.route_id) gen_tracks.push_back(tr.points);
            ModelEval me;
            me.model = name;
            me.stats = cfg.parallel ? eval::crossing_stats(gen_tracks, plane)
                                    : eval::crossing_stats_serial(gen_tracks, plane);
            try {
                me.comparison = eval::compare_route(rep.test_stats, me.stats, g.route_id);
            } catch (const std::runtime_error&) {
                me.comparison = std::nullopt;  // one side never crossed the plane
            }
            rep.models.push_back(std::move(me));
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

namespace {

const std::vector<std::string> kReportColumns = {"linear", "de", "bnn"};
const std::vector<std::string> kReportMetrics = {"ks_dh",          "ks_sinphi",
                                                 "dmean_dh_pct",   "dmean_sinphi_pct",
                                                 "crossing_rate",  "crossing_rate_test"};

const ModelEval* find_model(const RouteReport& rep, const std::string& name) {
    for (const auto& me : rep.models)
        if (me.model == name) return &me;
    return nullptr;
}

std::string report_cell(const RouteReport& rep, const ModelEval* me, const std::string& metric) {
    if (me == nullptr) return "";
    if (metric == "crossing_rate") return csvio::fmt_double(me->stats.crossing_rate());
    if (metric == "crossing_rate_test") return csvio::fmt_double(rep.test_stats.crossing_rate());
    if (!me->comparison) return "undefined";
    const auto& c = *me->comparison;
    if (metric == "ks_dh") return csvio::fmt_double(c.ks_dh);
    if (metric == "ks_sinphi") return csvio::fmt_double(c.ks_sinphi);
    const auto& opt = metric == "dmean_dh_pct" ? c.dmean_dh_pct : c.dmean_sinphi_pct;
    return opt ? csvio::fmt_double(*opt) : "undefined";
}

}  // namespace

void write_report(const std::string& path, const std::vector<RouteReport>& reports) {
    auto out = open_out(path);
    out << "route_id,metric";
    for (const auto& col : kReportColumns) out << ',' << col;
    out << "\n";
    for (const auto& rep : reports) {
        for (const auto& metric : kReportMetrics) {
            out << rep.route_id << ',' << metric;
            for (const auto& col : kReportColumns)
                out << ',' << report_cell(rep, find_model(rep, col), metric);
            out << "\n";
        }
    }
}

void write_kde_curves(const std::string& out_dir, const std::vector<RouteReport>& reports) {
    auto write_curve = [&](const std::string& route, const char* metric, const std::string& who,
                           const std::vector<double>& sample) {
        if (sample.size() < 2) return;  // bandwidth needs a spread estimate
        const auto curve = eval::kde_curve(sample);
        auto out = open_out(out_dir + "/kde_" + route + "_" + metric + "_" + who + ".csv");
        out << "x,density\n";
        for (std::size_t i = 0; i < curve.x.size(); ++i)
            out << csvio::fmt_double(curve.x[i]) << ',' << csvio::fmt_double(curve.density[i])
                << "\n";
    };
    auto columns = [](const eval::CrossingStats& s) {
        std::pair<std::vector<double>, std::vector<double>> cols;
        for (const auto& r : s.records) {
            cols.first.push_back(r.d_h_nm);
            cols.second.push_back(r.sin_phi);
        }
        return cols;
    };
    for (const auto& rep : reports) {
        const auto [dh, sinphi] = columns(rep.test_stats);
        write_curve(rep.route_id, "dh", "test", dh);
        write_curve(rep.route_id, "sinphi", "test", sinphi);
        for (const auto& me : rep.models) {
            const auto [gdh, gsinphi] = columns(me.stats);
            write_curve(rep.route_id, "dh", me.model, gdh);
            write_curve(rep.route_id, "sinphi", me.model, gsinphi);
        }
    }
}

void run_evaluate(const std::string& tracks_path, const std::string& plans_path,
                  const std::string& sector_path, const std::string& pairs_path,
                  const std::vector<std::pair<std::string, std::string>>& generated_paths,
                  const std::string& out_dir, const PipelineConfig& cfg, std::ostream& log) {
    auto records = data::ingest(tracks_path, plans_path);
    const auto groups = data::group_routes(std::move(records), cfg.top_k);
    const auto sector = load_sector(sector_path);
    const auto pairs = read_pairs(pairs_path);

    std::set<std::string> test_ids;
    for (const auto& p : pairs.split.test) test_ids.insert(p.flight_id);

    std::vector<std::pair<std::string, std::vector<GeneratedTrack>>> generated;
    for (const auto& [name, path] : generated_paths)
        generated.emplace_back(name, read_generated(path));

    const auto reports = evaluate_routes(groups, test_ids, sector, generated, cfg);
    std::filesystem::create_directories(out_dir);
    write_report(out_dir + "/report.csv", reports);
    write_kde_curves(out_dir, reports);

    for (const auto& rep : reports) {
        log << "evaluate: " << rep.route_id << " test " << rep.test_stats.records.size() << "/"
            << rep.test_stats.n_tracks << " crossings";
        for (const auto& me : rep.models) {
            log << "; " << me.model;
            if (me.comparison)
                log << " ks_dh=" << csvio::fmt_double(me.comparison->ks_dh)
                    << " ks_sinphi=" << csvio::fmt_double(me.comparison->ks_sinphi);
            else
                log << " undefined";
        }
        log << "\n";
    }
    log << "evaluate: wrote " << out_dir << "/report.csv\n";
}

std::string format_report(const std::string& report_csv_path) {
    const auto lines = csvio::read_lines(report_csv_path);
    if (lines.empty()) throw std::runtime_error(report_csv_path + ": empty report");
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> widths;
    for (const auto& line : lines) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        for (const auto& cell : csvio::split_csv(line)) row.emplace_back(cell);
        if (row.size() > widths.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i)
            widths[i] = std::max(widths[i], row[i].size());
        rows.push_back(std::move(row));
    }
    std::ostringstream out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << row[i];
            if (i + 1 < row.size())
                out << std::string(widths[i] - row[i].size() + 2, ' ');
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace sectorflow::pipeline
