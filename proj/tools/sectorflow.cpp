// Command-line front end: synth -> fit -> train -> generate -> evaluate ->
// report, one subcommand per pipeline stage.
#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "sectorflow/pipeline.hpp"

namespace {

void apply_thread_cap() {
    const char* env = std::getenv("SECTORFLOW_THREADS");
    if (env == nullptr) return;
    const int n = std::atoi(env);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"Generative models of aircraft ground tracks through an airspace sector"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; command-line flags take precedence");

    sectorflow::pipeline::PipelineConfig cfg;
    bool serial = false;
    app.add_flag("--serial", serial, "Use the serial reference implementations");

    auto* synth = app.add_subcommand("synth", "Sample a synthetic radar corpus from a scenario");
    std::string scenario_path;
    std::string synth_out;
    int n_flights = 1000;
    std::uint64_t synth_seed = 0;
    synth->add_option("--scenario", scenario_path, "Scenario JSON (omit for the built-in one)");
    synth->add_option("--n", n_flights, "Number of flights")->capture_default_str();
    synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* fit = app.add_subcommand("fit", "Fit piecewise-linear tracks and build model pairs");
    std::string tracks_path;
    std::string plans_path;
    std::string pairs_out;
    fit->add_option("--tracks", tracks_path, "Track CSV")->required();
    fit->add_option("--plans", plans_path, "Flight-plan CSV")->required();
    fit->add_option("--out", pairs_out, "Pairs CSV to write")->required();
    fit->add_option("--degree", cfg.fit.degree, "Control points after the entry point")
        ->capture_default_str();
    fit->add_flag("--calibrate,!--no-calibrate", cfg.auto_calibrate,
                  "Derive lambda / phi_u from the corpus")
        ->capture_default_str();
    fit->add_option("--lambda", cfg.fit.lambda, "Turn penalty weight (with --no-calibrate)")
        ->capture_default_str();
    fit->add_option("--phi-u", cfg.fit.phi_u_deg, "Turn budget in degrees (with --no-calibrate)")
        ->capture_default_str();
    fit->add_option("--budget", cfg.fit.budget, "Objective evaluations per restart")
        ->capture_default_str();
    fit->add_option("--restarts", cfg.fit.restarts, "Optimizer restarts per track")
        ->capture_default_str();
    fit->add_option("--fit-seed", cfg.fit.seed, "Fit RNG seed")->capture_default_str();
    fit->add_option("--top-k", cfg.top_k, "Routes kept (by descending flight count)")
        ->capture_default_str();
    fit->add_option("--plan-width", cfg.plan_width, "Waypoints encoded into the context")
        ->capture_default_str();
    fit->add_option("--train-fraction", cfg.train_fraction, "Train share of the flight split")
        ->capture_default_str();
    fit->add_option("--split-seed", cfg.split_seed, "Split shuffle seed")->capture_default_str();

    auto* train = app.add_subcommand("train", "Train a generative model on a pairs file");
    std::string train_pairs;
    std::string model_out;
    train->add_option("--pairs", train_pairs, "Pairs CSV")->required();
    train->add_option("--out", model_out, "Model file to write")->required();
    train->add_option("--model", cfg.model_kind, "Model kind")
        ->check(CLI::IsMember({"linear", "de", "bnn"}))
        ->capture_default_str();
    train->add_option("--hidden", cfg.hidden, "Hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    train->add_option("--activation", cfg.activation, "Hidden activation")
        ->check(CLI::IsMember({"tanh", "relu"}))
        ->capture_default_str();
    train->add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
    train->add_option("--batch-size", cfg.train.batch_size, "Minibatch size")
        ->capture_default_str();
    train->add_option("--lr", cfg.train.learning_rate, "Adam learning rate")
        ->capture_default_str();
    train->add_option("--weight-decay", cfg.train.weight_decay, "L2 penalty weight")
        ->capture_default_str();
    train->add_option("--train-seed", cfg.train.seed, "Training RNG seed")
        ->capture_default_str();
    train->add_option("--members", cfg.n_members, "Deep-ensemble members")->capture_default_str();
    train->add_option("--prior-precision", cfg.prior_precision,
                      "Gaussian prior precision of the last-layer posterior")
        ->capture_default_str();
    train->add_option("--sigma-jitter", cfg.sigma_jitter_deg,
                      "Linear-baseline exit jitter (degrees)")
        ->capture_default_str();

    auto* generate = app.add_subcommand("generate", "Sample tracks for every test context");
    std::string gen_model;
    std::string gen_pairs;
    std::string gen_out;
    generate->add_option("--model", gen_model, "Model file")->required();
    generate->add_option("--pairs", gen_pairs, "Pairs CSV (test rows give the contexts)")
        ->required();
    generate->add_option("--out", gen_out, "Generated-track CSV to write")->required();
    generate->add_option("--samples", cfg.samples_per_context, "Samples per test context")
        ->capture_default_str();
    generate->add_option("--resample", cfg.resample_count, "Points per sampled polyline")
        ->capture_default_str();
    generate->add_option("--sample-seed", cfg.sample_seed, "Sampling RNG seed")
        ->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "Crossing-plane statistics per route");
    std::string eval_tracks;
    std::string eval_plans;
    std::string sector_path;
    std::string eval_pairs;
    std::string gen_linear;
    std::string gen_de;
    std::string gen_bnn;
    std::string eval_out;
    evaluate->add_option("--tracks", eval_tracks, "Track CSV of the real corpus")->required();
    evaluate->add_option("--plans", eval_plans, "Flight-plan CSV of the real corpus")->required();
    evaluate->add_option("--sector", sector_path, "Sector geometry JSON")->required();
    evaluate->add_option("--pairs", eval_pairs, "Pairs CSV (test rows give the held-out set)")
        ->required();
    evaluate->add_option("--gen-linear", gen_linear, "Generated tracks of the linear baseline");
    evaluate->add_option("--gen-de", gen_de, "Generated tracks of the deep ensemble");
    evaluate->add_option("--gen-bnn", gen_bnn, "Generated tracks of the BNN");
    evaluate->add_option("--out", eval_out, "Output directory")->required();
    evaluate->add_option("--half-width", cfg.half_width_nm, "Crossing-plane half width (nm)")
        ->capture_default_str();
    evaluate->add_option("--top-k", cfg.top_k, "Routes kept (must match the fit stage)")
        ->capture_default_str();

    auto* report = app.add_subcommand("report", "Pretty-print a report.csv");
    std::string report_path;
    report->add_option("--in", report_path, "report.csv to format")->required();

    CLI11_PARSE(app, argc, argv);
    cfg.parallel = !serial;

    try {
        if (synth->parsed()) {
            sectorflow::pipeline::run_synth(scenario_path, n_flights, synth_seed, synth_out,
                                            std::cout);
        } else if (fit->parsed()) {
            sectorflow::pipeline::run_fit(tracks_path, plans_path, pairs_out, cfg, std::cout);
        } else if (train->parsed()) {
            sectorflow::pipeline::run_train(train_pairs, model_out, cfg, std::cout);
        } else if (generate->parsed()) {
            sectorflow::pipeline::run_generate(gen_model, gen_pairs, gen_out, cfg, std::cout);
        } else if (evaluate->parsed()) {
            std::vector<std::pair<std::string, std::string>> gens;
            if (!gen_linear.empty()) gens.emplace_back("linear", gen_linear);
            if (!gen_de.empty()) gens.emplace_back("de", gen_de);
            if (!gen_bnn.empty()) gens.emplace_back("bnn", gen_bnn);
            if (gens.empty())
                throw std::invalid_argument(
                    "evaluate needs at least one of --gen-linear/--gen-de/--gen-bnn");
            sectorflow::pipeline::run_evaluate(eval_tracks, eval_plans, sector_path, eval_pairs,
                                               gens, eval_out, cfg, std::cout);
        } else if (report->parsed()) {
            std::cout << sectorflow::pipeline::format_report(report_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
