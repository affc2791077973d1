// Command-line harness: samples signed graphs from graphons, integrates the
// repelling/opposing dynamics, solves the limiting graphon dynamics and runs
// convergence / bound-verification / degree campaigns from a JSON config.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphon/analysis.hpp"
#include "graphon/dynamics.hpp"
#include "graphon/harness.hpp"
#include "graphon/kernel.hpp"
#include "graphon/sampler.hpp"
#include "graphon/version.hpp"

namespace {

using namespace graphon;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_numeric = 2;

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::string format = "csv";
    bool wide = false;
    std::optional<double> alpha_override;
};

ExperimentConfig load(const GlobalOpts& g) {
    ExperimentConfig cfg = load_config(g.config_path);
    if (g.seed) cfg.seeds = {*g.seed};
    if (g.out) cfg.output_dir = *g.out;
    if (g.alpha_override) cfg.alpha_override = g.alpha_override;
    return cfg;
}

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream os(std::filesystem::path(cfg.output_dir) / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file " + name);
    return os;
}

void provenance_line(std::ostream& os, const ExperimentConfig& cfg) {
    os << "# graphon " << version_string << " config_hash=" << config_hash(cfg) << "\n";
    if (cfg.alpha_override)
        os << "# WARNING: alpha_override in effect; alpha is not 1/(n*eps)\n";
}

nlohmann::json trajectory_json(const OpinionTrajectory& traj) {
    nlohmann::json j;
    j["model"] = to_string(traj.model);
    j["alpha"] = traj.alpha;
    j["times"] = traj.times;
    j["states"] = traj.states;
    return j;
}

int cmd_sample(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const Kernel kernel = make_kernel(cfg.kernel_spec);
    const std::uint64_t seed = cfg.run_seeds().front();
    const std::size_t n = cfg.n_list.front();
    const double eps = cfg.sparsity(n);
    const auto lat = make_latents(n, cfg.latent_scheme, seed);
    const auto adj = sample_adjacency(kernel, lat, eps, seed);
    {
        auto os = open_out(cfg, "adjacency.csv");
        provenance_line(os, cfg);
        write_adjacency_csv(os, adj);
    }
    if (cfg.latent_scheme == LatentScheme::stochastic) {
        auto os = open_out(cfg, "latents.csv");
        write_latents_csv(os, lat);
    }
    std::cout << "sampled n=" << n << " eps=" << format_double(eps) << " edges="
              << adj.edges.size() << " -> " << cfg.output_dir << "/adjacency.csv\n";
    return exit_ok;
}

int cmd_simulate(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const Kernel kernel = make_kernel(cfg.kernel_spec);
    const InitialCondition initial = make_initial(cfg.initial_spec);
    const std::uint64_t seed = cfg.run_seeds().front();
    const std::size_t n = cfg.n_list.front();
    const double eps = cfg.sparsity(n);
    const double alpha = cfg.alpha_override
                             ? *cfg.alpha_override
                             : 1.0 / (static_cast<double>(n) * eps);
    const auto lat = make_latents(n, cfg.latent_scheme, seed);
    const auto adj = sample_adjacency(kernel, lat, eps, seed);
    for (Model m : cfg.models()) {
        const auto traj = integrate(
            m, step_graphon(adj, 1.0), alpha, sample_initial(initial, lat), cfg.T,
            cfg.h, TrajectorySource{TrajectorySource::Kind::graph, n, eps});
        const std::string stem = "trajectory_" + to_string(m);
        if (g.format == "json") {
            auto os = open_out(cfg, stem + ".json");
            os << trajectory_json(traj).dump(2) << "\n";
        } else {
            auto os = open_out(cfg, stem + ".csv");
            provenance_line(os, cfg);
            write_trajectory_csv(os, traj,
                                 g.wide ? TrajectoryLayout::wide
                                        : TrajectoryLayout::long_format);
        }
    }
    return exit_ok;
}

int cmd_solve_graphon(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const Kernel kernel = make_kernel(cfg.kernel_spec);
    const InitialCondition initial = make_initial(cfg.initial_spec);
    const std::size_t M = cfg.ref_resolution();
    for (Model m : cfg.models()) {
        const auto traj = solve_graphon(m, kernel, initial, cfg.T, cfg.h, M);
        const std::string stem = "reference_" + to_string(m);
        if (g.format == "json") {
            auto os = open_out(cfg, stem + ".json");
            os << trajectory_json(traj).dump(2) << "\n";
        } else {
            auto os = open_out(cfg, stem + ".csv");
            provenance_line(os, cfg);
            write_trajectory_csv(os, traj,
                                 g.wide ? TrajectoryLayout::wide
                                        : TrajectoryLayout::long_format);
        }
    }
    return exit_ok;
}

int cmd_sweep(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const SweepOutput sw = run_sweep(cfg);
    std::size_t failed = 0;
    for (const auto& rr : sw.runs)
        if (rr.status.rfind("failed", 0) == 0) ++failed;
    std::cout << "sweep: " << sw.runs.size() << " runs, " << failed
              << " failed -> " << cfg.output_dir << "\n";
    return exit_ok;
}

int cmd_bound_check(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const SweepOutput sw = run_bound_check(cfg);
    double global_min = std::numeric_limits<double>::infinity();
    std::size_t violations = 0;
    for (const auto& rr : sw.runs) {
        if (rr.status.rfind("failed", 0) == 0) continue;
        global_min = std::min(global_min, rr.min_margin);
        if (rr.status == "violation") ++violations;
    }
    std::cout << "bound-check: min margin " << format_double(global_min) << ", "
              << violations << " violations -> " << cfg.output_dir << "\n";
    return exit_ok;
}

int cmd_degrees(const GlobalOpts& g) {
    const ExperimentConfig cfg = load(g);
    const auto results = run_degrees(cfg);
    std::cout << "degrees: " << results.size() << " trials -> " << cfg.output_dir
              << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Signed-graphon opinion dynamics harness"};
    app.set_version_flag("--version", graphon::version_string);
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "JSON experiment config")->required();
    std::uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override the seed list");
    std::string out_val;
    auto* out_opt = app.add_option("--out", out_val, "override the output directory");
    app.add_option("--format", g.format, "csv|json output format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--wide", g.wide, "wide trajectory CSV (t,u_1,...,u_n)");
    double alpha_val = 0.0;
    auto* alpha_opt = app.add_option(
        "--alpha-override", alpha_val,
        "force alpha instead of 1/(n*eps); taints output files");

    app.add_subcommand("sample", "sample a signed adjacency and emit its CSV")->fallthrough();
    app.add_subcommand("simulate", "integrate one sampled-graph trajectory")->fallthrough();
    app.add_subcommand("solve-graphon", "solve the reference graphon dynamics")->fallthrough();
    app.add_subcommand("sweep", "convergence sweep over n and seeds")->fallthrough();
    app.add_subcommand("bound-check", "verify the error bound on every run")->fallthrough();
    app.add_subcommand("degrees", "Monte Carlo degree reports")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }
    if (*seed_opt) g.seed = seed_val;
    if (*out_opt) g.out = out_val;
    if (*alpha_opt) g.alpha_override = alpha_val;

    const std::string sub = app.get_subcommands().front()->get_name();
    try {
        if (sub == "sample") return cmd_sample(g);
        if (sub == "simulate") return cmd_simulate(g);
        if (sub == "solve-graphon") return cmd_solve_graphon(g);
        if (sub == "sweep") return cmd_sweep(g);
        if (sub == "bound-check") return cmd_bound_check(g);
        if (sub == "degrees") return cmd_degrees(g);
    } catch (const graphon::numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return exit_numeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    }
    return exit_config;
}
