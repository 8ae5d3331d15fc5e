#pragma once

#include <nlceqa/nlceqa.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace nlceqa::app {

struct CommonFlags {
    std::string config;
    std::vector<std::string> set;
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string out;
};

inline ExperimentConfig resolve(const CommonFlags &f) {
    ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
    for(const auto &kv : f.set) apply_override(cfg, kv);
    if(f.seed) cfg.seed = *f.seed;
    if(!f.out.empty()) cfg.out = f.out;
    return cfg;
}

inline void print_curve_summary(std::ostream &os, const DispersionRun &r) {
    os << r.cfg.model_label() << ": " << r.circuits << " unique circuits, mean |ω − ω_ED| = " << fmt(r.error_vs_ed);
    if(r.analytic) os << ", vs analytic " << fmt(r.error_vs_analytic);
    if(r.mc_draws > 0) os << ", mean σ = " << fmt(r.mean_sigma()) << " (" << r.mc_failed << "/" << r.mc_draws << " draws failed)";
    os << "\n";
}

/// Entry point shared by the executable and the tests. Returns the process exit code.
inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
    CLI::App cli{"NLCE + quantum-algorithm dispersion laboratory"};
    cli.require_subcommand(1);
    CommonFlags f;
    auto add_common = [&](CLI::App *c) {
        c->add_option("--config", f.config, "experiment config file (key = value)");
        c->add_option("--set", f.set, "override a config key (key=value), repeatable")->take_all();
        c->add_option("--jobs", f.jobs, "concurrent grid cells / Monte-Carlo workers")->check(CLI::PositiveNumber);
        c->add_option("--seed", f.seed, "measurement seed");
        c->add_option("--out", f.out, "output directory");
    };
    auto *disp = cli.add_subcommand("dispersion", "one dispersion curve with NLCE+ED reference");
    auto *grid = cli.add_subcommand("noise-grid", "curves over shots x depolarization scale x seed");
    auto *sweep = cli.add_subcommand("sweep-study", "ASP step count versus noise scale");
    auto *circ = cli.add_subcommand("circuits", "unique-circuit counts per geometry and size");
    auto *summ = cli.add_subcommand("summary", "mean dispersion error of finished runs");
    auto *mcc = cli.add_subcommand("mc-convergence", "mean EOTM versus Monte-Carlo sample count");
    for(auto *c : {disp, grid, sweep, circ, mcc}) add_common(c);
    std::vector<std::string> run_dirs;
    std::string summary_out;
    summ->add_option("runs", run_dirs, "run directories")->required();
    summ->add_option("--out", summary_out, "write summary.csv into this directory");

    try {
        cli.parse(argc, argv);
    } catch(const CLI::ParseError &e) {
        return cli.exit(e, out, err);
    }

    RunOptions o;
    o.jobs = f.jobs;
    o.log = &err;
    try {
        if(*disp) {
            const auto r = run_dispersion(resolve(f), o);
            print_curve_summary(out, r);
            return 0;
        }
        if(*grid) {
            const auto cfg = resolve(f);
            const auto g = run_noise_grid(cfg, cfg.grid_shots, cfg.grid_scales, cfg.grid_seeds, o);
            for(const auto &c : g.cells)
                out << c.dir << ": " << (c.ok ? "mean ω = " + fmt(c.mean_omega) + ", mean σ = " + fmt(c.mean_sigma) : "FAILED " + c.error)
                    << "\n";
            return g.all_ok() ? 0 : 2;
        }
        if(*sweep) {
            const auto cfg = resolve(f);
            const auto s = run_sweep_study(cfg, cfg.sweep_steps, cfg.sweep_scales, o);
            for(const auto &r : s.rows)
                out << "steps " << r.steps << ", scale " << fmt(r.scale) << ": "
                    << (r.ok ? "error " + fmt(r.error_vs_ed) : "FAILED " + r.error) << "\n";
            out << "knee: " << (s.knee ? fmt(*s.knee) : std::string("undetermined")) << "\n";
            return s.all_ok() ? 0 : 2;
        }
        if(*circ) {
            const auto cfg = resolve(f);
            const auto t = circuit_table(report_circuit_scaling(cfg.circuit_n, cfg.square_n_max));
            write_atomic(std::filesystem::path(cfg.out) / "circuits.csv", t.str());
            out << t.str();
            return 0;
        }
        if(*summ) {
            const auto t = summary_table(report_error_summary(run_dirs));
            if(!summary_out.empty()) write_atomic(std::filesystem::path(summary_out) / "summary.csv", t.str());
            out << t.str();
            return 0;
        }
        if(*mcc) {
            const auto cfg = resolve(f);
            for(const auto &r : run_mc_convergence(cfg, cfg.mc_counts, o)) out << r.samples << "," << fmt(r.mean_eotm) << "\n";
            return 0;
        }
    } catch(const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace nlceqa::app
