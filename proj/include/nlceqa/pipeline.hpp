#pragma once

#include "ansatz.hpp"
#include "concurrency.hpp"
#include "config.hpp"
#include "ed.hpp"
#include "io.hpp"
#include "measurement.hpp"
#include "nlce.hpp"
#include "pcat.hpp"
#include "uncertainty.hpp"
#include "vqe.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nlceqa {

/// Error carrying the pipeline stage it came from.
class StageError : public std::runtime_error {
  public:
    StageError(const std::string &stage, const std::string &what)
        : std::runtime_error(stage + ": " + what), stage_(stage) {}
    [[nodiscard]] const std::string &stage() const noexcept { return stage_; }

  private:
    std::string stage_;
};

struct RunOptions {
    int jobs = 1;
    bool write = true;
    std::ostream *log = nullptr;
};

namespace detail {

template <class Fn>
auto stage(const std::string &name, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch(const StageError &) {
        throw;
    } catch(const std::exception &e) {
        throw StageError(name, e.what());
    }
}

inline void note(const RunOptions &o, const std::string &msg) {
    if(o.log) *o.log << msg << '\n';
}

} // namespace detail

// --- solver stage ---------------------------------------------------------------

struct TrainingSummary {
    std::string key;
    CostKind kind = CostKind::variance_1qp;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    bool cached = false;
};

/// State-preparation circuits of one NLCE cluster. U_gs == U_1qp whenever one
/// unitary serves both sectors (ASP, ED, and VQE with the ground-state term).
struct PreparedCluster {
    ClusterSpec spec;
    int weight = 1;
    Circuit U_1qp;
    Circuit U_gs;
    std::vector<TrainingSummary> training;
};

inline std::vector<WeightedCluster> clusters_of(const ExperimentConfig &cfg) {
    return enumerate_clusters(cfg.geometry(), cfg.n_max, cfg.couplings());
}

/// Dense circuit mapping |Φ^[0]> → |Ψ^[0]> and |Φ_i^[1]> → |Ψ_i^[1]> (ED eigenstates).
inline Circuit ed_circuit(const ClusterSpec &spec) {
    const auto ed = exact_solve(spec);
    std::vector<std::pair<std::uint64_t, Vec>> fixed{{0, ed.ground_state}};
    for(int i = 0; i < spec.sites; ++i) fixed.emplace_back(one_flip_index(i), ed.one_qp_states.col(i));
    std::vector<int> all(static_cast<std::size_t>(spec.sites));
    for(int q = 0; q < spec.sites; ++q) all[static_cast<std::size_t>(q)] = q;
    Circuit c(spec.sites, "ed");
    c.add(Gate::unitary(complete_unitary(spec.sites, fixed), all));
    return c;
}

inline std::string default_param_file(const ExperimentConfig &cfg) {
    return cfg.vqe_param_file.empty() ? (std::filesystem::path(cfg.out) / "parameters.json").string() : cfg.vqe_param_file;
}

/// Trains (or reloads) one HVA cost. The parameter key includes every
/// hyperparameter that changes the optimum.
inline std::pair<Circuit, TrainingSummary> trained_hva(const ExperimentConfig &cfg, const CostSpec &cs,
                                                       const std::string &param_file, const RunOptions &o) {
    std::ostringstream model;
    model << to_string(cfg.model) << "_J" << cfg.J << "_h" << cfg.h << "_hl" << cfg.hl << "_L" << cfg.vqe_layers << "_w"
          << cs.ground_weight << "_r" << cfg.vqe_restarts;
    const auto key = parameter_key(model.str(), cs.cluster, cs.kind, cfg.vqe_seed);
    TrainingSummary s{key, cs.kind, 0.0, 0, false, false};
    std::optional<TrainResult> r;
    if(o.write) r = load_parameters(param_file, key);
    if(r) {
        s.cached = true;
    } else {
        TrainOptions to;
        to.max_iterations = cfg.vqe_max_iterations;
        r = train(cs, cfg.vqe_restarts, cfg.vqe_seed, to);
        if(o.write) store_parameters(param_file, key, *r);
    }
    s.cost = r->cost;
    s.iterations = r->iterations;
    s.converged = r->converged;
    detail::note(o, "  trained " + key + ": cost " + fmt(s.cost) + (s.cached ? " (cached)" : ""));
    return {build_hva(cs.ansatz(), r->params), s};
}

inline std::vector<PreparedCluster> prepare_clusters(const ExperimentConfig &cfg, const RunOptions &o = {}) {
    std::vector<PreparedCluster> out;
    const auto param_file = default_param_file(cfg);
    for(const auto &wc : clusters_of(cfg)) {
        PreparedCluster p{wc.spec, wc.weight, Circuit(wc.spec.sites), Circuit(wc.spec.sites), {}};
        detail::stage("prepare " + wc.spec.label(), [&] {
            switch(cfg.solver) {
                case SolverKind::ed: p.U_1qp = p.U_gs = ed_circuit(wc.spec); break;
                case SolverKind::asp: {
                    SweepSchedule sch{cfg.asp_steps, cfg.asp_dt, cfg.trotter_order};
                    p.U_1qp = p.U_gs = build_asp(wc.spec, sch);
                    break;
                }
                case SolverKind::vqe: {
                    const bool shared = cfg.correction_enabled();
                    auto cs = CostSpec::variance(wc.spec, shared ? cfg.vqe_ground_weight : 0.0);
                    cs.layers = cfg.vqe_layers;
                    if(shared && !(cs.ground_weight > 0))
                        throw std::invalid_argument("the LF correction needs vqe.ground_weight > 0");
                    auto [U, s] = trained_hva(cfg, cs, param_file, o);
                    p.U_1qp = U;
                    p.training.push_back(s);
                    if(shared) {
                        p.U_gs = U;
                    } else {
                        auto ce = CostSpec::energy(wc.spec);
                        ce.layers = cfg.vqe_layers;
                        auto [Ug, sg] = trained_hva(cfg, ce, param_file, o);
                        p.U_gs = Ug;
                        p.training.push_back(sg);
                    }
                    break;
                }
            }
            return 0;
        });
        out.push_back(std::move(p));
    }
    return out;
}

// --- measurement stage ------------------------------------------------------------

struct ClusterSolution {
    ClusterSpec spec;
    int weight = 1;
    MatrixEstimate H;
    MatrixEstimate O;
    std::optional<CorrectionTerms> correction;
    SqdResult sqd;
    EffectiveHamiltonian1QP heff;
};

inline MeasurementSettings measurement_settings(const ExperimentConfig &cfg, const ClusterSpec &spec) {
    MeasurementSettings st;
    st.shots = cfg.backend == BackendKind::exact ? 0 : cfg.shots;
    st.noise = cfg.noise();
    st.seed = derive_seed(cfg.seed, "measure|" + spec.label());
    st.symmetrize = cfg.symmetrize;
    return st;
}

inline ClusterSolution measure_cluster(const PreparedCluster &p, const ExperimentConfig &cfg) {
    const auto st = measurement_settings(cfg, p.spec);
    ClusterSolution s;
    s.spec = p.spec;
    s.weight = p.weight;
    const std::string where = " " + p.spec.label();
    s.H = detail::stage("hamiltonian matrix" + where, [&] { return hamiltonian_matrix(p.U_1qp, p.spec, st); });
    s.O = detail::stage("overlap matrix" + where, [&] {
        CorrectionTerms t;
        auto m = overlap_matrix(p.U_1qp, p.U_gs, p.spec, st, cfg.correction_enabled(), &t);
        if(cfg.correction_enabled()) s.correction = t;
        return m;
    });
    s.sqd = detail::stage("sqd" + where, [&] { return sqd_energy(p.U_gs, p.spec, st); });
    s.heff = detail::stage("pcat" + where, [&] {
        auto h = effective_hamiltonian(s.H, s.O, s.sqd.energy, p.spec,
                                       cfg.backend == BackendKind::exact ? Provenance::statevector : Provenance::sampled);
        h.e0_source = "SQD";
        h.seeds = {st.seed};
        return h;
    });
    return s;
}

inline std::vector<ClusterInputs> cluster_inputs(const std::vector<ClusterSolution> &sol) {
    std::vector<ClusterInputs> in;
    for(const auto &s : sol) in.push_back({s.spec, s.H, s.O, s.sqd.energy, s.sqd.sigma, s.weight});
    return in;
}

// --- references -------------------------------------------------------------------

/// H_eff from exact eigenstates, with the 0QP projection removed from the overlaps.
inline Mat ed_effective_hamiltonian(const ClusterSpec &spec, bool with_correction = true) {
    const auto H = build_tfim(spec);
    const auto ed = exact_solve(H, spec);
    const Mat chi = ed.one_qp_states;
    MatrixEstimate O(MatrixRole::overlap, statevector_overlap(chi));
    if(with_correction) O = modified_overlap_assembly(O, statevector_correction(ed.ground_state, chi));
    return effective_matrix(statevector_hamiltonian(chi, H), O.value, ed.ground_energy);
}

inline DispersionCurve weighted_curve(const std::vector<std::pair<Mat, int>> &heff, const std::vector<double> &ks,
                                      int cell) {
    int max_cells = 1;
    for(const auto &[m, w] : heff) max_cells = std::max(max_cells, static_cast<int>(m.rows()) / cell);
    const BlochSum bloch(ks, cell, max_cells);
    std::vector<std::pair<const Mat *, int>> wc;
    for(const auto &[m, w] : heff) wc.emplace_back(&m, w);
    return weighted_dispersion(wc, bloch);
}

/// The NLCE+ED reference for the configured model.
inline DispersionCurve ed_reference(const ExperimentConfig &cfg, const std::vector<double> &ks) {
    std::vector<std::pair<Mat, int>> heff;
    int cell = 1;
    for(const auto &wc : clusters_of(cfg)) {
        heff.emplace_back(ed_effective_hamiltonian(wc.spec), wc.weight);
        cell = wc.spec.cell_size();
    }
    auto c = weighted_curve(heff, ks, cell);
    c.model = to_string(cfg.model) + " NLCE+ED";
    c.n_max = cfg.n_max;
    return c;
}

// --- dispersion run ------------------------------------------------------------

struct DispersionRun {
    ExperimentConfig cfg;
    DispersionCurve curve;
    DispersionCurve ed;
    std::optional<DispersionCurve> analytic;
    std::vector<ClusterSolution> clusters;
    std::vector<TrainingSummary> training;
    long circuits = 0;
    long mc_draws = 0;
    long mc_failed = 0;
    double error_vs_ed = 0.0;
    double error_vs_analytic = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] double mean_omega() const {
        double s = 0;
        std::size_t n = 0;
        for(const auto &b : curve.omega)
            for(double v : b) {
                s += v;
                ++n;
            }
        return n ? s / static_cast<double>(n) : 0.0;
    }
    [[nodiscard]] double mean_sigma() const {
        double s = 0;
        std::size_t n = 0;
        for(const auto &b : curve.sigma)
            for(double v : b) {
                s += v;
                ++n;
            }
        return n ? s / static_cast<double>(n) : 0.0;
    }
};

inline long circuit_count(const ExperimentConfig &cfg) {
    std::vector<ClusterSpec> specs;
    for(const auto &wc : clusters_of(cfg)) specs.push_back(wc.spec);
    CircuitCountOptions o;
    o.lf_correction = cfg.correction_enabled();
    return count_unique_circuits(specs, o);
}

inline nlohmann::json provenance_json(const DispersionRun &r) {
    nlohmann::json j;
    j["model"] = to_string(r.cfg.model);
    j["couplings"] = {{"J", r.cfg.J}, {"h", r.cfg.h}, {"hl", r.cfg.hl}};
    j["solver"] = to_string(r.cfg.solver);
    j["backend"] = to_string(r.cfg.backend);
    j["seed"] = r.cfg.seed;
    j["unique_circuits"] = r.circuits;
    j["lf_correction"] = r.cfg.correction_enabled();
    j["noise"] = {{"p1", r.cfg.p1}, {"p2", r.cfg.p2}, {"scale", r.cfg.noise_scale}};
    j["shots"] = r.cfg.backend == BackendKind::exact ? 0 : r.cfg.shots;
    j["monte_carlo"] = {{"draws", r.mc_draws}, {"failed", r.mc_failed}, {"seed", derive_seed(r.cfg.seed, "mc")}};
    auto cl = nlohmann::json::array();
    for(const auto &c : r.clusters) {
        nlohmann::json e = to_json(c.heff);
        e["weight"] = c.weight;
        e["sqd"] = {{"energy", c.sqd.energy},
                    {"sigma", c.sqd.sigma},
                    {"subspace", c.sqd.subspace_size},
                    {"shots", c.sqd.shots},
                    {"seed", c.sqd.seed}};
        e["matrices"] = {{"H", "matrices/" + c.spec.label() + "_H.json"}, {"O", "matrices/" + c.spec.label() + "_O.json"}};
        cl.push_back(std::move(e));
    }
    j["clusters"] = std::move(cl);
    auto tr = nlohmann::json::array();
    for(const auto &t : r.training)
        tr.push_back({{"key", t.key},
                      {"kind", to_string(t.kind)},
                      {"cost", t.cost},
                      {"iterations", t.iterations},
                      {"converged", t.converged},
                      {"cached", t.cached}});
    j["training"] = std::move(tr);
    if(r.cfg.solver == SolverKind::vqe) j["parameters"] = default_param_file(r.cfg);
    j["error_vs_ed"] = r.error_vs_ed;
    if(r.analytic) j["error_vs_analytic"] = r.error_vs_analytic;
    j["max_discarded_imag"] = r.curve.max_imag;
    return j;
}

inline std::string plot_recipe(const DispersionRun &r) {
    std::string s = "Dispersion data for " + r.cfg.model_label() + "\n\n";
    s += "curve.csv          NLCE+" + to_string(r.cfg.solver) + " (" + to_string(r.cfg.backend) +
         "); columns k, omega_band*, sigma_band*\n";
    s += "curve_ed.csv       NLCE+ED reference, same layout (sigma = 0)\n";
    if(r.analytic) s += "curve_analytic.csv closed-form 1D dispersion\n";
    s += "\nPlot omega_band* against k for each file; draw sigma_band* as error bands.\n";
    s += "Lines starting with '#' are metadata; the first other line is the column header.\n";
    return s;
}

inline void write_outputs(const DispersionRun &r) {
    namespace fs = std::filesystem;
    const fs::path dir = r.cfg.out;
    fs::create_directories(dir / "matrices");
    write_atomic(dir / "config.txt", config_text(r.cfg));
    write_atomic(dir / "provenance.json", provenance_json(r).dump(2) + "\n");
    std::vector<MeasurementRecord> records;
    for(const auto &c : r.clusters) {
        records.insert(records.end(), c.H.records.begin(), c.H.records.end());
        records.insert(records.end(), c.O.records.begin(), c.O.records.end());
        MeasurementRecord sqd{c.sqd.energy, c.sqd.shots, c.sqd.sigma, "sqd|" + c.spec.label(), c.sqd.seed};
        records.push_back(sqd);
        write_atomic(dir / "matrices" / (c.spec.label() + "_H.json"), to_json(c.H).dump() + "\n");
        write_atomic(dir / "matrices" / (c.spec.label() + "_O.json"), to_json(c.O).dump() + "\n");
        write_atomic(dir / "matrices" / (c.spec.label() + "_Heff.json"), to_json(c.heff).dump() + "\n");
    }
    write_atomic(dir / "records.jsonl", jsonl(records));
    const std::vector<std::string> hdr{"couplings: J=" + fmt(r.cfg.J) + " h=" + fmt(r.cfg.h) + " hl=" + fmt(r.cfg.hl),
                                       "solver: " + to_string(r.cfg.solver) + ", backend: " + to_string(r.cfg.backend)};
    write_curve(dir / "curve.csv", r.curve, hdr);
    write_curve(dir / "curve_ed.csv", r.ed, hdr);
    if(r.analytic) write_curve(dir / "curve_analytic.csv", *r.analytic, hdr);
    write_atomic(dir / "plot_recipe.txt", plot_recipe(r));
}

/// Solver → measurement → PCAT → NLCE → uncertainty for one configuration.
/// `prepared` reuses circuits from an earlier call (grids share one training).
inline DispersionRun run_dispersion(const ExperimentConfig &cfg, const RunOptions &o = {},
                                    const std::vector<PreparedCluster> *prepared = nullptr) {
    detail::stage("config", [&] {
        cfg.validate();
        return 0;
    });
    DispersionRun r;
    r.cfg = cfg;
    const auto ks = k_grid(cfg.k_points);
    std::vector<PreparedCluster> own;
    if(!prepared) {
        own = prepare_clusters(cfg, o);
        prepared = &own;
    }
    for(const auto &p : *prepared) r.training.insert(r.training.end(), p.training.begin(), p.training.end());

    r.clusters.resize(prepared->size());
    parallel_for(prepared->size(), o.jobs, [&](std::size_t i) { r.clusters[i] = measure_cluster((*prepared)[i], cfg); });

    const auto in = cluster_inputs(r.clusters);
    const bool sampled = cfg.backend == BackendKind::shots && cfg.mc_samples > 0;
    r.curve = detail::stage("nlce", [&] {
        if(sampled) {
            McConfig mc{cfg.mc_samples, derive_seed(cfg.seed, "mc"), o.jobs, 0.01};
            auto res = propagate(in, ks, mc);
            r.mc_draws = res.draws;
            r.mc_failed = res.failed;
            return res.curve;
        }
        std::vector<std::pair<Mat, int>> heff;
        for(const auto &c : r.clusters) heff.emplace_back(c.heff.matrix, c.weight);
        auto c = weighted_curve(heff, ks, detail::common_cell(in));
        c.sigma.assign(c.omega.size(), std::vector<double>(ks.size(), 0.0));
        return c;
    });
    r.curve.model = to_string(cfg.model) + " NLCE+" + to_string(cfg.solver);
    r.curve.n_max = cfg.n_max;
    r.curve.seeds = {cfg.seed};
    if(cfg.solver == SolverKind::vqe) r.curve.seeds.push_back(cfg.vqe_seed);
    r.ed = detail::stage("reference", [&] { return ed_reference(cfg, ks); });
    r.error_vs_ed = mean_abs_difference(r.curve, r.ed);
    if(cfg.model == ModelKind::chain) {
        r.analytic = analytic_curve(cfg.J, ks, cfg.h);
        r.analytic->n_max = 0;
        r.error_vs_analytic = mean_abs_difference(r.curve, *r.analytic);
    }
    r.circuits = circuit_count(cfg);
    if(o.write) write_outputs(r);
    detail::note(o, cfg.model_label() + ": mean |ω − ω_ED| = " + fmt(r.error_vs_ed));
    return r;
}

// --- noise grid -------------------------------------------------------------------

struct GridCell {
    long shots = 0;
    double scale = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double mean_omega = 0.0;
    double mean_sigma = 0.0;
    double error_vs_ed = 0.0;
    std::string dir;
};

struct NoiseGrid {
    std::vector<GridCell> cells;
    [[nodiscard]] bool all_ok() const {
        return std::all_of(cells.begin(), cells.end(), [](const GridCell &c) { return c.ok; });
    }
};

inline std::string cell_name(long shots, double scale, std::uint64_t seed) {
    std::ostringstream os;
    os << "shots" << shots << "_scale" << scale << "_seed" << seed;
    return os.str();
}

/// One shot-noise dispersion per (shots, scale, seed) cell, all from one
/// trained set of circuits. Failing cells are recorded and skipped.
inline NoiseGrid run_noise_grid(const ExperimentConfig &cfg, const std::vector<long> &shots_list,
                                const std::vector<double> &scale_list, const std::vector<std::uint64_t> &seeds,
                                const RunOptions &o = {}) {
    if(shots_list.empty() || scale_list.empty() || seeds.empty())
        throw std::invalid_argument("run_noise_grid: empty shot, scale or seed list");
    cfg.validate();
    const auto prepared = prepare_clusters(cfg, o);
    NoiseGrid g;
    for(long s : shots_list)
        for(double x : scale_list)
            for(auto seed : seeds) g.cells.push_back({s, x, seed, false, {}, 0, 0, 0, cell_name(s, x, seed)});
    RunOptions inner = o;
    inner.jobs = 1;
    inner.log = nullptr;
    parallel_for(g.cells.size(), o.jobs, [&](std::size_t i) {
        auto &c = g.cells[i];
        ExperimentConfig cc = cfg;
        cc.backend = BackendKind::shots;
        cc.shots = c.shots;
        cc.noise_scale = c.scale;
        cc.seed = c.seed;
        cc.out = (std::filesystem::path(cfg.out) / c.dir).string();
        try {
            const auto r = run_dispersion(cc, inner, &prepared);
            c.mean_omega = r.mean_omega();
            c.mean_sigma = r.mean_sigma();
            c.error_vs_ed = r.error_vs_ed;
            c.ok = true;
        } catch(const std::exception &e) {
            c.error = e.what();
        }
    });
    if(o.write) {
        CsvTable t;
        t.header = {"noise grid for " + cfg.model_label(), "reference rates: p1=" + fmt(cfg.p1) + " p2=" + fmt(cfg.p2)};
        t.columns = {"shots", "scale", "seed", "status", "mean_omega", "mean_sigma", "error_vs_ed", "dir"};
        for(const auto &c : g.cells)
            t.add_row({std::to_string(c.shots), fmt(c.scale), std::to_string(c.seed), c.ok ? "ok" : "failed",
                       fmt(c.mean_omega), fmt(c.mean_sigma), fmt(c.error_vs_ed), c.dir});
        write_atomic(std::filesystem::path(cfg.out) / "grid.csv", t.str());
        write_atomic(std::filesystem::path(cfg.out) / "config.txt", config_text(cfg));
        std::string errors;
        for(const auto &c : g.cells)
            if(!c.ok) errors += c.dir + ": " + c.error + "\n";
        if(!errors.empty()) write_atomic(std::filesystem::path(cfg.out) / "failures.txt", errors);
    }
    for(const auto &c : g.cells)
        if(!c.ok) detail::note(o, "cell " + c.dir + " failed: " + c.error);
    return g;
}

// --- sweep study ------------------------------------------------------------------

/// Knee of a decreasing curve (Kneedle on log2(x) and normalized y): the point
/// farthest above the chord of the flipped curve.
inline std::optional<double> kneedle(const std::vector<double> &x, const std::vector<double> &y) {
    if(x.size() != y.size() || x.size() < 3) return std::nullopt;
    std::vector<double> lx(x.size());
    for(std::size_t i = 0; i < x.size(); ++i) lx[i] = std::log2(x[i]);
    const double x0 = lx.front(), x1 = lx.back();
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    if(x1 <= x0 || *ymax <= *ymin) return std::nullopt;
    double best = -1;
    std::size_t at = 0;
    for(std::size_t i = 0; i < x.size(); ++i) {
        const double xn = (lx[i] - x0) / (x1 - x0);
        const double yn = 1.0 - (y[i] - *ymin) / (*ymax - *ymin);
        if(yn - xn > best) {
            best = yn - xn;
            at = i;
        }
    }
    return x[at];
}

struct SweepRow {
    int steps = 0;
    double scale = 0.0;
    bool ok = false;
    std::string error;
    double error_vs_ed = 0.0;
    double mean_sigma = 0.0;
    DispersionCurve curve;
};

struct SweepStudy {
    std::vector<SweepRow> rows;
    std::optional<double> knee; ///< from the noiseless rows
    [[nodiscard]] bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const SweepRow &r) { return r.ok; });
    }
};

/// ASP error versus NLCE+ED per (steps, noise scale). Scale 0 runs the exact
/// backend; noisy cells use shots with Monte-Carlo σ.
inline SweepStudy run_sweep_study(const ExperimentConfig &cfg, const std::vector<int> &steps_list,
                                  const std::vector<double> &scale_list, const RunOptions &o = {}) {
    if(steps_list.empty() || scale_list.empty()) throw std::invalid_argument("run_sweep_study: empty step or scale list");
    SweepStudy st;
    for(int n : steps_list)
        for(double x : scale_list) st.rows.push_back({n, x, false, {}, 0, 0, {}});
    RunOptions inner = o;
    inner.jobs = 1;
    inner.log = nullptr;
    inner.write = false;
    parallel_for(st.rows.size(), o.jobs, [&](std::size_t i) {
        auto &row = st.rows[i];
        ExperimentConfig cc = cfg;
        cc.solver = SolverKind::asp;
        cc.asp_steps = row.steps;
        cc.noise_scale = row.scale;
        cc.backend = row.scale > 0 ? BackendKind::shots : BackendKind::exact;
        try {
            auto r = run_dispersion(cc, inner);
            row.error_vs_ed = r.error_vs_ed;
            row.mean_sigma = r.mean_sigma();
            row.curve = std::move(r.curve);
            row.ok = true;
        } catch(const std::exception &e) {
            row.error = e.what();
        }
    });
    std::vector<double> xs, ys;
    for(const auto &r : st.rows)
        if(r.scale == 0.0 && r.ok) {
            xs.push_back(r.steps);
            ys.push_back(r.error_vs_ed);
        }
    st.knee = kneedle(xs, ys);
    if(o.write) {
        CsvTable t;
        t.header = {"ASP sweep study for " + cfg.model_label(),
                    "knee (noiseless): " + (st.knee ? fmt(*st.knee) : std::string("undetermined"))};
        t.columns = {"steps", "scale", "status", "error_vs_ed", "mean_sigma"};
        for(const auto &r : st.rows)
            t.add_row({std::to_string(r.steps), fmt(r.scale), r.ok ? "ok" : "failed", fmt(r.error_vs_ed), fmt(r.mean_sigma)});
        write_atomic(std::filesystem::path(cfg.out) / "sweep.csv", t.str());
        write_atomic(std::filesystem::path(cfg.out) / "config.txt", config_text(cfg));
        for(const auto &r : st.rows)
            if(r.ok)
                write_curve(std::filesystem::path(cfg.out) / ("curve_steps" + std::to_string(r.steps) + "_scale" +
                                                             fmt(r.scale) + ".csv"),
                            r.curve);
    }
    return st;
}

// --- circuit scaling ----------------------------------------------------------------

struct CircuitRow {
    std::string geometry;
    int n_max = 0;
    long circuits = 0;
    std::string note;
};

/// Unique-circuit totals of the full scheme per geometry and maximal cluster size.
inline std::vector<CircuitRow> report_circuit_scaling(const std::vector<int> &n_range, int square_n_max = 100) {
    std::vector<CircuitRow> rows;
    auto total = [](Geometry g, int n, bool lf) {
        Couplings c{0.5, 1.0, lf ? 0.1 : 0.0};
        std::vector<ClusterSpec> specs;
        for(const auto &wc : enumerate_clusters(g, n, c)) specs.push_back(wc.spec);
        CircuitCountOptions o;
        o.lf_correction = lf;
        return count_unique_circuits(specs, o);
    };
    for(int n : n_range) {
        if(n >= 2) {
            rows.push_back({"chain", n, total(Geometry::chain, n, false), ""});
            rows.push_back({"chain_lf", n, total(Geometry::chain, n, true),
                            n == 5 ? "formula value; the published total for this case is 303" : ""});
        }
        if(n >= 4 && n % 2 == 0) rows.push_back({"ladder", n, total(Geometry::ladder, n, false), ""});
    }
    for(int n : n_range)
        if(n >= 4) rows.push_back({"square", n, square_lattice_circuits(n), "rectangles a x b, 2 <= a <= b"});
    if(square_n_max > 0) {
        rows.push_back({"square", square_n_max, square_lattice_circuits(square_n_max), "rectangles a x b, 2 <= a <= b"});
        rows.push_back({"square+strips", square_n_max, square_lattice_circuits(square_n_max, true),
                        "including 1 x b strips"});
    }
    return rows;
}

inline CsvTable circuit_table(const std::vector<CircuitRow> &rows) {
    CsvTable t;
    t.header = {"unique circuits of the full scheme (overlap, Hamiltonian, SQD; +2(2N+1) per cluster with LF)"};
    t.columns = {"geometry", "n_max", "circuits", "note"};
    for(const auto &r : rows) t.add_row({r.geometry, std::to_string(r.n_max), std::to_string(r.circuits), r.note});
    return t;
}

// --- error summary ----------------------------------------------------------------

struct SummaryRow {
    std::string run;
    std::string model;
    std::string solver;
    std::string backend;
    double J = 0.0;
    double hl = 0.0;
    std::uint64_t seed = 0;
    double error_vs_ed = 0.0;
    std::optional<double> error_vs_analytic;
};

/// Mean |ω − ω_ED| (and vs. the closed form where present) for each run
/// directory; runs are listed individually, never averaged.
inline std::vector<SummaryRow> report_error_summary(const std::vector<std::string> &run_dirs) {
    namespace fs = std::filesystem;
    std::vector<SummaryRow> rows;
    std::vector<double> grid;
    for(const auto &d : run_dirs) {
        const fs::path dir = d;
        const auto cfg = load_config((dir / "config.txt").string());
        const auto curve = read_curve(dir / "curve.csv");
        const auto ed = read_curve(dir / "curve_ed.csv");
        if(grid.empty()) grid = curve.k;
        if(curve.k.size() != grid.size())
            throw std::invalid_argument("summary: run " + d + " uses a different k-grid");
        for(std::size_t q = 0; q < grid.size(); ++q)
            if(std::abs(curve.k[q] - grid[q]) > 1e-12)
                throw std::invalid_argument("summary: run " + d + " uses a different k-grid");
        SummaryRow r{d, to_string(cfg.model), to_string(cfg.solver), to_string(cfg.backend), cfg.J, cfg.hl, cfg.seed,
                     mean_abs_difference(curve, ed), std::nullopt};
        if(fs::exists(dir / "curve_analytic.csv")) r.error_vs_analytic = mean_abs_difference(curve, read_curve(dir / "curve_analytic.csv"));
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow &a, const SummaryRow &b) {
        return std::tie(a.model, a.solver, a.J) < std::tie(b.model, b.solver, b.J);
    });
    return rows;
}

inline CsvTable summary_table(const std::vector<SummaryRow> &rows) {
    CsvTable t;
    t.header = {"mean over k of |omega - omega_ref|; each run listed separately"};
    t.columns = {"run", "model", "solver", "backend", "J", "hl", "seed", "error_vs_ed", "error_vs_analytic"};
    for(const auto &r : rows)
        t.add_row({r.run, r.model, r.solver, r.backend, fmt(r.J), fmt(r.hl), std::to_string(r.seed), fmt(r.error_vs_ed),
                   r.error_vs_analytic ? fmt(*r.error_vs_analytic) : ""});
    return t;
}

// --- Monte-Carlo convergence --------------------------------------------------------

/// Measures the configured clusters once (shot backend) and tabulates mean EOTM
/// against the Monte-Carlo sample count.
inline std::vector<ConvergenceRow> run_mc_convergence(const ExperimentConfig &cfg, const std::vector<long> &counts,
                                                      const RunOptions &o = {}) {
    cfg.validate();
    ExperimentConfig cc = cfg;
    cc.backend = BackendKind::shots;
    const auto prepared = prepare_clusters(cc, o);
    std::vector<ClusterSolution> sol(prepared.size());
    parallel_for(prepared.size(), o.jobs, [&](std::size_t i) { sol[i] = measure_cluster(prepared[i], cc); });
    McConfig mc{0, derive_seed(cc.seed, "mc"), o.jobs, 0.01};
    auto rows = mc_convergence_study(cluster_inputs(sol), k_grid(cc.k_points), counts, mc);
    if(o.write) {
        CsvTable t;
        t.header = {"Monte-Carlo convergence for " + cc.model_label(), "shots: " + std::to_string(cc.shots)};
        t.columns = {"M_mc", "mean_eotm"};
        for(const auto &r : rows) t.add_row({std::to_string(r.samples), fmt(r.mean_eotm)});
        write_atomic(std::filesystem::path(cfg.out) / "mc_convergence.csv", t.str());
        write_atomic(std::filesystem::path(cfg.out) / "config.txt", config_text(cc));
    }
    return rows;
}

} // namespace nlceqa
