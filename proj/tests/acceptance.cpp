// Acceptance checks: one PASS/FAIL line per criterion.
//   acceptance [--expect-fail 9,16] [--only 1,2,...]
// Exit status is non-zero only for failures that were not expected.

#include "support.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

using namespace nlceqa;
using nlceqa::testing::dense_circuit;
using nlceqa::testing::max_abs;
using nlceqa::testing::random_params;
using nlceqa::testing::random_unitary;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific << v;
    return os.str();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

MeasurementSettings exact_settings() {
    MeasurementSettings st;
    st.shots = 0;
    return st;
}

std::vector<ClusterSpec> chain_specs(int n_max, Couplings c) {
    std::vector<ClusterSpec> s;
    for(const auto &wc : enumerate_clusters(Geometry::chain, n_max, c)) s.push_back(wc.spec);
    return s;
}

// --- criteria ----------------------------------------------------------------------

Outcome analytic_oracle() {
    const double a = analytic_dispersion(0.3, 0.0), b = analytic_dispersion(0.3, pi), c = analytic_dispersion(1.0, 0.0);
    std::ostringstream d;
    d << std::setprecision(16) << "omega(0.3,0)=" << a << " omega(0.3,pi)=" << b << " omega(1,0)=" << c;
    return {a == 1.4 && b == 2.6 && c == 0.0, d.str()};
}

Outcome nlce_convergence() {
    const auto ks = k_grid(201);
    const auto exact = analytic_curve(0.3, ks);
    std::vector<double> err;
    for(int n = 3; n <= 6; ++n) {
        std::vector<std::pair<Mat, int>> heff;
        for(const auto &wc : enumerate_clusters(Geometry::chain, n, {0.3, 1.0, 0.0}))
            heff.emplace_back(ed_effective_hamiltonian(wc.spec), wc.weight);
        err.push_back(mean_abs_difference(weighted_curve(heff, ks, 1), exact));
    }
    bool mono = true;
    std::string d = "errors N_max=3..6:";
    for(std::size_t i = 0; i < err.size(); ++i) {
        d += " " + sci(err[i]);
        if(i && !(err[i] < err[i - 1])) mono = false;
    }
    return {mono && err[2] < 2e-2, d};
}

Outcome exact_pipeline() {
    std::vector<ClusterSpec> specs;
    for(int n = 2; n <= 6; ++n) {
        specs.push_back(make_chain(n, {0.5, 1.0, 0.0}));
        specs.push_back(make_chain(n, {0.5, 1.0, 0.1}));
    }
    for(int l = 1; l <= 3; ++l) specs.push_back(make_ladder(l, {0.5, 1.0, 0.0}));
    double worst = 0;
    for(const auto &spec : specs) {
        const auto ed = exact_solve(spec);
        const Circuit U = ed_circuit(spec);
        const auto st = exact_settings();
        const auto Hm = hamiltonian_matrix(U, spec, st);
        const auto O = overlap_matrix(U, U, spec, st, spec.couplings.hl != 0.0);
        const auto heff = effective_hamiltonian(Hm, O, ed.ground_energy, spec);
        worst = std::max(worst, (heff.spectrum() - ed.excitation_energies()).cwiseAbs().maxCoeff());
    }
    return {worst < 1e-8, std::to_string(specs.size()) + " clusters, max eigenvalue deviation " + sci(worst)};
}

Outcome gauge_invariance() {
    const auto spec = make_chain(4, {0.6, 1.0, 0.1});
    const Circuit U = ed_circuit(spec);
    const auto st = exact_settings();
    const Mat Hm = hamiltonian_matrix(U, spec, st).value;
    const Mat O = overlap_matrix(U, U, spec, st, true).value;
    const double E0 = exact_solve(spec).ground_energy;
    const Mat ref = effective_matrix(Hm, O, E0);
    Philox4x32 rng(2024);
    double worst = 0;
    for(int t = 0; t < 50; ++t) {
        const cplx z = std::polar(std::pow(10.0, 4 * rng.uniform() - 2), 2 * pi * rng.uniform());
        worst = std::max(worst, max_abs(effective_matrix(Hm, z * O, E0) - ref));
    }
    return {worst < 1e-10, "50 factors z, max |dH_eff| " + sci(worst)};
}

Outcome cluster_additivity() {
    auto reduced = [](Couplings c, bool corr) {
        const auto a = make_chain(2, c), b = make_chain(3, c);
        return max_abs(disconnected_reduced(ed_effective_hamiltonian(disjoint_union(a, b), corr),
                                            ed_effective_hamiltonian(a, corr), ed_effective_hamiltonian(b, corr)));
    };
    const double plain = reduced({0.3, 1.0, 0.0}, true), lf = reduced({0.5, 1.0, 0.1}, true),
                 lf_off = reduced({0.5, 1.0, 0.1}, false);
    return {plain < 1e-8 && lf < 1e-8 && lf_off > 1e-6,
            "TFIM " + sci(plain) + ", TFIM+LF corrected " + sci(lf) + ", uncorrected " + sci(lf_off)};
}

Outcome cx_identity() {
    const auto st = exact_settings();
    const std::vector<std::optional<int>> idx{std::nullopt, 0, 1, 2};
    auto row = [](std::optional<int> q) { return q ? static_cast<Eigen::Index>(one_flip_index(*q)) : Eigen::Index{0}; };
    double worst = 0;
    MeasurementSettings ss;
    ss.shots = 100000;
    int inside = 0, total = 0;
    for(std::uint64_t s = 0; s < 100; ++s) {
        const Mat U = random_unitary(8, 1000 + s);
        const Circuit c = dense_circuit(3, U);
        ss.seed = derive_seed(77, s);
        for(auto i : idx)
            for(auto j : idx) {
                const cplx want = std::conj(U(0, 0)) * U(row(i), row(j));
                for(Part p : {Part::re, Part::im}) {
                    const double w = p == Part::re ? want.real() : want.imag();
                    worst = std::max(worst, std::abs(cx_test(c, i, j, p, st).value - w));
                    const auto r = cx_test(c, i, j, p, ss);
                    inside += std::abs(r.value - w) <= 4 * r.sigma;
                    ++total;
                }
            }
    }
    const double frac = static_cast<double>(inside) / total;
    return {worst < 1e-10 && frac >= 0.99,
            "exact max deviation " + sci(worst) + "; 1e5 shots: " + std::to_string(inside) + "/" + std::to_string(total) +
                " within 4 sigma"};
}

Outcome gamma_identity() {
    const auto st = exact_settings();
    double worst = 0;
    int cases = 0;
    const std::vector<ClusterSpec> specs{make_chain(2, {0.5, 1.0, 0.0}), make_chain(3, {0.4, 1.0, 0.2}),
                                         make_chain(4, {0.7, 1.0, 0.1}), make_ladder(2, {0.5, 1.0, 0.0})};
    for(const auto &spec : specs)
        for(std::uint64_t s = 0; s < 5; ++s) {
            const auto H = build_tfim(spec);
            const Circuit U = dense_circuit(spec.sites, random_unitary(Eigen::Index{1} << spec.sites, 500 + s));
            worst = std::max(worst, max_abs(hamiltonian_matrix(U, H, st).value - statevector_hamiltonian(one_qp_states(U), H)));
            ++cases;
        }
    return {worst < 1e-10, std::to_string(cases) + " random unitaries, max deviation " + sci(worst)};
}

Outcome circuit_counts() {
    const long chain = count_unique_circuits(chain_specs(5, {0.3, 1.0, 0.0}));
    std::vector<ClusterSpec> ladder;
    for(const auto &wc : enumerate_clusters(Geometry::ladder, 8, {0.3, 1.0, 0.0})) ladder.push_back(wc.spec);
    const long lad = count_unique_circuits(ladder);
    const long lf = count_unique_circuits(chain_specs(5, {0.5, 1.0, 0.1}), {true, true});
    return {chain == 230 && lad == 574 && lf == 270,
            "chain " + std::to_string(chain) + ", ladder " + std::to_string(lad) + ", TFIM+LF " + std::to_string(lf) +
                " (published total 303; the per-cluster formula gives 270)"};
}

Outcome sqd() {
    const auto spec4 = make_chain(4, {0.6, 1.0, 0.1});
    const auto H4 = build_tfim(spec4);
    const double e4 = exact_solve(spec4).ground_energy;
    Philox4x32 rng(99);
    double worst_bound = std::numeric_limits<double>::infinity();
    for(int t = 0; t < 1000; ++t) {
        std::vector<std::uint64_t> sub;
        for(std::uint64_t b = 0; b < 16; ++b)
            if(rng() & 1) sub.push_back(b);
        if(sub.empty()) sub.push_back(rng() % 16);
        worst_bound = std::min(worst_bound, subspace_energy(H4, sub) - e4);
    }
    std::vector<std::uint64_t> all(16);
    for(std::uint64_t b = 0; b < 16; ++b) all[b] = b;
    const double full = std::abs(subspace_energy(H4, all) - e4);

    const auto spec = make_chain(5, {0.3, 1.0, 0.0});
    const auto e0 = exact_solve(spec).ground_energy;
    const auto cs = CostSpec::energy(spec);
    const auto tr = train(cs, 3, 1);
    MeasurementSettings st;
    st.shots = 2000;
    st.seed = 11;
    const auto r = sqd_energy(build_hva(cs.ansatz(), tr.params), spec, st);
    const double vqe_err = std::abs(r.energy - e0);
    return {worst_bound >= -1e-9 && full < 1e-10 && vqe_err < 1e-3,
            "min(E_sub - E0) " + sci(worst_bound) + ", full subspace " + sci(full) + ", trained VQE SQD |dE| " + sci(vqe_err) +
                " (subspace " + std::to_string(r.subspace_size) + ")"};
}

Outcome noise_bias() {
    const auto ks = k_grid(201);
    const double pH = 0.2, pE = 0.05, delta = pH - pE;
    std::vector<std::pair<Mat, int>> clean, noisy, collapsed;
    double e_nlce = 0;
    for(const auto &wc : enumerate_clusters(Geometry::chain, 5, {0.5, 1.0, 0.1})) {
        const auto H = build_tfim(wc.spec);
        const auto ed = exact_solve(H, wc.spec);
        const Mat Hm = statevector_hamiltonian(ed.one_qp_states, H);
        const Mat O = modified_overlap_assembly(MatrixEstimate(MatrixRole::overlap, statevector_overlap(ed.one_qp_states)),
                                                statevector_correction(ed.ground_state, ed.one_qp_states))
                          .value;
        clean.emplace_back(effective_matrix(Hm, O, ed.ground_energy), wc.weight);
        noisy.emplace_back(effective_matrix((1 - pH) * Hm, O, (1 - pE) * ed.ground_energy), wc.weight);
        const double eps = 1e-9;
        collapsed.emplace_back(effective_matrix(eps * Hm, O, eps * ed.ground_energy), wc.weight);
        // the Bloch sum of the identity counts the cluster's sites
        e_nlce += wc.weight * wc.spec.sites * ed.ground_energy;
    }
    const auto c = weighted_curve(clean, ks, 1), n = weighted_curve(noisy, ks, 1), z = weighted_curve(collapsed, ks, 1);
    double worst = 0, zero = 0;
    for(std::size_t q = 0; q < ks.size(); ++q) {
        worst = std::max(worst, std::abs(n.omega[0][q] - ((1 - pH) * c.omega[0][q] - delta * e_nlce)));
        zero = std::max(zero, std::abs(z.omega[0][q]));
    }
    return {worst < 1e-10 && -delta * e_nlce > 0 && zero < 1e-8,
            "shift -delta*E0 = " + sci(-delta * e_nlce) + ", max deviation " + sci(worst) + "; p_E = p_H -> 1: max |omega| " +
                sci(zero)};
}

Outcome noise_grid_trend() {
    ExperimentConfig cfg;
    cfg.mc_samples = 1000;
    cfg.out = (std::filesystem::temp_directory_path() / "nlceqa_acceptance_grid").string();
    RunOptions o;
    o.jobs = jobs();
    o.write = false;
    const std::vector<double> scales{0.1, 1.0, 10.0};
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const auto g = run_noise_grid(cfg, {2000}, scales, seeds, o);
    if(!g.all_ok()) return {false, "grid cells failed"};
    // least-squares slope of mean omega against log10(scale), one-sided t-test
    std::vector<double> x, y;
    for(const auto &c : g.cells) {
        x.push_back(std::log10(c.scale));
        y.push_back(c.mean_omega);
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0;
    for(std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    double rss = 0;
    for(std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - my - slope * (x[i] - mx), 2);
    const double se = std::sqrt(rss / (n - 2) / sxx);
    const double t = se > 0 ? slope / se : (slope > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    const double crit = boost::math::quantile(boost::math::students_t(n - 2), 0.95);
    std::string d = "mean omega per scale:";
    for(double s : scales) {
        double m = 0;
        for(const auto &c : g.cells)
            if(c.scale == s) m += c.mean_omega / static_cast<double>(seeds.size());
        d += " " + sci(m);
    }
    d += "; slope " + sci(slope) + ", t = " + sci(t) + " vs t_0.95 = " + sci(crit);
    return {t > crit, d};
}

Outcome asp_study() {
    ExperimentConfig cfg;
    cfg.J = 0.8;
    cfg.mc_samples = 2000;
    RunOptions o;
    o.jobs = jobs();
    o.write = false;
    const std::vector<int> steps{5, 10, 20, 40};
    const auto s = run_sweep_study(cfg, steps, {0.0, 0.01}, o);
    if(!s.all_ok()) return {false, "sweep cells failed"};
    std::map<std::pair<int, double>, const SweepRow *> by;
    for(const auto &r : s.rows) by[{r.steps, r.scale}] = &r;
    bool mono = true;
    std::string d = "noiseless errors:";
    for(std::size_t i = 0; i < steps.size(); ++i) {
        d += " " + sci(by[{steps[i], 0.0}]->error_vs_ed);
        if(i && by[{steps[i], 0.0}]->error_vs_ed > by[{steps[i - 1], 0.0}]->error_vs_ed) mono = false;
    }
    const bool knee = s.knee && *s.knee >= 10 && *s.knee <= 20;
    d += "; knee " + (s.knee ? sci(*s.knee) : std::string("none"));
    const auto &clean = by[{20, 0.0}]->curve, &noisy = by[{20, 0.01}]->curve;
    int outside = 0;
    double worst = 0;
    for(std::size_t q = 0; q < clean.k.size(); ++q) {
        const double z = std::abs(noisy.omega[0][q] - clean.omega[0][q]) / noisy.sigma[0][q];
        worst = std::max(worst, z);
        outside += !(z <= 3.0);
    }
    d += "; 20 steps at scale 0.01: max |d omega|/sigma " + sci(worst);
    return {mono && knee && outside == 0, d};
}

Outcome variance_identities() {
    double worst_form = 0, worst_rot = 0, worst_ed = 0;
    const std::vector<ClusterSpec> specs{make_chain(2, {0.5, 1.0, 0.0}), make_chain(3, {0.6, 1.0, 0.1}),
                                         make_chain(4, {0.4, 1.0, 0.0}), make_ladder(2, {0.5, 1.0, 0.0})};
    int vectors = 0;
    for(std::size_t k = 0; k < specs.size(); ++k) {
        const auto &spec = specs[k];
        const auto H = build_tfim(spec);
        const Mat Hm = observable_matrix(H);
        const auto a = make_hva(H, default_layers(spec.sites));
        const auto d = Hm.rows();
        for(int t = 0; t < 50; ++t, ++vectors) {
            const Mat chi = one_qp_states(build_hva(a, random_params(a.param_count(), derive_seed(k, t), 2.0)));
            const double full = variance_cost(chi, H);
            const Mat leak = (Mat::Identity(d, d) - chi * chi.adjoint()) * Hm * chi;
            worst_form = std::max(worst_form, std::abs(full - leak.squaredNorm()));
            const Mat R = random_unitary(spec.sites, derive_seed(k + 100, t));
            worst_rot = std::max(worst_rot, std::abs(variance_cost(chi * R, H) - full));
        }
        worst_ed = std::max(worst_ed, std::abs(cost_variance_1qp(ed_circuit(spec), H)));
    }
    return {worst_form < 1e-9 && worst_ed < 1e-9 && worst_rot < 1e-9,
            std::to_string(vectors) + " parameter vectors: full vs off-block " + sci(worst_form) + ", rotation " +
                sci(worst_rot) + ", ED block-diagonalizers " + sci(worst_ed)};
}

Outcome eotm_calibration() {
    const Observable Z = Observable(1).add(1.0, "Z");
    double worst = 0;
    for(double m : {0.0, 0.5, 0.9})
        for(long M : {500L, 2000L}) {
            Vec v(2);
            v << std::sqrt((1 + m) / 2), std::sqrt((1 - m) / 2);
            const auto state = QuantumState::pure(v);
            double s = 0, s2 = 0;
            const int seeds = 500;
            for(int t = 0; t < seeds; ++t) {
                const double x = sample_expectation(state, Z, M, derive_seed(4242, static_cast<std::uint64_t>(t))).value;
                s += x;
                s2 += x * x;
            }
            const double mean = s / seeds;
            const double sd = std::sqrt((s2 - seeds * mean * mean) / (seeds - 1));
            worst = std::max(worst, std::abs(sd / std::sqrt((1 - m * m) / static_cast<double>(M)) - 1.0));
        }
    return {worst < 0.15, "max relative deviation of empirical spread " + sci(worst)};
}

Outcome mc_convergence() {
    ExperimentConfig cfg;
    cfg.J = 1.0;
    cfg.solver = SolverKind::ed;
    RunOptions o;
    o.jobs = jobs();
    o.write = false;
    const auto rows = run_mc_convergence(cfg, {10000, 100000}, o);
    const double rel = std::abs(rows[0].mean_eotm / rows[1].mean_eotm - 1.0);
    return {rel < 0.05, "mean EOTM 1e4: " + sci(rows[0].mean_eotm) + ", 1e5: " + sci(rows[1].mean_eotm) + ", relative " + sci(rel)};
}

Outcome delta_magnitude() {
    const auto spec = make_chain(5, {0.5, 1.0, 0.1});
    const auto ed = exact_solve(spec);
    const double d = max_abs(correction_matrix(statevector_correction(ed.ground_state, ed.one_qp_states)));
    // resolving Δ at one standard error with ⟨P⟩ ≈ 0 needs M ≈ 1/Δ² shots
    const double shots = 1.0 / (d * d);
    const bool magnitude = d >= 2e-4 && d <= 8e-4;
    const bool order = std::abs(std::log10(shots / 5e6)) < 1.0;
    return {magnitude && order, "max |Delta| " + sci(d) + " (target 4e-4), shots to resolve " + sci(shots) + " (target 5e6)"};
}

std::set<int> parse_ids(const std::string &s) {
    std::set<int> out;
    std::stringstream ss(s);
    for(std::string t; std::getline(ss, t, ',');)
        if(!t.empty()) out.insert(std::stoi(t));
    return out;
}

} // namespace

int main(int argc, char **argv) {
    std::set<int> expect_fail, only;
    for(int a = 1; a < argc; ++a) {
        const std::string arg = argv[a];
        if((arg == "--expect-fail" || arg == "--only") && a + 1 < argc) (arg == "--only" ? only : expect_fail) = parse_ids(argv[++a]);
        else {
            std::cerr << "usage: acceptance [--expect-fail ids] [--only ids]\n";
            return 2;
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"analytic dispersion oracle", analytic_oracle},
        {"NLCE+ED convergence to the closed form", nlce_convergence},
        {"exact pipeline reproduces ED excitations", exact_pipeline},
        {"H_eff invariant under overlap rescaling", gauge_invariance},
        {"cluster additivity on a disconnected cluster", cluster_additivity},
        {"CX-test identity and 4-sigma coverage", cx_identity},
        {"gamma-scheme identity", gamma_identity},
        {"unique circuit counts", circuit_counts},
        {"SQD bound, full subspace and trained VQE", sqd},
        {"noise-bias law", noise_bias},
        {"upward trend over the noise grid", noise_grid_trend},
        {"ASP step study", asp_study},
        {"variance-cost identities", variance_identities},
        {"EOTM calibration", eotm_calibration},
        {"Monte-Carlo convergence", mc_convergence},
        {"statevector Delta magnitude", delta_magnitude}};

    int passed = 0, failed = 0, unexpected = 0;
    for(std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if(!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[i].second();
        } catch(const std::exception &e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool expected = expect_fail.count(id) > 0;
        std::cout << (r.pass ? "PASS " : "FAIL ") << std::setw(2) << id << "  " << criteria[i].first << ": " << r.detail;
        if(!r.pass && expected) std::cout << " [expected]";
        std::cout << " (" << std::fixed << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::endl;
        r.pass ? ++passed : ++failed;
        if(!r.pass && !expected) ++unexpected;
    }
    std::cout << passed << " passed, " << failed << " failed (" << unexpected << " unexpected)" << std::endl;
    return unexpected ? 1 : 0;
}
