#pragma once

#include "circuit.hpp"
#include "model.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

/// Layered Hamiltonian variational ansatz, U = Π_l Π_j exp(i θ_{j,l} P_j).
/// Terms keep the observable's order (for TFIM: XX, then Z, then X);
/// parameter index = l * num_terms + j.
struct HvaAnsatz {
    int layers = 1;
    std::vector<PauliString> terms;

    [[nodiscard]] std::size_t num_terms() const { return terms.size(); }
    [[nodiscard]] std::size_t param_count() const { return static_cast<std::size_t>(layers) * terms.size(); }
};

/// ⌈N/2⌉.
constexpr int default_layers(int sites) { return (sites + 1) / 2; }

inline HvaAnsatz make_hva(const Observable &obs, int layers) {
    if(layers < 1) throw std::invalid_argument("HVA: need at least one layer");
    HvaAnsatz a{layers, {}};
    for(const auto &t : obs.terms())
        if(!t.string.is_identity()) a.terms.push_back(t.string);
    if(a.terms.empty()) throw std::invalid_argument("HVA: observable has no non-identity terms");
    return a;
}

inline Circuit build_hva(const HvaAnsatz &a, std::span<const double> params) {
    if(params.size() != a.param_count())
        throw std::invalid_argument("build_hva: expected " + std::to_string(a.param_count()) + " parameters, got " +
                                    std::to_string(params.size()));
    Circuit c(a.terms.front().size(), "hva");
    std::size_t k = 0;
    for(int l = 0; l < a.layers; ++l)
        for(const auto &p : a.terms) c.add(Gate::pauli_exp(p, params[k++]));
    return c;
}

/// Layer count inferred from the parameter count.
inline Circuit build_hva(const Observable &obs, std::span<const double> params) {
    if(obs.empty()) throw std::invalid_argument("build_hva: empty observable");
    const auto terms = make_hva(obs, 1).num_terms();
    if(params.empty() || params.size() % terms != 0)
        throw std::invalid_argument("build_hva: parameter count is not a multiple of the term count");
    return build_hva(make_hva(obs, static_cast<int>(params.size() / terms)), params);
}

/// Discretized sweep H(s) = H0 + s (H - H0), s_m at step midpoints.
struct SweepSchedule {
    int n_steps = 10;
    double dt = 0.0;     ///< <= 0: use default_step_duration
    int trotter_order = 1; ///< 1 (Lie) or 2 (symmetric)

    /// Ramp value for step m = 1..n_steps.
    [[nodiscard]] double ramp(int m) const { return (m - 0.5) / n_steps; }

    void validate() const {
        if(n_steps < 1) throw std::invalid_argument("SweepSchedule: n_steps must be >= 1");
        if(trotter_order != 1 && trotter_order != 2) throw std::invalid_argument("SweepSchedule: Trotter order 1 or 2");
        if(!std::isfinite(dt)) throw std::invalid_argument("SweepSchedule: non-finite dt");
    }
};

/// dt = 1 / (|H0|_1 + |H|_1), with |.|_1 the sum of absolute Pauli coefficients.
inline double default_step_duration(const ClusterSpec &spec) {
    return 1.0 / (build_unperturbed(spec).coefficient_norm() + build_tfim(spec).coefficient_norm());
}

/// Π_m exp(-i H(s_m) dt), each step split over the groups {XX}, {Z}, {X}.
inline Circuit build_asp(const ClusterSpec &spec, const SweepSchedule &sched) {
    sched.validate();
    const double dt = sched.dt > 0 ? sched.dt : default_step_duration(spec);
    const Observable H = build_tfim(spec);
    const Observable H0 = build_unperturbed(spec);

    // Split terms into the three groups; unperturbed coefficients come from H0.
    struct Term {
        PauliString p;
        double c0, c1; // coefficient at s = 0 and s = 1
    };
    std::vector<Term> xx, z, x;
    for(const auto &t : H.terms()) {
        if(t.string.weight() == 2) xx.push_back({t.string, 0.0, t.coeff});
        else if(t.string.zmask() != 0) z.push_back({t.string, 0.0, t.coeff});
        else x.push_back({t.string, 0.0, t.coeff});
    }
    for(auto &t : z)
        for(const auto &u : H0.terms())
            if(u.string == t.p) t.c0 = u.coeff;

    Circuit c(spec.sites, "asp" + std::to_string(sched.n_steps));
    auto slice = [&](const std::vector<Term> &grp, double s, double tau) {
        for(const auto &t : grp) {
            const double coeff = t.c0 + s * (t.c1 - t.c0);
            if(coeff != 0.0) c.add(Gate::pauli_exp(t.p, -tau * coeff));
        }
    };
    for(int m = 1; m <= sched.n_steps; ++m) {
        const double s = sched.ramp(m);
        if(sched.trotter_order == 1) {
            slice(xx, s, dt);
            slice(z, s, dt);
            slice(x, s, dt);
        } else {
            slice(xx, s, dt / 2);
            slice(z, s, dt / 2);
            slice(x, s, dt);
            slice(z, s, dt / 2);
            slice(xx, s, dt / 2);
        }
    }
    return c;
}

} // namespace nlceqa
