#pragma once

#include "pauli.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nlceqa {

enum class Geometry { chain, ladder, custom };

inline std::string to_string(Geometry g) {
    switch(g) {
        case Geometry::chain: return "chain";
        case Geometry::ladder: return "ladder";
        case Geometry::custom: return "custom";
    }
    return "?";
}

struct Couplings {
    double J = 0.0;  ///< Ising coupling
    double h = 1.0;  ///< transverse field
    double hl = 0.0; ///< longitudinal field
};

using Edge = std::pair<int, int>;

/// Finite cluster: site count, nearest-neighbour edges and couplings.
///
/// Site index equals qubit index. Ladder sites are rung-major:
/// site = 2 * cell + leg, so each rung is a two-site unit cell.
struct ClusterSpec {
    Geometry geometry = Geometry::chain;
    int length = 0; ///< chain sites, or ladder rungs
    int sites = 0;
    Couplings couplings;
    std::vector<Edge> edges;

    [[nodiscard]] std::string label() const {
        switch(geometry) {
            case Geometry::chain: return "1x" + std::to_string(length);
            case Geometry::ladder: return std::to_string(length) + "x2";
            case Geometry::custom: return "custom" + std::to_string(sites);
        }
        return "?";
    }

    /// Sites per unit cell used by the Fourier transform.
    [[nodiscard]] int cell_size() const { return geometry == Geometry::ladder ? 2 : 1; }
};

inline ClusterSpec make_chain(int length, Couplings c) {
    if(length < 1) throw std::invalid_argument("chain needs at least one site");
    ClusterSpec s{Geometry::chain, length, length, c, {}};
    for(int i = 0; i + 1 < length; ++i) s.edges.emplace_back(i, i + 1);
    return s;
}

inline ClusterSpec make_ladder(int rungs, Couplings c) {
    if(rungs < 1) throw std::invalid_argument("ladder needs at least one rung");
    ClusterSpec s{Geometry::ladder, rungs, 2 * rungs, c, {}};
    for(int cell = 0; cell + 1 < rungs; ++cell)
        for(int leg = 0; leg < 2; ++leg) s.edges.emplace_back(2 * cell + leg, 2 * (cell + 1) + leg);
    for(int cell = 0; cell < rungs; ++cell) s.edges.emplace_back(2 * cell, 2 * cell + 1);
    return s;
}

/// Disconnected union A ∪ B; B's sites are shifted by A.sites.
inline ClusterSpec disjoint_union(const ClusterSpec &a, const ClusterSpec &b) {
    ClusterSpec u{Geometry::custom, a.sites + b.sites, a.sites + b.sites, a.couplings, a.edges};
    for(auto [p, q] : b.edges) u.edges.emplace_back(p + a.sites, q + a.sites);
    return u;
}

/// Site permutations that leave the cluster invariant (identity first).
/// Chains: mirror. Ladders: mirror along the legs, leg swap, and both.
inline std::vector<std::vector<int>> reflection_group(const ClusterSpec &s) {
    std::vector<int> id(static_cast<std::size_t>(s.sites));
    for(int i = 0; i < s.sites; ++i) id[static_cast<std::size_t>(i)] = i;
    std::vector<std::vector<int>> group{id};
    if(s.geometry == Geometry::chain) {
        std::vector<int> r(id.size());
        for(int i = 0; i < s.sites; ++i) r[static_cast<std::size_t>(i)] = s.sites - 1 - i;
        if(r != id) group.push_back(r);
    } else if(s.geometry == Geometry::ladder) {
        auto map = [&](bool mirror, bool swap) {
            std::vector<int> r(id.size());
            for(int i = 0; i < s.sites; ++i) {
                int cell = i / 2, leg = i % 2;
                if(mirror) cell = s.length - 1 - cell;
                if(swap) leg = 1 - leg;
                r[static_cast<std::size_t>(i)] = 2 * cell + leg;
            }
            return r;
        };
        for(auto [m, w] : {std::pair{true, false}, {false, true}, {true, true}}) {
            auto r = map(m, w);
            if(std::find(group.begin(), group.end(), r) == group.end()) group.push_back(r);
        }
    }
    return group;
}

/// H = -J Σ_<νμ> X_ν X_μ - h Σ_ν Z_ν - h_l Σ_ν X_ν.
/// Term order: XX terms (edge order), then Z terms, then X terms (omitted when h_l = 0).
inline Observable build_tfim(const ClusterSpec &spec) {
    if(spec.sites < 1) throw std::invalid_argument("build_tfim: cluster has no sites");
    const int n = spec.sites;
    const auto &c = spec.couplings;
    Observable H(n);
    for(auto [a, b] : spec.edges) {
        if(a < 0 || b < 0 || a >= n || b >= n || a == b) throw std::invalid_argument("build_tfim: bad edge");
        H.add(-c.J, PauliString::on(n, {{a, 'X'}, {b, 'X'}}));
    }
    for(int q = 0; q < n; ++q) H.add(-c.h, PauliString::on(n, {{q, 'Z'}}));
    if(c.hl != 0.0)
        for(int q = 0; q < n; ++q) H.add(-c.hl, PauliString::on(n, {{q, 'X'}}));
    return H;
}

/// Unperturbed part H0 = -h Σ Z.
inline Observable build_unperturbed(const ClusterSpec &spec) {
    Observable H0(spec.sites);
    for(int q = 0; q < spec.sites; ++q) H0.add(-spec.couplings.h, PauliString::on(spec.sites, {{q, 'Z'}}));
    return H0;
}

/// Global parity ⊗Z as a single-string observable.
inline Observable parity_operator(int n) {
    PauliString p(n);
    for(int q = 0; q < n; ++q) p.set(q, 'Z');
    return Observable(n).add(1.0, p);
}

/// Closed-form 1QP dispersion of the 1D TFIM, ω(k) = 2 sqrt(h² + J² - 2hJ cos k).
inline double analytic_dispersion(double J, double k, double h = 1.0) {
    // Expanded around the nearer band edge so the gap values at k = 0 and k = pi are exact.
    const double arg = std::cos(k) >= 0.0 ? (h - J) * (h - J) + 4.0 * h * J * std::pow(std::sin(0.5 * k), 2)
                                          : (h + J) * (h + J) - 4.0 * h * J * std::pow(std::cos(0.5 * k), 2);
    return 2.0 * std::sqrt(std::max(0.0, arg));
}

} // namespace nlceqa
