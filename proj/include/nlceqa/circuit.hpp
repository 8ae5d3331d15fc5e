#pragma once

#include "pauli.hpp"
#include "state.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

enum class GateKind { H, X, Z, S, Sdg, CNOT, PauliExp, Unitary };

inline std::string to_string(GateKind k) {
    switch(k) {
        case GateKind::H: return "H";
        case GateKind::X: return "X";
        case GateKind::Z: return "Z";
        case GateKind::S: return "S";
        case GateKind::Sdg: return "Sdg";
        case GateKind::CNOT: return "CNOT";
        case GateKind::PauliExp: return "PauliExp";
        case GateKind::Unitary: return "Unitary";
    }
    return "?";
}

/// One gate. PauliExp(P, θ) = exp(iθP). An optional control qubit promotes
/// any gate to its controlled version. Unitary holds a dense 2^k x 2^k matrix
/// on `targets` (matrix index bit j <-> targets[j]); oracles and tests only.
struct Gate {
    GateKind kind = GateKind::H;
    std::vector<int> targets; ///< CNOT: {control, target}
    PauliString pauli;        ///< PauliExp only
    double angle = 0.0;       ///< PauliExp only
    std::optional<int> control;
    std::shared_ptr<const Mat> matrix; ///< Unitary only

    static Gate h(int q) { return {GateKind::H, {q}, {}, 0.0, {}, {}}; }
    static Gate x(int q) { return {GateKind::X, {q}, {}, 0.0, {}, {}}; }
    static Gate z(int q) { return {GateKind::Z, {q}, {}, 0.0, {}, {}}; }
    static Gate s(int q) { return {GateKind::S, {q}, {}, 0.0, {}, {}}; }
    static Gate sdg(int q) { return {GateKind::Sdg, {q}, {}, 0.0, {}, {}}; }
    static Gate cnot(int c, int t) { return {GateKind::CNOT, {c, t}, {}, 0.0, {}, {}}; }
    static Gate pauli_exp(const PauliString &p, double theta) {
        if(!std::isfinite(theta)) throw std::invalid_argument("PauliExp: non-finite angle");
        return {GateKind::PauliExp, p.support_qubits(), p, theta, {}, {}};
    }
    static Gate unitary(Mat m, std::vector<int> on) {
        if(m.rows() != m.cols() || m.rows() != (Eigen::Index{1} << on.size()))
            throw std::invalid_argument("Unitary gate: matrix does not match target count");
        return {GateKind::Unitary, std::move(on), {}, 0.0, {}, std::make_shared<const Mat>(std::move(m))};
    }

    [[nodiscard]] Gate controlled_by(int c) const {
        if(control) throw std::invalid_argument("gate already controlled");
        Gate g = *this;
        g.control = c;
        return g;
    }

    /// Qubits acted on, including the control.
    [[nodiscard]] std::vector<int> qubits(int n) const {
        (void)n;
        std::set<int> qs(targets.begin(), targets.end());
        if(control) qs.insert(*control);
        return {qs.begin(), qs.end()};
    }

    friend bool operator==(const Gate &a, const Gate &b) {
        if(a.kind != b.kind || a.targets != b.targets || a.control != b.control) return false;
        if(a.kind == GateKind::PauliExp) return a.pauli == b.pauli && a.angle == b.angle;
        if(a.kind == GateKind::Unitary) return *a.matrix == *b.matrix;
        return true;
    }
};

/// Ordered gate list on n qubits. `measure_basis` holds one letter per qubit
/// (I/Z: computational, X, Y) applied as a terminal basis-change layer.
struct Circuit {
    int n = 0;
    std::vector<Gate> gates;
    std::string measure_basis;
    std::string label;

    Circuit() = default;
    explicit Circuit(int num_qubits, std::string lbl = {}) : n(num_qubits), label(std::move(lbl)) {}

    Circuit &add(Gate g) {
        for(int q : g.qubits(n))
            if(q < 0 || q >= n) throw std::out_of_range("Circuit: gate target " + std::to_string(q) + " >= " + std::to_string(n));
        if(g.control && std::find(g.targets.begin(), g.targets.end(), *g.control) != g.targets.end())
            throw std::invalid_argument("Circuit: control qubit coincides with a target");
        if(std::set<int>(g.targets.begin(), g.targets.end()).size() != g.targets.size())
            throw std::invalid_argument("Circuit: repeated target qubit");
        if(g.kind == GateKind::PauliExp && g.pauli.size() != n)
            throw std::invalid_argument("Circuit: Pauli exponential width mismatch");
        gates.push_back(std::move(g));
        return *this;
    }

    Circuit &append(const Circuit &other) {
        if(other.n != n) throw std::invalid_argument("Circuit: append width mismatch");
        for(const auto &g : other.gates) gates.push_back(g);
        return *this;
    }

    /// Copy of this circuit acting on a register widened to `width` qubits.
    [[nodiscard]] Circuit widened(int width) const {
        if(width < n) throw std::invalid_argument("Circuit: cannot narrow");
        Circuit c(width, label);
        for(auto g : gates) {
            if(g.kind == GateKind::PauliExp) g.pauli = PauliString(width, g.pauli.xmask(), g.pauli.zmask());
            c.gates.push_back(std::move(g));
        }
        if(!measure_basis.empty()) c.measure_basis = measure_basis + std::string(static_cast<std::size_t>(width - n), 'I');
        return c;
    }

    /// Every gate promoted to its controlled version (control on qubit `ctrl` of a widened register).
    [[nodiscard]] Circuit controlled(int ctrl, int width) const {
        if(!measure_basis.empty()) throw std::invalid_argument("Circuit: cannot control a measurement layer");
        Circuit base = widened(width);
        for(auto &g : base.gates) g = g.controlled_by(ctrl);
        return base;
    }

    friend bool operator==(const Circuit &a, const Circuit &b) {
        return a.n == b.n && a.gates == b.gates && a.measure_basis == b.measure_basis;
    }
};

/// Gate counts after lowering to native one- and two-qubit operations.
struct GateCounts {
    int single = 0;
    int two = 0;
    [[nodiscard]] int total() const { return single + two; }
};

/// Lowers a gate to gates touching at most two qubits (standard Pauli-exponential
/// decomposition: basis change, CNOT ladder, Z rotation, mirrored ladder).
/// Gates already on <= 2 qubits are returned unchanged. Dense gates cannot be lowered.
inline std::vector<Gate> decompose(const Gate &g, int n) {
    const auto qs = g.qubits(n);
    if(qs.size() <= 2) return {g};
    if(g.kind == GateKind::Unitary) throw std::invalid_argument("decompose: dense gate");
    if(g.kind != GateKind::PauliExp)
        throw std::invalid_argument("decompose: controlled " + to_string(g.kind) + " on 3+ qubits unsupported");

    const auto sup = g.pauli.support_qubits();
    std::vector<Gate> pre, ladder, out;
    for(int q : sup) {
        const char c = g.pauli.letter(q);
        if(c == 'X') pre.push_back(Gate::h(q));
        if(c == 'Y') {
            pre.push_back(Gate::sdg(q));
            pre.push_back(Gate::h(q));
        }
    }
    for(std::size_t a = 0; a + 1 < sup.size(); ++a) ladder.push_back(Gate::cnot(sup[a], sup[a + 1]));
    out.insert(out.end(), pre.begin(), pre.end());
    out.insert(out.end(), ladder.begin(), ladder.end());
    Gate rz = Gate::pauli_exp(PauliString::on(n, {{sup.back(), 'Z'}}), g.angle);
    rz.control = g.control;
    out.push_back(rz);
    out.insert(out.end(), ladder.rbegin(), ladder.rend());
    // Undo the basis change: H for X; H then S for Y.
    for(auto it = sup.rbegin(); it != sup.rend(); ++it) {
        const char c = g.pauli.letter(*it);
        if(c == 'X') out.push_back(Gate::h(*it));
        if(c == 'Y') {
            out.push_back(Gate::h(*it));
            out.push_back(Gate::s(*it));
        }
    }
    return out;
}

inline GateCounts count_gates(const Circuit &c) {
    GateCounts gc;
    for(const auto &g : c.gates)
        for(const auto &p : decompose(g, c.n)) (p.qubits(c.n).size() == 1 ? gc.single : gc.two)++;
    return gc;
}

/// Debug export: {"n": N, "gates": [...]}.
inline nlohmann::json to_json(const Circuit &c) {
    auto gates = nlohmann::json::array();
    for(const auto &g : c.gates) {
        nlohmann::json j{{"kind", to_string(g.kind)}, {"targets", g.targets}};
        if(g.kind == GateKind::PauliExp) {
            j["pauli"] = g.pauli.str();
            j["angle"] = g.angle;
        }
        if(g.control) j["control"] = *g.control;
        gates.push_back(std::move(j));
    }
    nlohmann::json out{{"n", c.n}, {"gates", std::move(gates)}};
    if(!c.label.empty()) out["label"] = c.label;
    if(!c.measure_basis.empty()) out["measure_basis"] = c.measure_basis;
    return out;
}

} // namespace nlceqa
