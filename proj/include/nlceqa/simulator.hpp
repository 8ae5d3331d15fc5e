#pragma once

#include "circuit.hpp"
#include "records.hpp"
#include "rng.hpp"
#include "state.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

/// Gate-level depolarizing noise. Effective rates are p * scale.
struct NoiseModel {
    double p1 = 0.0;
    double p2 = 0.0;
    double scale = 1.0;

    static NoiseModel none() { return {0.0, 0.0, 1.0}; }
    /// Emulator reference rates.
    static NoiseModel reference(double scale = 1.0) { return {0.003, 0.01, scale}; }

    [[nodiscard]] double rate1() const { return p1 * scale; }
    [[nodiscard]] double rate2() const { return p2 * scale; }
    [[nodiscard]] bool is_noiseless() const { return rate1() == 0.0 && rate2() == 0.0; }

    void validate() const {
        for(double p : {rate1(), rate2()})
            if(!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("NoiseModel: effective rate " + std::to_string(p) + " outside [0, 1]");
    }
};

namespace detail {

inline std::uint64_t bit(int q) { return std::uint64_t{1} << q; }

inline Mat single_qubit_matrix(GateKind k) {
    const double r = 1.0 / std::sqrt(2.0);
    Mat m(2, 2);
    switch(k) {
        case GateKind::H: m << r, r, r, -r; break;
        case GateKind::X: m << 0, 1, 1, 0; break;
        case GateKind::Z: m << 1, 0, 0, -1; break;
        case GateKind::S: m << 1, 0, 0, cplx(0, 1); break;
        case GateKind::Sdg: m << 1, 0, 0, cplx(0, -1); break;
        default: throw std::logic_error("single_qubit_matrix: not a single-qubit kind");
    }
    return m;
}

/// Applies a gate in place to a contiguous amplitude array of length d.
inline void apply_gate(cplx *psi, std::uint64_t d, const Gate &g) {
    const std::uint64_t cmask = g.control ? bit(*g.control) : 0;
    auto active = [cmask](std::uint64_t b) { return (b & cmask) == cmask; };

    switch(g.kind) {
        case GateKind::H:
        case GateKind::X:
        case GateKind::Z:
        case GateKind::S:
        case GateKind::Sdg: {
            const Mat m = single_qubit_matrix(g.kind);
            const auto tb = bit(g.targets[0]);
            for(std::uint64_t b = 0; b < d; ++b) {
                if((b & tb) || !active(b)) continue;
                const cplx a0 = psi[b], a1 = psi[b | tb];
                psi[b] = m(0, 0) * a0 + m(0, 1) * a1;
                psi[b | tb] = m(1, 0) * a0 + m(1, 1) * a1;
            }
            break;
        }
        case GateKind::CNOT: {
            const auto cb = bit(g.targets[0]), tb = bit(g.targets[1]);
            for(std::uint64_t b = 0; b < d; ++b)
                if((b & cb) && !(b & tb) && active(b)) std::swap(psi[b], psi[b | tb]);
            break;
        }
        case GateKind::PauliExp: {
            // exp(iθP) = cos θ + i sin θ P, with P|b> = ph(b)|b ^ x>.
            const double c = std::cos(g.angle), s = std::sin(g.angle);
            const auto x = g.pauli.xmask();
            const cplx is(0.0, s);
            if(x == 0) {
                for(std::uint64_t b = 0; b < d; ++b)
                    if(active(b)) psi[b] *= c + is * g.pauli.phase_on(b);
                break;
            }
            for(std::uint64_t b = 0; b < d; ++b) {
                const auto bx = b ^ x;
                if(bx < b || !active(b)) continue;
                const cplx a = psi[b], ax = psi[bx];
                psi[b] = c * a + is * g.pauli.phase_on(bx) * ax;
                psi[bx] = c * ax + is * g.pauli.phase_on(b) * a;
            }
            break;
        }
        case GateKind::Unitary: {
            const Mat &m = *g.matrix;
            const auto k = g.targets.size();
            const std::uint64_t dim = std::uint64_t{1} << k;
            std::uint64_t tmask = 0;
            for(int q : g.targets) tmask |= bit(q);
            std::vector<std::uint64_t> offs(dim);
            for(std::uint64_t j = 0; j < dim; ++j) {
                std::uint64_t o = 0;
                for(std::size_t t = 0; t < k; ++t)
                    if(j & (std::uint64_t{1} << t)) o |= bit(g.targets[t]);
                offs[j] = o;
            }
            Vec in(static_cast<Eigen::Index>(dim)), out;
            for(std::uint64_t b = 0; b < d; ++b) {
                if((b & tmask) || !active(b)) continue;
                for(std::uint64_t j = 0; j < dim; ++j) in(static_cast<Eigen::Index>(j)) = psi[b | offs[j]];
                out = m * in;
                for(std::uint64_t j = 0; j < dim; ++j) psi[b | offs[j]] = out(static_cast<Eigen::Index>(j));
            }
            break;
        }
    }
}

/// rho -> U rho U^dagger: U on every column, then once more on the columns of the adjoint.
inline void apply_gate(Mat &rho, const Gate &g) {
    const auto d = static_cast<std::uint64_t>(rho.rows());
    for(Eigen::Index j = 0; j < rho.cols(); ++j) apply_gate(rho.col(j).data(), d, g);
    rho = rho.adjoint().eval();
    for(Eigen::Index j = 0; j < rho.cols(); ++j) apply_gate(rho.col(j).data(), d, g);
}

/// Basis-change gates mapping X or Y eigenstates onto Z eigenstates.
inline std::vector<Gate> basis_change(const std::string &basis) {
    std::vector<Gate> out;
    for(std::size_t q = 0; q < basis.size(); ++q) {
        const int qi = static_cast<int>(q);
        if(basis[q] == 'X') out.push_back(Gate::h(qi));
        else if(basis[q] == 'Y') {
            out.push_back(Gate::sdg(qi));
            out.push_back(Gate::h(qi));
        } else if(basis[q] != 'Z' && basis[q] != 'I')
            throw std::invalid_argument(std::string("basis_change: bad letter ") + basis[q]);
    }
    return out;
}

inline std::vector<Gate> all_gates(const Circuit &c) {
    std::vector<Gate> gs = c.gates;
    if(!c.measure_basis.empty()) {
        if(static_cast<int>(c.measure_basis.size()) != c.n)
            throw std::invalid_argument("Circuit: measurement layer width mismatch");
        for(auto &g : basis_change(c.measure_basis)) gs.push_back(std::move(g));
    }
    return gs;
}

} // namespace detail

/// Local depolarizing channel on the qubits in `support_mask`:
/// rho -> (1-p) rho + p (1_S / 2^k) ⊗ tr_S rho.
inline void depolarize(Mat &rho, std::uint64_t support_mask, double p) {
    if(p == 0.0 || support_mask == 0) return;
    const auto d = static_cast<std::uint64_t>(rho.rows());
    const int k = std::popcount(support_mask);
    const double w = p / static_cast<double>(std::uint64_t{1} << k);
    const Mat old = rho;
    rho *= (1.0 - p);
    for(std::uint64_t r = 0; r < d; ++r) {
        if(r & support_mask) continue;
        for(std::uint64_t c = 0; c < d; ++c) {
            if(c & support_mask) continue;
            // partial trace over S at rest indices (r, c)
            cplx tr = 0;
            std::uint64_t t = 0;
            do {
                tr += old(static_cast<Eigen::Index>(r | t), static_cast<Eigen::Index>(c | t));
                t = (t - support_mask) & support_mask;
            } while(t != 0);
            t = 0;
            do {
                rho(static_cast<Eigen::Index>(r | t), static_cast<Eigen::Index>(c | t)) += w * tr;
                t = (t - support_mask) & support_mask;
            } while(t != 0);
        }
    }
}

/// Exact statevector evolution (terminal basis layer included).
inline QuantumState run_pure(const Circuit &circ, const QuantumState &init) {
    if(!init.is_pure()) throw std::invalid_argument("run_pure: initial state must be pure");
    if(init.num_qubits() != circ.n)
        throw std::invalid_argument("run_pure: state has " + std::to_string(init.num_qubits()) + " qubits, circuit " +
                                    std::to_string(circ.n));
    Vec psi = init.vector();
    const auto d = static_cast<std::uint64_t>(psi.size());
    for(const auto &g : detail::all_gates(circ)) detail::apply_gate(psi.data(), d, g);
    return QuantumState::pure(std::move(psi));
}

/// Density-matrix evolution with a depolarizing channel after every gate on its
/// support. Gates on three or more qubits are lowered first, so every native
/// operation carries its own one- or two-qubit rate. Idle qubits are not touched.
inline QuantumState run_noisy(const Circuit &circ, const QuantumState &init, const NoiseModel &noise) {
    noise.validate();
    if(init.num_qubits() != circ.n) throw std::invalid_argument("run_noisy: dimension mismatch");
    Mat rho = init.to_density();
    for(const auto &g : detail::all_gates(circ)) {
        std::vector<Gate> parts;
        if(g.qubits(circ.n).size() > 2 && g.kind == GateKind::PauliExp) parts = decompose(g, circ.n);
        else parts = {g};
        for(const auto &p : parts) {
            detail::apply_gate(rho, p);
            const auto qs = p.qubits(circ.n);
            std::uint64_t mask = 0;
            for(int q : qs) mask |= detail::bit(q);
            // Dense or multi-controlled leftovers get the two-qubit rate on their whole support.
            depolarize(rho, mask, qs.size() == 1 ? noise.rate1() : noise.rate2());
        }
    }
    return QuantumState::mixed(std::move(rho));
}

/// Backend selection: density matrix only when noise is present.
inline QuantumState execute(const Circuit &circ, const QuantumState &init, const NoiseModel &noise) {
    if(noise.is_noiseless() && init.is_pure()) return run_pure(circ, init);
    return run_noisy(circ, init, noise);
}

/// Dense unitary of a noiseless circuit (column b = U|b>).
inline Mat circuit_unitary(const Circuit &circ) {
    const auto d = Eigen::Index{1} << circ.n;
    Mat U(d, d);
    for(Eigen::Index b = 0; b < d; ++b)
        U.col(b) = run_pure(circ, QuantumState::basis(circ.n, static_cast<std::uint64_t>(b))).vector();
    return U;
}

/// Born-distributed computational-basis samples (bit q of each value = qubit q).
inline std::vector<std::uint64_t> sample_bitstrings(const QuantumState &state, long shots, std::uint64_t seed) {
    if(shots < 1) throw std::invalid_argument("sample_bitstrings: shots must be >= 1");
    const Eigen::VectorXd p = state.probabilities();
    std::vector<double> cdf(static_cast<std::size_t>(p.size()));
    double acc = 0;
    for(Eigen::Index i = 0; i < p.size(); ++i) cdf[static_cast<std::size_t>(i)] = (acc += p(i));
    Philox4x32 rng(seed);
    std::vector<std::uint64_t> out(static_cast<std::size_t>(shots));
    for(auto &o : out) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if(it == cdf.end()) --it;
        // never land on a zero-probability outcome through roundoff
        while(it != cdf.begin() && p(it - cdf.begin()) == 0.0) --it;
        o = static_cast<std::uint64_t>(it - cdf.begin());
    }
    return out;
}

/// Per-string and combined estimates of one qubit-wise commuting group.
struct GroupEstimate {
    std::vector<MeasurementRecord> per_string;
    MeasurementRecord combined; ///< Σ c_j <P_j>; σ by root-sum-square
    long kept_shots = 0;        ///< shots surviving parity post-selection
};

struct SamplingOptions {
    /// Keep only shots whose global Z parity equals this value (+1/-1). Requires a Z-basis group.
    std::optional<int> postselect_parity;
};

/// Estimates a mutually qubit-wise commuting group in one basis from `shots`
/// Born samples (shots = 0: exact values, σ = 0). Per string σ = sqrt((1 - m²)/M).
inline GroupEstimate sample_group(const QuantumState &state, const Observable &group, long shots, std::uint64_t seed,
                                 const SamplingOptions &opt = {}) {
    if(group.num_qubits() != state.num_qubits()) throw std::invalid_argument("sample_expectation: dimension mismatch");
    if(!group.is_qubitwise_commuting())
        throw std::invalid_argument("sample_expectation: group is not qubit-wise commuting; split into separate circuits");
    if(shots < 0) throw std::invalid_argument("sample_expectation: negative shot count");
    const int n = state.num_qubits();
    GroupEstimate ge;
    ge.combined.shots = shots;
    ge.combined.seed = seed;
    ge.combined.value = group.identity_coefficient();

    if(shots == 0) {
        if(opt.postselect_parity) throw std::invalid_argument("sample_expectation: post-selection needs sampled shots");
        for(const auto &t : group.terms()) {
            if(t.string.is_identity()) continue;
            const double v = pauli_string_expectation(state, t.string).real();
            ge.per_string.push_back({v, 0, 0.0, t.string.str(), seed});
            ge.combined.value += t.coeff * v;
        }
        return ge;
    }

    const std::string basis = group.measurement_basis();
    if(opt.postselect_parity && basis.find_first_of("XY") != std::string::npos)
        throw std::invalid_argument("sample_expectation: parity post-selection requires a Z-basis group");
    Circuit rot(n);
    for(auto &g : detail::basis_change(basis)) rot.add(std::move(g));
    const QuantumState rotated = state.is_pure() ? run_pure(rot, state) : run_noisy(rot, state, NoiseModel::none());
    const auto samples = sample_bitstrings(rotated, shots, seed);

    std::vector<std::uint64_t> kept;
    kept.reserve(samples.size());
    const std::uint64_t all = (n == 64) ? ~0ull : ((std::uint64_t{1} << n) - 1);
    for(auto s : samples) {
        if(opt.postselect_parity) {
            const int par = (std::popcount(s & all) % 2 == 0) ? 1 : -1;
            if(par != *opt.postselect_parity) continue;
        }
        kept.push_back(s);
    }
    ge.kept_shots = static_cast<long>(kept.size());
    if(kept.empty()) throw std::runtime_error("sample_expectation: post-selection discarded every shot");
    const double M = static_cast<double>(kept.size());

    double var = 0;
    for(const auto &t : group.terms()) {
        if(t.string.is_identity()) continue;
        const auto sup = t.string.support();
        long sum = 0;
        for(auto s : kept) sum += (std::popcount(s & sup) % 2 == 0) ? 1 : -1;
        const double m = static_cast<double>(sum) / M;
        const double sig = std::sqrt(std::max(0.0, 1.0 - m * m) / M);
        ge.per_string.push_back({m, static_cast<long>(kept.size()), sig, t.string.str(), seed});
        ge.combined.value += t.coeff * m;
        var += t.coeff * t.coeff * sig * sig;
    }
    ge.combined.shots = static_cast<long>(kept.size());
    ge.combined.sigma = std::sqrt(var);
    return ge;
}

inline MeasurementRecord sample_expectation(const QuantumState &state, const Observable &group, long shots,
                                            std::uint64_t seed, const SamplingOptions &opt = {}) {
    return sample_group(state, group, shots, seed, opt).combined;
}

} // namespace nlceqa
