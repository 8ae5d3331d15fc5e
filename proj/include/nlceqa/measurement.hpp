#pragma once

#include "ed.hpp"
#include "model.hpp"
#include "pcat.hpp"
#include "records.hpp"
#include "rng.hpp"
#include "simulator.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

class UnresolvedDenominatorError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// How circuits are executed and read out. shots = 0 evaluates exact
/// expectation values of the (possibly noisy) output state.
struct MeasurementSettings {
    long shots = 2000;
    NoiseModel noise;
    std::uint64_t seed = 0;
    bool symmetrize = false; ///< average reflection-related elements of the Hamiltonian matrix
    SamplingOptions sampling;
};

enum class Part { re, im };

inline std::string to_string(Part p) { return p == Part::re ? "Re" : "Im"; }

namespace detail {

inline std::uint64_t label_hash(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for(unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

inline std::uint64_t circuit_seed(const MeasurementSettings &st, const std::string &label) {
    return derive_seed(st.seed, label_hash(label));
}

/// Same strings with every non-identity letter replaced by Z (for readout after a basis layer).
inline Observable to_z_basis(const Observable &group) {
    Observable out(group.num_qubits());
    for(const auto &t : group.terms()) out.add(t.coeff, PauliString(group.num_qubits(), 0, t.string.support()));
    return out;
}

/// Runs `prep` with the group's basis layer appended and estimates the group.
inline GroupEstimate measure_group(const Circuit &prep, const Observable &group, const MeasurementSettings &st,
                                   const std::string &label) {
    Circuit c = prep;
    c.label = label;
    c.measure_basis = group.measurement_basis();
    const auto out = execute(c, QuantumState::zero(c.n), st.noise);
    const auto seed = circuit_seed(st, label);
    auto ge = sample_group(out, to_z_basis(group), st.shots, seed, st.sampling);
    ge.combined.label = label;
    return ge;
}

inline Circuit flip_preamble(int n, int i) {
    Circuit c(n);
    c.add(Gate::x(i));
    return c;
}

/// (|Φ_i> + φ|Φ_j>)/√2 with φ ∈ {1, -1, i, -i} (index 0..3): H_i, phase, CNOT_ij, X_i.
inline Circuit superposition_preamble(int n, int i, int j, int phase) {
    Circuit c(n);
    c.add(Gate::h(i));
    if(phase == 1) c.add(Gate::z(i));
    if(phase == 2) c.add(Gate::s(i));
    if(phase == 3) c.add(Gate::sdg(i));
    c.add(Gate::cnot(i, j));
    c.add(Gate::x(i));
    return c;
}

/// Symmetrizes a Hermitian matrix estimate over site permutations: every element
/// becomes the group average of its images. An element and its transpose are one
/// measurement, so σ follows from the coefficient each distinct upper-triangle
/// entry receives (imaginary parts cancel where an orbit reverses the pair).
inline void symmetrize(MatrixEstimate &m, const std::vector<std::vector<int>> &group) {
    const auto n = m.n();
    const double G = static_cast<double>(group.size());
    MatrixEstimate out = m;
    for(Eigen::Index i = 0; i < n; ++i)
        for(Eigen::Index j = 0; j < n; ++j) {
            std::map<std::pair<Eigen::Index, Eigen::Index>, std::pair<double, double>> coeff;
            cplx sum = 0;
            for(const auto &g : group) {
                const auto a = static_cast<Eigen::Index>(g[static_cast<std::size_t>(i)]);
                const auto b = static_cast<Eigen::Index>(g[static_cast<std::size_t>(j)]);
                sum += m.value(a, b);
                auto &c = coeff[{std::min(a, b), std::max(a, b)}];
                c.first += 1.0 / G;
                c.second += (a <= b ? 1.0 : -1.0) / G;
            }
            double vr = 0, vi = 0;
            for(const auto &[key, c] : coeff) {
                vr += c.first * c.first * m.sigma_re(key.first, key.second) * m.sigma_re(key.first, key.second);
                vi += c.second * c.second * m.sigma_im(key.first, key.second) * m.sigma_im(key.first, key.second);
            }
            out.value(i, j) = sum / G;
            out.sigma_re(i, j) = std::sqrt(vr);
            out.sigma_im(i, j) = std::sqrt(vi);
        }
    out.value = hermitian_part(out.value);
    m = std::move(out);
}

} // namespace detail

/// Hamiltonian matrix A_ij = <Φ_i|U† H U|Φ_j> from the γ-scheme.
/// Diagonal: direct energy of U|Φ_i>. Off-diagonal (i < j): γ_φ on (|Φ_i> + φ|Φ_j>)/√2,
/// Re A_ij = (γ_1 − γ_{−1})/2, Im A_ij = (γ_{−i} − γ_{i})/2; A_ji = conj(A_ij).
/// Every measurement group of H gets its own circuit.
inline MatrixEstimate hamiltonian_matrix(const Circuit &U, const Observable &H, const MeasurementSettings &st,
                                         const std::vector<std::vector<int>> &symmetry = {}) {
    const int n = U.n;
    if(H.num_qubits() != n) throw std::invalid_argument("hamiltonian_matrix: observable width differs from circuit");
    if(!U.measure_basis.empty()) throw std::invalid_argument("hamiltonian_matrix: U must not carry a measurement layer");
    const auto groups = measurement_groups(H);
    MatrixEstimate m(MatrixRole::hamiltonian, Mat::Zero(n, n));

    auto energy = [&](const Circuit &pre, const std::string &tag) {
        Circuit c = pre;
        c.append(U);
        double v = H.identity_coefficient(), var = 0;
        for(std::size_t g = 0; g < groups.size(); ++g) {
            auto ge = detail::measure_group(c, groups[g], st, "H|" + tag + "|g" + std::to_string(g));
            v += ge.combined.value;
            var += ge.combined.sigma * ge.combined.sigma;
            m.records.push_back(ge.combined);
        }
        return std::pair{v, std::sqrt(var)};
    };

    for(int i = 0; i < n; ++i) {
        auto [v, s] = energy(detail::flip_preamble(n, i), std::to_string(i) + "," + std::to_string(i));
        m.value(i, i) = v;
        m.sigma_re(i, i) = s;
    }
    static const char *phase_tag[] = {"+1", "-1", "+i", "-i"};
    for(int i = 0; i < n; ++i)
        for(int j = i + 1; j < n; ++j) {
            double g[4], s[4];
            for(int p = 0; p < 4; ++p)
                std::tie(g[p], s[p]) = energy(detail::superposition_preamble(n, i, j, p),
                                              std::to_string(i) + "," + std::to_string(j) + "|" + phase_tag[p]);
            const cplx a(0.5 * (g[0] - g[1]), 0.5 * (g[3] - g[2]));
            m.value(i, j) = a;
            m.value(j, i) = std::conj(a);
            m.sigma_re(i, j) = m.sigma_re(j, i) = 0.5 * rss({s[0], s[1]});
            m.sigma_im(i, j) = m.sigma_im(j, i) = 0.5 * rss({s[2], s[3]});
        }
    if(st.symmetrize && !symmetry.empty()) detail::symmetrize(m, symmetry);
    return m;
}

inline MatrixEstimate hamiltonian_matrix(const Circuit &U, const ClusterSpec &spec, const MeasurementSettings &st) {
    return hamiltonian_matrix(U, build_tfim(spec), st, reflection_group(spec));
}

/// CX-test. Ancilla = qubit N. H_a, CX(a→j), U, CX(a→i), ancilla X (Re) or Y (Im)
/// readout together with a Z readout of the system. Estimator per shot:
/// (±1 ancilla) × [system = 0…0], so E = Re/Im(<0|U†|0> <Φ_i|U|Φ_j>).
/// i or j = nullopt drops the corresponding CX and substitutes |Φ^[0]>.
inline MeasurementRecord cx_test(const Circuit &U, std::optional<int> i, std::optional<int> j, Part part,
                                 const MeasurementSettings &st) {
    const int n = U.n;
    if(!U.measure_basis.empty()) throw std::invalid_argument("cx_test: U must not carry a measurement layer");
    for(auto q : {i, j})
        if(q && (*q < 0 || *q >= n)) throw std::out_of_range("cx_test: qubit index out of range");
    const int a = n;
    Circuit c(n + 1);
    c.add(Gate::h(a));
    if(j) c.add(Gate::cnot(a, *j));
    c.append(U.widened(n + 1));
    if(i) c.add(Gate::cnot(a, *i));
    c.measure_basis = std::string(static_cast<std::size_t>(n), 'Z') + (part == Part::re ? 'X' : 'Y');
    auto idx = [](std::optional<int> q) { return q ? std::to_string(*q) : std::string("0qp"); };
    c.label = "cx|" + to_string(part) + "|" + idx(i) + "," + idx(j);

    const auto out = execute(c, QuantumState::zero(n + 1), st.noise);
    const std::uint64_t abit = std::uint64_t{1} << a, sys = abit - 1;
    MeasurementRecord r;
    r.label = c.label;
    r.seed = detail::circuit_seed(st, c.label);
    r.shots = st.shots;
    if(st.shots == 0) {
        const Eigen::VectorXd p = out.probabilities();
        r.value = p(0) - p(static_cast<Eigen::Index>(abit));
        return r;
    }
    const auto samples = sample_bitstrings(out, st.shots, r.seed);
    double s1 = 0, s2 = 0;
    for(auto b : samples) {
        if(b & sys) continue;
        const double v = (b & abit) ? -1.0 : 1.0;
        s1 += v;
        s2 += 1.0;
    }
    const double M = static_cast<double>(st.shots);
    const double mean = s1 / M;
    r.value = mean;
    r.sigma = std::sqrt(std::max(0.0, s2 / M - mean * mean) / M);
    return r;
}

inline MeasurementRecord cx_test(const Circuit &U, int i, int j, Part part, const MeasurementSettings &st) {
    return cx_test(U, std::optional<int>(i), std::optional<int>(j), part, st);
}

/// Hadamard test of <ψ|U|ψ> with |ψ> = prep|0>: ancilla control on every gate of U
/// (the controlled circuit is what gets noise).
inline MeasurementRecord hadamard_test(const Circuit &U, Part part, const MeasurementSettings &st,
                                       const Circuit *prep = nullptr) {
    const int n = U.n;
    const int a = n;
    Circuit c(n + 1);
    c.add(Gate::h(a));
    if(prep) c.append(prep->widened(n + 1));
    c.append(U.controlled(a, n + 1));
    c.measure_basis = std::string(static_cast<std::size_t>(n), 'I') + (part == Part::re ? 'X' : 'Y');
    c.label = "hadamard|" + to_string(part);
    const auto out = execute(c, QuantumState::zero(n + 1), st.noise);

    Observable za(n + 1);
    za.add(1.0, PauliString::on(n + 1, {{a, 'Z'}}));
    const auto seed = detail::circuit_seed(st, c.label);
    auto r = sample_expectation(out, za, st.shots, seed);
    r.label = c.label;
    return r;
}

/// The 2N+1 overlaps entering Δ, each as a Re/Im pair of CX-tests.
inline CorrectionTerms correction_overlaps(const Circuit &U, const MeasurementSettings &st,
                                           std::vector<MeasurementRecord> *records = nullptr) {
    const int n = U.n;
    auto measure = [&](std::optional<int> i, std::optional<int> j) {
        const auto re = cx_test(U, i, j, Part::re, st);
        const auto im = cx_test(U, i, j, Part::im, st);
        if(records) {
            records->push_back(re);
            records->push_back(im);
        }
        return ComplexEstimate{cplx(re.value, im.value), re.sigma, im.sigma};
    };
    CorrectionTerms c;
    for(int j = 0; j < n; ++j) c.from_ground.push_back(measure(std::nullopt, j));
    for(int i = 0; i < n; ++i) c.to_ground.push_back(measure(i, std::nullopt));
    c.ground = measure(std::nullopt, std::nullopt);
    return c;
}

/// Overlap matrix Õ_ij = <0|U†|0> (<Φ_i|U|Φ_j> − Δ_ij) from CX-tests. The common
/// prefactor is kept (it cancels in the effective Hamiltonian).
inline MatrixEstimate overlap_matrix(const Circuit &U_1qp, const Circuit &U_gs, const ClusterSpec &spec,
                                     const MeasurementSettings &st, bool with_correction,
                                     CorrectionTerms *terms_out = nullptr) {
    const int n = U_1qp.n;
    if(n != spec.sites) throw std::invalid_argument("overlap_matrix: circuit width differs from cluster");
    if(with_correction && !(U_1qp == U_gs))
        throw std::invalid_argument("overlap_matrix: the correction needs one unitary for both sectors");
    MatrixEstimate m(MatrixRole::overlap, Mat::Zero(n, n));
    for(int i = 0; i < n; ++i)
        for(int j = 0; j < n; ++j) {
            const auto re = cx_test(U_1qp, i, j, Part::re, st);
            const auto im = cx_test(U_1qp, i, j, Part::im, st);
            m.value(i, j) = cplx(re.value, im.value);
            m.sigma_re(i, j) = re.sigma;
            m.sigma_im(i, j) = im.sigma;
            m.records.push_back(re);
            m.records.push_back(im);
        }
    if(!with_correction) return m;

    const auto terms = correction_overlaps(U_1qp, st, &m.records);
    const auto &g = terms.ground;
    const double sg = std::hypot(g.sigma_re, g.sigma_im);
    if(std::abs(g.value) <= 3.0 * sg || std::abs(g.value) < 1e-14)
        throw UnresolvedDenominatorError("correction denominator unresolved: |<Φ0|U|Φ0>| = " +
                                         std::to_string(std::abs(g.value)) + ", σ = " + std::to_string(sg));
    if(terms_out) *terms_out = terms;
    auto out = modified_overlap_assembly(m, terms);
    out.records = std::move(m.records);
    return out;
}

// --- exact (statevector) references ---------------------------------------------

/// <χ_i|H|χ_j> for columns χ.
inline Mat statevector_hamiltonian(const Mat &chi, const Observable &H) {
    Mat Hchi(chi.rows(), chi.cols());
    for(Eigen::Index j = 0; j < chi.cols(); ++j) Hchi.col(j) = apply_observable(H, chi.col(j));
    return chi.adjoint() * Hchi;
}

/// <Φ_i|χ_j>.
inline Mat statevector_overlap(const Mat &chi) {
    const auto n = chi.cols();
    Mat O(n, n);
    for(Eigen::Index i = 0; i < n; ++i) O.row(i) = chi.row(static_cast<Eigen::Index>(one_flip_index(static_cast<int>(i))));
    return O;
}

/// Exact correction overlaps from χ_0 = U|Φ^[0]> and χ_j = U|Φ_j>.
inline CorrectionTerms statevector_correction(const Vec &chi0, const Mat &chi) {
    CorrectionTerms c;
    const auto n = chi.cols();
    for(Eigen::Index j = 0; j < n; ++j) c.from_ground.push_back({chi(0, j), 0, 0});
    for(Eigen::Index i = 0; i < n; ++i)
        c.to_ground.push_back({chi0(static_cast<Eigen::Index>(one_flip_index(static_cast<int>(i)))), 0, 0});
    c.ground = {chi0(0), 0, 0};
    return c;
}

// --- SQD ------------------------------------------------------------------------

struct SqdResult {
    std::size_t subspace_size = 0;
    double energy = 0.0;
    double sigma = 0.0; ///< conservative bound h/√M
    long shots = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> basis;
};

/// Lowest eigenvalue of H restricted to span{|b> : b in basis}.
inline double subspace_energy(const Observable &H, std::vector<std::uint64_t> basis) {
    std::sort(basis.begin(), basis.end());
    basis.erase(std::unique(basis.begin(), basis.end()), basis.end());
    if(basis.empty()) throw std::invalid_argument("subspace_energy: empty subspace");
    const auto m = static_cast<Eigen::Index>(basis.size());
    Mat Hs = Mat::Zero(m, m);
    for(Eigen::Index c = 0; c < m; ++c) {
        const auto b = basis[static_cast<std::size_t>(c)];
        for(const auto &t : H.terms()) {
            const auto target = b ^ t.string.xmask();
            auto it = std::lower_bound(basis.begin(), basis.end(), target);
            if(it == basis.end() || *it != target) continue;
            Hs(it - basis.begin(), c) += t.coeff * t.string.phase_on(b);
        }
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(Hs, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

/// Samples prep|0> in the Z basis, deduplicates, and diagonalizes H on the sampled set.
/// shots = 0 uses the exact support of the output state.
inline SqdResult sqd_energy(const Circuit &prep, const Observable &H, double h, const MeasurementSettings &st) {
    if(st.shots < 0) throw std::invalid_argument("sqd_energy: negative shot count");
    Circuit c = prep;
    c.label = "sqd";
    const auto out = execute(c, QuantumState::zero(c.n), st.noise);
    SqdResult r;
    r.shots = st.shots;
    r.seed = detail::circuit_seed(st, c.label);
    if(st.shots == 0) {
        const Eigen::VectorXd p = out.probabilities();
        for(Eigen::Index b = 0; b < p.size(); ++b)
            if(p(b) > 1e-14) r.basis.push_back(static_cast<std::uint64_t>(b));
    } else {
        r.basis = sample_bitstrings(out, st.shots, r.seed);
        std::sort(r.basis.begin(), r.basis.end());
        r.basis.erase(std::unique(r.basis.begin(), r.basis.end()), r.basis.end());
    }
    r.subspace_size = r.basis.size();
    r.energy = subspace_energy(H, r.basis);
    r.sigma = st.shots > 0 ? std::abs(h) / std::sqrt(static_cast<double>(st.shots)) : 0.0;
    return r;
}

inline SqdResult sqd_energy(const Circuit &prep, const ClusterSpec &spec, const MeasurementSettings &st) {
    return sqd_energy(prep, build_tfim(spec), spec.couplings.h, st);
}

// --- unique-circuit accounting ---------------------------------------------------

struct CircuitCountOptions {
    bool lf_correction = false; ///< add the 2(2N+1) Δ-overlap circuits per cluster
    bool sqd = true;            ///< one Z-basis circuit for the ground state
};

/// Per cluster: 2N² overlap circuits (Re, Im) + g(2N² − N) Hamiltonian circuits
/// (4 per off-diagonal pair and 1 per diagonal, per measurement group) + 1 SQD.
inline long circuits_per_cluster(int n, int groups, const CircuitCountOptions &o = {}) {
    const long N = n;
    long c = 2 * N * N + groups * (2 * N * N - N) + (o.sqd ? 1 : 0);
    if(o.lf_correction) c += 2 * (2 * N + 1);
    return c;
}

inline long count_unique_circuits(const std::vector<ClusterSpec> &clusters, const CircuitCountOptions &o = {}) {
    long total = 0;
    for(const auto &c : clusters)
        total += circuits_per_cluster(c.sites, static_cast<int>(measurement_groups(build_tfim(c)).size()), o);
    return total;
}

/// Square-lattice rectangular expansion: every rectangle a x b (a <= b, one per
/// rotation class) with a·b <= N_max. Strips (a = 1) coincide with chain clusters and
/// are only included on request. TFIM without longitudinal field: two groups.
inline long square_lattice_circuits(int n_max, bool include_strips = false) {
    long total = 0;
    for(int a = include_strips ? 1 : 2; a * a <= n_max; ++a)
        for(int b = a; a * b <= n_max; ++b) total += circuits_per_cluster(a * b, 2);
    return total;
}

} // namespace nlceqa
