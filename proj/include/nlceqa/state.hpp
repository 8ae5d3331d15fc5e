#pragma once

#include "pauli.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace nlceqa {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;

/// Pure amplitude vector or density matrix over n qubits (basis index bit q = qubit q).
class QuantumState {
  public:
    QuantumState() = default;

    static QuantumState pure(Vec amplitudes) {
        QuantumState s;
        s.n_ = width_of(amplitudes.size());
        s.data_ = std::move(amplitudes);
        return s;
    }
    static QuantumState mixed(Mat rho) {
        if(rho.rows() != rho.cols()) throw std::invalid_argument("density matrix must be square");
        QuantumState s;
        s.n_ = width_of(rho.rows());
        s.data_ = std::move(rho);
        return s;
    }
    static QuantumState basis(int n, std::uint64_t index) {
        Vec v = Vec::Zero(Eigen::Index{1} << n);
        v(static_cast<Eigen::Index>(index)) = 1.0;
        return pure(std::move(v));
    }
    static QuantumState zero(int n) { return basis(n, 0); }
    static QuantumState maximally_mixed(int n) {
        const auto d = Eigen::Index{1} << n;
        return mixed(Mat::Identity(d, d) / static_cast<double>(d));
    }

    [[nodiscard]] int num_qubits() const noexcept { return n_; }
    [[nodiscard]] Eigen::Index dim() const noexcept { return Eigen::Index{1} << n_; }
    [[nodiscard]] bool is_pure() const noexcept { return std::holds_alternative<Vec>(data_); }

    [[nodiscard]] const Vec &vector() const {
        if(!is_pure()) throw std::logic_error("QuantumState: not a pure state");
        return std::get<Vec>(data_);
    }
    [[nodiscard]] Vec &vector() {
        if(!is_pure()) throw std::logic_error("QuantumState: not a pure state");
        return std::get<Vec>(data_);
    }
    [[nodiscard]] const Mat &density() const {
        if(is_pure()) throw std::logic_error("QuantumState: not a density matrix");
        return std::get<Mat>(data_);
    }
    [[nodiscard]] Mat &density() {
        if(is_pure()) throw std::logic_error("QuantumState: not a density matrix");
        return std::get<Mat>(data_);
    }

    /// Density-matrix form (a copy for pure states).
    [[nodiscard]] Mat to_density() const {
        if(is_pure()) {
            const auto &v = vector();
            return v * v.adjoint();
        }
        return density();
    }

    /// Computational-basis probabilities.
    [[nodiscard]] Eigen::VectorXd probabilities() const {
        if(is_pure()) return vector().cwiseAbs2();
        return density().diagonal().real().cwiseMax(0.0);
    }

    /// Checks the state invariants (unit norm, or unit trace + Hermitian + PSD).
    [[nodiscard]] bool is_valid(double tol = 1e-10) const {
        if(is_pure()) return std::abs(vector().norm() - 1.0) <= tol;
        const auto &r = density();
        if(std::abs(r.trace() - cplx(1.0)) > tol) return false;
        if((r - r.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
        Eigen::SelfAdjointEigenSolver<Mat> es(r, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() >= -tol;
    }

  private:
    static int width_of(Eigen::Index d) {
        int n = 0;
        while((Eigen::Index{1} << n) < d) ++n;
        if((Eigen::Index{1} << n) != d) throw std::invalid_argument("state dimension is not a power of two");
        return n;
    }

    int n_ = 0;
    std::variant<Vec, Mat> data_;
};

/// out = P psi for a Pauli string.
inline void apply_pauli(const PauliString &p, const Vec &psi, Vec &out) {
    out.resize(psi.size());
    const auto x = p.xmask();
    for(Eigen::Index b = 0; b < psi.size(); ++b) {
        const auto ub = static_cast<std::uint64_t>(b);
        out(static_cast<Eigen::Index>(ub ^ x)) = p.phase_on(ub) * psi(b);
    }
}

/// out = O psi.
inline Vec apply_observable(const Observable &obs, const Vec &psi) {
    Vec out = Vec::Zero(psi.size()), tmp;
    for(const auto &t : obs.terms()) {
        apply_pauli(t.string, psi, tmp);
        out += t.coeff * tmp;
    }
    return out;
}

/// Dense matrix of an observable.
inline Mat observable_matrix(const Observable &obs) {
    const auto d = Eigen::Index{1} << obs.num_qubits();
    Mat m = Mat::Zero(d, d);
    for(const auto &t : obs.terms()) {
        const auto x = t.string.xmask();
        for(Eigen::Index b = 0; b < d; ++b) {
            const auto ub = static_cast<std::uint64_t>(b);
            m(static_cast<Eigen::Index>(ub ^ x), b) += t.coeff * t.string.phase_on(ub);
        }
    }
    return m;
}

/// <P> for a single string, exact.
inline cplx pauli_string_expectation(const QuantumState &s, const PauliString &p) {
    if(p.size() != s.num_qubits()) throw std::invalid_argument("pauli_expectation: dimension mismatch");
    const auto x = p.xmask();
    cplx acc = 0;
    if(s.is_pure()) {
        const auto &v = s.vector();
        for(Eigen::Index b = 0; b < v.size(); ++b) {
            const auto ub = static_cast<std::uint64_t>(b);
            acc += std::conj(v(static_cast<Eigen::Index>(ub ^ x))) * p.phase_on(ub) * v(b);
        }
    } else {
        // tr(P rho) = Σ_b <b^x| ... : (P rho)_{b', b'} with P|b> = ph |b^x>
        const auto &r = s.density();
        for(Eigen::Index b = 0; b < r.rows(); ++b) {
            const auto ub = static_cast<std::uint64_t>(b);
            acc += p.phase_on(ub) * r(b, static_cast<Eigen::Index>(ub ^ x));
        }
    }
    return acc;
}

/// Exact expectation value of a real observable.
inline double pauli_expectation(const QuantumState &s, const Observable &obs) {
    if(obs.num_qubits() != s.num_qubits()) throw std::invalid_argument("pauli_expectation: dimension mismatch");
    double acc = 0;
    for(const auto &t : obs.terms()) acc += t.coeff * pauli_string_expectation(s, t.string).real();
    return acc;
}

/// Exact expectation of a complex Pauli sum; rejects non-Hermitian operators.
inline double pauli_expectation(const QuantumState &s, const PauliSum &op) {
    if(!op.is_hermitian()) throw std::invalid_argument("pauli_expectation: operator is not Hermitian");
    if(op.num_qubits() != s.num_qubits()) throw std::invalid_argument("pauli_expectation: dimension mismatch");
    cplx acc = 0;
    for(const auto &[str, c] : op.terms()) acc += c * pauli_string_expectation(s, str);
    return acc.real();
}

/// Unitary whose column b equals the given vector for every fixed (b, v) pair;
/// the other columns complete an orthonormal basis (Gram-Schmidt over the
/// computational basis). The fixed vectors must be orthonormal.
inline Mat complete_unitary(int n, const std::vector<std::pair<std::uint64_t, Vec>> &fixed) {
    const auto d = Eigen::Index{1} << n;
    Mat U = Mat::Zero(d, d);
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    std::vector<Vec> basis;
    for(const auto &[b, v] : fixed) {
        if(v.size() != d || b >= static_cast<std::uint64_t>(d) || used[b])
            throw std::invalid_argument("complete_unitary: bad fixed column");
        U.col(static_cast<Eigen::Index>(b)) = v;
        used[b] = true;
        basis.push_back(v);
    }
    Eigen::Index slot = 0;
    for(Eigen::Index e = 0; e < d && static_cast<Eigen::Index>(basis.size()) < d; ++e) {
        Vec v = Vec::Unit(d, e);
        for(int pass = 0; pass < 2; ++pass)
            for(const auto &u : basis) v -= u * u.dot(v);
        const double nv = v.norm();
        if(nv < 1e-6) continue;
        v /= nv;
        while(used[static_cast<std::size_t>(slot)]) ++slot;
        U.col(slot) = v;
        used[static_cast<std::size_t>(slot)] = true;
        basis.push_back(std::move(v));
    }
    return U;
}

} // namespace nlceqa
