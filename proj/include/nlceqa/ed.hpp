#pragma once

#include "model.hpp"
#include "state.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

class DegenerateGroundStateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Undressed 1QP basis state index: a single flipped spin on site i.
constexpr std::uint64_t one_flip_index(int site) { return 1ull << site; }

/// Full spectrum plus the adiabatically identified 0QP state and 1QP sector.
struct EDResult {
    Eigen::VectorXd eigenvalues; ///< ascending
    Mat eigenvectors;            ///< columns, computational basis
    double ground_energy = 0.0;  ///< E^[0]
    Vec ground_state;            ///< |Ψ^[0]>
    Eigen::VectorXd one_qp_energies; ///< E_i^[1], ascending
    Mat one_qp_states;               ///< columns |Ψ_i^[1]>

    [[nodiscard]] Eigen::VectorXd excitation_energies() const {
        return (one_qp_energies.array() - ground_energy).matrix();
    }
};

struct EDOptions {
    int tracking_steps = 20;
    double degeneracy_tol = 1e-9; ///< relative to h
};

namespace detail {

struct Spectrum {
    Eigen::VectorXd values;
    Mat vectors;
};

inline Spectrum diagonalize(const Mat &H) {
    // TFIM matrices are real; use the real solver when possible.
    if(H.imag().cwiseAbs().maxCoeff() == 0.0) {
        Eigen::SelfAdjointEigenSolver<RMat> es(H.real());
        if(es.info() != Eigen::Success) throw std::runtime_error("exact_solve: eigensolver failed");
        return {es.eigenvalues(), es.eigenvectors().cast<cplx>()};
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    if(es.info() != Eigen::Success) throw std::runtime_error("exact_solve: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Indices of the `count` eigenvectors with the largest weight inside span(previous).
inline std::vector<Eigen::Index> best_overlap(const Mat &vectors, const Mat &previous, Eigen::Index count) {
    const Eigen::VectorXd weight = (previous.adjoint() * vectors).cwiseAbs2().colwise().sum().transpose();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(weight.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return weight(a) > weight(b); });
    idx.resize(static_cast<std::size_t>(count));
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

/// Diagonalizes `obs` on the cluster and labels the 0QP and 1QP sectors by
/// continuation along H(s) = H0 + s (obs - H0), s: 0 -> 1, H0 = -h Σ Z.
/// The tracked object at each step is the sector subspace, so degeneracies
/// inside a sector (exact at s = 0) are harmless.
inline EDResult exact_solve(const Observable &obs, const ClusterSpec &spec, const EDOptions &opt = {}) {
    const int n = spec.sites;
    if(n < 1 || n > 12) throw std::invalid_argument("exact_solve: supports 1..12 sites");
    if(obs.num_qubits() != n) throw std::invalid_argument("exact_solve: observable width differs from cluster");
    const Mat H = observable_matrix(obs);
    const Mat H0 = observable_matrix(build_unperturbed(spec));
    const auto d = H.rows();

    Mat sector1 = Mat::Zero(d, n);
    for(int i = 0; i < n; ++i) sector1(static_cast<Eigen::Index>(one_flip_index(i)), i) = 1.0;
    Mat sector0 = Mat::Zero(d, 1);
    sector0(0, 0) = 1.0;

    detail::Spectrum sp;
    std::vector<Eigen::Index> idx0, idx1;
    const int steps = std::max(1, opt.tracking_steps);
    for(int m = 1; m <= steps; ++m) {
        const double s = static_cast<double>(m) / steps;
        sp = detail::diagonalize(H0 + s * (H - H0));
        idx0 = detail::best_overlap(sp.vectors, sector0, 1);
        idx1 = detail::best_overlap(sp.vectors, sector1, n);
        Mat next0(d, 1), next1(d, n);
        next0.col(0) = sp.vectors.col(idx0[0]);
        for(int i = 0; i < n; ++i) next1.col(i) = sp.vectors.col(idx1[static_cast<std::size_t>(i)]);
        sector0 = std::move(next0);
        sector1 = std::move(next1);
    }

    EDResult r;
    r.eigenvalues = sp.values;
    r.eigenvectors = sp.vectors;
    r.ground_energy = sp.values(0);
    if(idx0[0] != 0)
        throw std::runtime_error("exact_solve: adiabatic 0QP state is not the ground state (level crossing)");
    const double tol = opt.degeneracy_tol * std::max(1.0, std::abs(spec.couplings.h));
    const bool perturbed = (H - H0).cwiseAbs().maxCoeff() > 0.0;
    if(perturbed && d > 1 && sp.values(1) - sp.values(0) < tol)
        throw DegenerateGroundStateError("exact_solve: degenerate ground state (gap " +
                                         std::to_string(sp.values(1) - sp.values(0)) + ")");
    r.ground_state = sp.vectors.col(0);
    r.one_qp_energies.resize(n);
    r.one_qp_states.resize(d, n);
    for(int i = 0; i < n; ++i) {
        r.one_qp_energies(i) = sp.values(idx1[static_cast<std::size_t>(i)]);
        r.one_qp_states.col(i) = sp.vectors.col(idx1[static_cast<std::size_t>(i)]);
    }
    return r;
}

inline EDResult exact_solve(const ClusterSpec &spec, const EDOptions &opt = {}) {
    return exact_solve(build_tfim(spec), spec, opt);
}

} // namespace nlceqa
