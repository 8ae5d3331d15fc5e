#pragma once

#include "model.hpp"
#include "records.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace nlceqa {

class SingularOverlapError : public std::runtime_error {
  public:
    SingularOverlapError(const std::string &what, double condition) : std::runtime_error(what), condition_(condition) {}
    [[nodiscard]] double condition() const noexcept { return condition_; }

  private:
    double condition_;
};

/// Relative floor on the eigenvalues of O O† below which the isometry is refused.
inline constexpr double overlap_eigenvalue_floor = 1e-8;

/// V = O† (O O†)^{-1/2}, the isometry closest to O† (symmetric Löwdin orthonormalization).
inline Mat lowdin_isometry(const Mat &O) {
    if(O.rows() != O.cols() || O.rows() == 0) throw std::invalid_argument("lowdin_isometry: need a non-empty square matrix");
    const Mat G = O * O.adjoint();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (G + G.adjoint()));
    if(es.info() != Eigen::Success) throw std::runtime_error("lowdin_isometry: eigensolver failed");
    const Eigen::VectorXd lam = es.eigenvalues();
    const double lmax = lam.maxCoeff(), lmin = lam.minCoeff();
    if(!(lmax > 0) || !(lmin > overlap_eigenvalue_floor * lmax)) {
        const double cond = lmin > 0 ? std::sqrt(lmax / lmin) : std::numeric_limits<double>::infinity();
        throw SingularOverlapError("overlap matrix singular; sector leakage or insufficient shots (condition number " +
                                       std::to_string(cond) + ")",
                                   cond);
    }
    const Mat inv_sqrt = es.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
    return O.adjoint() * inv_sqrt;
}

enum class Provenance { ed, statevector, sampled };

inline std::string to_string(Provenance p) {
    switch(p) {
        case Provenance::ed: return "ED";
        case Provenance::statevector: return "SV";
        case Provenance::sampled: return "sampled";
    }
    return "?";
}

struct EffectiveHamiltonian1QP {
    ClusterSpec spec;
    Mat matrix;       ///< H_eff^[1], Hermitian
    double E0 = 0.0;  ///< ground energy subtracted
    Provenance provenance = Provenance::ed;
    std::string e0_source = "ED"; ///< "SQD" or "ED"
    std::vector<std::uint64_t> seeds;

    [[nodiscard]] Eigen::VectorXd spectrum() const {
        return Eigen::SelfAdjointEigenSolver<Mat>(matrix, Eigen::EigenvaluesOnly).eigenvalues();
    }
};

inline Mat hermitian_part(const Mat &A) { return 0.5 * (A + A.adjoint()); }

/// H_eff = V† Herm(H) V − E0·1 with V = lowdin_isometry(O).
inline Mat effective_matrix(const Mat &H, const Mat &O, double E0) {
    if(H.rows() != O.rows() || H.cols() != O.cols()) throw std::invalid_argument("effective_hamiltonian: size mismatch");
    const Mat V = lowdin_isometry(O);
    Mat Heff = V.adjoint() * hermitian_part(H) * V;
    Heff.diagonal().array() -= E0;
    return hermitian_part(Heff);
}

inline EffectiveHamiltonian1QP effective_hamiltonian(const MatrixEstimate &Hmat, const MatrixEstimate &Omat, double E0,
                                                     const ClusterSpec &spec,
                                                     Provenance prov = Provenance::statevector) {
    if(Hmat.role != MatrixRole::hamiltonian || Omat.role != MatrixRole::overlap)
        throw std::invalid_argument("effective_hamiltonian: matrix roles swapped");
    if(Hmat.n() != spec.sites) throw std::invalid_argument("effective_hamiltonian: matrix size differs from cluster");
    EffectiveHamiltonian1QP out;
    out.spec = spec;
    out.matrix = effective_matrix(Hmat.value, Omat.value, E0);
    out.E0 = E0;
    out.provenance = prov;
    return out;
}

/// Δ_ij = ⟨Φ0|U|Φj⟩⟨Φi|U|Φ0⟩ / ⟨Φ0|U|Φ0⟩.
inline Mat correction_matrix(const CorrectionTerms &c) {
    const auto n = static_cast<Eigen::Index>(c.from_ground.size());
    if(static_cast<Eigen::Index>(c.to_ground.size()) != n) throw std::invalid_argument("correction terms: size mismatch");
    if(c.ground.value == cplx(0.0)) throw std::invalid_argument("correction terms: zero denominator");
    Mat D(n, n);
    for(Eigen::Index i = 0; i < n; ++i)
        for(Eigen::Index j = 0; j < n; ++j)
            D(i, j) = c.from_ground[static_cast<std::size_t>(j)].value * c.to_ground[static_cast<std::size_t>(i)].value /
                      c.ground.value;
    return D;
}

/// Õ_ij = raw_ij − Δ_ij. σ of Δ by first-order propagation through the complex
/// product/quotient, added in quadrature to the raw σ.
inline MatrixEstimate modified_overlap_assembly(const MatrixEstimate &raw, const CorrectionTerms &c) {
    if(raw.role != MatrixRole::overlap) throw std::invalid_argument("modified_overlap_assembly: expects an overlap matrix");
    const Mat D = correction_matrix(c);
    if(D.rows() != raw.n()) throw std::invalid_argument("modified_overlap_assembly: size mismatch");
    MatrixEstimate out = raw;
    out.value -= D;
    const cplx g = c.ground.value;
    for(Eigen::Index i = 0; i < raw.n(); ++i)
        for(Eigen::Index j = 0; j < raw.n(); ++j) {
            const auto &a = c.from_ground[static_cast<std::size_t>(j)];
            const auto &b = c.to_ground[static_cast<std::size_t>(i)];
            // (derivative, input) pairs of f = a b / g
            const std::pair<cplx, const ComplexEstimate *> parts[] = {
                {b.value / g, &a}, {a.value / g, &b}, {-a.value * b.value / (g * g), &c.ground}};
            double vr = raw.sigma_re(i, j) * raw.sigma_re(i, j), vi = raw.sigma_im(i, j) * raw.sigma_im(i, j);
            for(const auto &[d, e] : parts) {
                vr += d.real() * d.real() * e->sigma_re * e->sigma_re + d.imag() * d.imag() * e->sigma_im * e->sigma_im;
                vi += d.imag() * d.imag() * e->sigma_re * e->sigma_re + d.real() * d.real() * e->sigma_im * e->sigma_im;
            }
            out.sigma_re(i, j) = std::sqrt(vr);
            out.sigma_im(i, j) = std::sqrt(vi);
        }
    return out;
}

inline nlohmann::json to_json(const EffectiveHamiltonian1QP &h) {
    auto re = nlohmann::json::array(), im = nlohmann::json::array();
    for(Eigen::Index i = 0; i < h.matrix.rows(); ++i) {
        auto r = nlohmann::json::array(), m = nlohmann::json::array();
        for(Eigen::Index j = 0; j < h.matrix.cols(); ++j) {
            r.push_back(h.matrix(i, j).real());
            m.push_back(h.matrix(i, j).imag());
        }
        re.push_back(std::move(r));
        im.push_back(std::move(m));
    }
    return {{"cluster", h.spec.label()},
            {"n", h.matrix.rows()},
            {"re", std::move(re)},
            {"im", std::move(im)},
            {"provenance",
             {{"source", to_string(h.provenance)}, {"E0", h.E0}, {"E0_source", h.e0_source}, {"seeds", h.seeds}}}};
}

} // namespace nlceqa
