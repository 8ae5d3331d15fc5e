#include "support.hpp"

#include <gtest/gtest.h>

using namespace nlceqa;
using nlceqa::testing::ed_unitary;
using nlceqa::testing::max_abs;
using nlceqa::testing::random_matrix;
using nlceqa::testing::random_unitary;

namespace {

Mat random_hermitian(Eigen::Index n, std::uint64_t seed) {
    const Mat A = random_matrix(n, seed);
    return 0.5 * (A + A.adjoint());
}

Eigen::VectorXd sorted_eigs(const Mat &H) { return Eigen::SelfAdjointEigenSolver<Mat>(H, Eigen::EigenvaluesOnly).eigenvalues(); }

} // namespace

TEST(Lowdin, IsometryIsUnitaryAndClosestToOdagger) {
    const Mat O = random_matrix(4, 1);
    const Mat V = lowdin_isometry(O);
    EXPECT_LT(max_abs(V.adjoint() * V - Mat::Identity(4, 4)), 1e-12);
    // polar factor: O† = V P with P = (O O†)^{1/2} Hermitian positive
    const Mat P = V.adjoint() * O.adjoint();
    EXPECT_LT(max_abs(P - P.adjoint()), 1e-12);
    EXPECT_GT(sorted_eigs(P).minCoeff(), 0.0);
    // unitary input is returned as its adjoint
    const Mat U = random_unitary(4, 2);
    EXPECT_LT(max_abs(lowdin_isometry(U) - U.adjoint()), 1e-12);
}

TEST(Lowdin, RefusesSingularOverlap) {
    Mat O = random_matrix(3, 3);
    O.row(2) = O.row(0) * cplx(0.5, 0.1);
    try {
        lowdin_isometry(O);
        FAIL() << "expected SingularOverlapError";
    } catch(const SingularOverlapError &e) {
        EXPECT_GT(e.condition(), 1e4);
    }
    EXPECT_THROW(lowdin_isometry(Mat::Zero(2, 2)), SingularOverlapError);
    EXPECT_THROW(lowdin_isometry(Mat(2, 3)), std::invalid_argument);
}

TEST(EffectiveMatrix, RecoversSpectrumOfRotatedBlock) {
    // eigenstates |Φ_i> mixed by a unitary W: O = W, A = W† (D + E0) W
    const Mat D = Eigen::Vector3d(0.5, 1.2, 2.0).cast<cplx>().asDiagonal();
    const Mat W = random_unitary(3, 7);
    const Mat Hm = W.adjoint() * (D + Mat::Identity(3, 3) * -4.0) * W;
    const Mat Heff = effective_matrix(Hm, W, -4.0);
    EXPECT_LT((sorted_eigs(Heff) - Eigen::Vector3d(0.5, 1.2, 2.0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EffectiveMatrix, GaugeInvariantUnderComplexScaling) {
    const Mat Hm = random_hermitian(4, 10);
    const Mat O = random_matrix(4, 11);
    const Mat ref = effective_matrix(Hm, O, -1.5);
    Philox4x32 rng(12);
    for(int t = 0; t < 20; ++t) {
        const cplx z = std::polar(0.01 + 10 * rng.uniform(), 6.283 * rng.uniform());
        EXPECT_LT(max_abs(effective_matrix(Hm, z * O, -1.5) - ref), 1e-10);
    }
}

TEST(EffectiveMatrix, NoiseBiasLaw) {
    const auto spec = make_chain(4, {0.5, 1.0, 0.0});
    const auto ed = exact_solve(spec);
    const Mat chi = ed.one_qp_states;
    const auto H = build_tfim(spec);
    const Mat Hm = statevector_hamiltonian(chi, H), O = statevector_overlap(chi);
    const Mat Heff = effective_matrix(Hm, O, ed.ground_energy);
    const double pH = 0.2, pE = 0.05;
    const Mat noisy = effective_matrix((1 - pH) * Hm, O, (1 - pE) * ed.ground_energy);
    const Mat law = (1 - pH) * Heff - (pH - pE) * ed.ground_energy * Mat::Identity(4, 4);
    EXPECT_LT(max_abs(noisy - law), 1e-12);
    // equal contraction toward 1 collapses the excitations
    EXPECT_LT(max_abs(effective_matrix(1e-9 * Hm, O, 1e-9 * ed.ground_energy)), 1e-8);
}

TEST(EffectiveHamiltonian, ExactPipelineReproducesEd) {
    for(const auto &spec : {make_chain(4, {0.3, 1.0, 0.0}), make_chain(3, {0.5, 1.0, 0.1}), make_ladder(2, {0.6, 1.0, 0.0})}) {
        const auto ed = exact_solve(spec);
        const Mat Heff = ed_effective_hamiltonian(spec);
        EXPECT_LT((sorted_eigs(Heff) - ed.excitation_energies()).cwiseAbs().maxCoeff(), 1e-10) << spec.label();
    }
}

TEST(EffectiveHamiltonian, RolesAndSizesAreChecked) {
    const auto spec = make_chain(2, {0.3, 1.0, 0.0});
    MatrixEstimate Hm(MatrixRole::hamiltonian, Mat::Identity(2, 2)), O(MatrixRole::overlap, Mat::Identity(2, 2));
    EXPECT_NO_THROW(effective_hamiltonian(Hm, O, 0.0, spec));
    EXPECT_THROW(effective_hamiltonian(O, Hm, 0.0, spec), std::invalid_argument);
    EXPECT_THROW(effective_hamiltonian(Hm, O, 0.0, make_chain(3, {})), std::invalid_argument);
    EXPECT_THROW(effective_matrix(Mat::Identity(2, 2), Mat::Identity(3, 3), 0.0), std::invalid_argument);
    const auto j = to_json(effective_hamiltonian(Hm, O, -1.0, spec));
    EXPECT_EQ(j.at("n").get<int>(), 2);
    EXPECT_EQ(j.at("provenance").at("E0").get<double>(), -1.0);
}

TEST(Correction, MatrixAndSigmaPropagation) {
    CorrectionTerms c;
    c.from_ground = {{cplx(0.1, 0.02), 0.01, 0.02}, {cplx(-0.05, 0.0), 0.03, 0.01}};
    c.to_ground = {{cplx(0.2, -0.1), 0.02, 0.01}, {cplx(0.03, 0.04), 0.01, 0.01}};
    c.ground = {cplx(0.9, 0.1), 0.01, 0.005};
    const Mat D = correction_matrix(c);
    EXPECT_NEAR(std::abs(D(1, 0) - c.from_ground[0].value * c.to_ground[1].value / c.ground.value), 0.0, 1e-15);

    MatrixEstimate raw(MatrixRole::overlap, Mat::Identity(2, 2));
    raw.sigma_re.setConstant(0.001);
    raw.sigma_im.setConstant(0.002);
    const auto out = modified_overlap_assembly(raw, c);
    EXPECT_LT(max_abs(out.value - (Mat::Identity(2, 2) - D)), 1e-15);

    // first-order σ against a finite-difference Jacobian
    auto f = [&](const CorrectionTerms &t) { return correction_matrix(t)(0, 1); };
    double vr = 0.001 * 0.001, vi = 0.002 * 0.002;
    auto perturb = [&](ComplexEstimate &e) {
        const cplx base = e.value, h = 1e-7;
        e.value = base + h;
        const cplx dre = (f(c) - D(0, 1)) / h.real();
        e.value = base + cplx(0, 1) * h;
        const cplx dim = (f(c) - D(0, 1)) / h.real();
        e.value = base;
        vr += std::norm(dre.real() * e.sigma_re) + std::norm(dim.real() * e.sigma_im);
        vi += std::norm(dre.imag() * e.sigma_re) + std::norm(dim.imag() * e.sigma_im);
    };
    perturb(c.from_ground[1]);
    perturb(c.to_ground[0]);
    perturb(c.ground);
    EXPECT_NEAR(out.sigma_re(0, 1), std::sqrt(vr), 1e-6 * std::sqrt(vr));
    EXPECT_NEAR(out.sigma_im(0, 1), std::sqrt(vi), 1e-6 * std::sqrt(vi));

    c.ground.value = 0.0;
    EXPECT_THROW(correction_matrix(c), std::invalid_argument);
    EXPECT_THROW(modified_overlap_assembly(MatrixEstimate(MatrixRole::hamiltonian, Mat::Identity(2, 2)), c),
                 std::invalid_argument);
}

TEST(Correction, WithoutItTheLongitudinalFieldBiasesHeff) {
    const auto spec = make_chain(4, {0.5, 1.0, 0.1});
    const auto ed = exact_solve(spec);
    const Mat with = ed_effective_hamiltonian(spec, true), without = ed_effective_hamiltonian(spec, false);
    EXPECT_LT((sorted_eigs(with) - ed.excitation_energies()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GT(max_abs(with - without), 1e-6);
    // at h_l = 0 the sectors decouple and the correction vanishes identically
    const auto z = make_chain(4, {0.5, 1.0, 0.0});
    EXPECT_LT(max_abs(ed_effective_hamiltonian(z, true) - ed_effective_hamiltonian(z, false)), 1e-12);
}

TEST(Correction, MeasuredPipelineMatchesEdEigenvalues) {
    const auto spec = make_chain(3, {0.5, 1.0, 0.1});
    const auto ed = exact_solve(spec);
    const Circuit U = ed_unitary(spec);
    MeasurementSettings st;
    st.shots = 0;
    const auto Hm = hamiltonian_matrix(U, spec, st);
    const auto O = overlap_matrix(U, U, spec, st, true);
    const auto heff = effective_hamiltonian(Hm, O, ed.ground_energy, spec);
    EXPECT_LT((heff.spectrum() - ed.excitation_energies()).cwiseAbs().maxCoeff(), 1e-10);
}
