#pragma once

#include <nlceqa/nlceqa.hpp>

#include <random>

namespace nlceqa::testing {

inline double max_abs(const Mat &m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

/// Haar-ish random unitary via QR of a complex Gaussian matrix.
inline Mat random_unitary(Eigen::Index d, std::uint64_t seed) {
    Philox4x32 rng(seed);
    std::normal_distribution<double> g;
    Mat A(d, d);
    for(Eigen::Index i = 0; i < d; ++i)
        for(Eigen::Index j = 0; j < d; ++j) A(i, j) = cplx(g(rng), g(rng));
    Eigen::HouseholderQR<Mat> qr(A);
    Mat Q = qr.householderQ();
    const Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for(Eigen::Index j = 0; j < d; ++j) Q.col(j) *= std::polar(1.0, std::arg(R(j, j)));
    return Q;
}

inline Circuit dense_circuit(int n, const Mat &U) {
    std::vector<int> all(static_cast<std::size_t>(n));
    for(int q = 0; q < n; ++q) all[static_cast<std::size_t>(q)] = q;
    Circuit c(n);
    c.add(Gate::unitary(U, all));
    return c;
}

inline std::vector<double> random_params(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Philox4x32 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> p(n);
    for(auto &v : p) v = u(rng);
    return p;
}

inline Mat random_matrix(Eigen::Index n, std::uint64_t seed) {
    Philox4x32 rng(seed);
    std::normal_distribution<double> g;
    Mat A(n, n);
    for(Eigen::Index i = 0; i < n; ++i)
        for(Eigen::Index j = 0; j < n; ++j) A(i, j) = cplx(g(rng), g(rng));
    return A;
}

/// U mapping |Φ0> -> ground state and |Φ_i> -> the ED 1QP states (as a dense circuit).
inline Circuit ed_unitary(const ClusterSpec &spec) { return ed_circuit(spec); }

} // namespace nlceqa::testing
