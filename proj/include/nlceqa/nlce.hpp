#pragma once

#include "model.hpp"
#include "state.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace nlceqa {

/// Cluster with its effective NLCE weight in the telescoped sum.
struct WeightedCluster {
    ClusterSpec spec;
    int weight = 1;
};

/// Rectangular expansion reduced to one dimension: the two largest segments
/// survive, with weights +1 and −1.
inline std::vector<WeightedCluster> enumerate_clusters(Geometry g, int n_max, Couplings c = {}) {
    switch(g) {
        case Geometry::chain:
            if(n_max < 2) throw std::invalid_argument("enumerate_clusters: chain needs N_max >= 2");
            return {{make_chain(n_max, c), +1}, {make_chain(n_max - 1, c), -1}};
        case Geometry::ladder:
            if(n_max < 4 || n_max % 2 != 0) throw std::invalid_argument("enumerate_clusters: ladder needs even N_max >= 4");
            return {{make_ladder(n_max / 2, c), +1}, {make_ladder(n_max / 2 - 1, c), -1}};
        case Geometry::custom: break;
    }
    throw std::invalid_argument("enumerate_clusters: unsupported geometry");
}

/// Reduced contribution of a segment with `length` unit cells.
template <class T>
struct ReducedContribution {
    int length = 0;
    T value{};
    int weight = 1; ///< each reduced contribution enters the per-cell sum once
};

namespace detail {

inline Mat embed(const Mat &m, Eigen::Index offset, Eigen::Index size) {
    Mat out = Mat::Zero(size, size);
    out.block(offset, offset, m.rows(), m.cols()) = m;
    return out;
}

inline double embed(double v, Eigen::Index, Eigen::Index) { return v; }

inline Eigen::Index size_of(const Mat &m) { return m.rows(); }
inline Eigen::Index size_of(double) { return 0; }

} // namespace detail

/// Inclusion–exclusion over segments: P̄_L = P_L − Σ_{ℓ<L} Σ_{positions} P̄_ℓ,
/// a length-ℓ segment sitting in L − ℓ + 1 positions of a length-L one.
/// `per_length` must hold every length from 1 to the maximum; matrices are
/// embedded position-wise (cell_size sites per unit cell) before subtraction.
template <class T>
std::vector<ReducedContribution<T>> reduced_contributions(const std::map<int, T> &per_length, int cell_size = 1) {
    if(per_length.empty()) throw std::invalid_argument("reduced_contributions: no clusters");
    const int L = per_length.rbegin()->first;
    for(int l = 1; l <= L; ++l)
        if(!per_length.count(l))
            throw std::invalid_argument("reduced_contributions: missing subcluster of length " + std::to_string(l));
    std::vector<ReducedContribution<T>> out;
    for(int l = 1; l <= L; ++l) {
        T r = per_length.at(l);
        const auto size = detail::size_of(r);
        if constexpr(std::is_same_v<T, Mat>)
            if(size != l * cell_size) throw std::invalid_argument("reduced_contributions: matrix size differs from cluster");
        for(const auto &sub : out)
            for(int pos = 0; pos + sub.length <= l; ++pos) r -= detail::embed(sub.value, pos * cell_size, size);
        out.push_back({l, std::move(r), 1});
    }
    return out;
}

/// Reduced contribution of a disconnected union: H(A ∪ B) minus the embedded parts.
inline Mat disconnected_reduced(const Mat &H_union, const Mat &H_a, const Mat &H_b) {
    const auto na = H_a.rows(), nb = H_b.rows();
    if(H_union.rows() != na + nb) throw std::invalid_argument("disconnected_reduced: size mismatch");
    Mat r = H_union;
    r.topLeftCorner(na, na) -= H_a;
    r.bottomRightCorner(nb, nb) -= H_b;
    return r;
}

/// Uniform k-grid on [−π, π] inclusive.
inline std::vector<double> k_grid(int points = 201) {
    if(points < 2) throw std::invalid_argument("k_grid: need at least two points");
    std::vector<double> k(static_cast<std::size_t>(points));
    for(int i = 0; i < points; ++i) k[static_cast<std::size_t>(i)] = -std::numbers::pi + 2 * std::numbers::pi * i / (points - 1);
    k.front() = -std::numbers::pi;
    k.back() = std::numbers::pi;
    return k;
}

/// M_ab(k) = Σ_{c,c'} e^{ik(c' − c)} H_{(c,a),(c',b)}: Bloch sum over unit cells,
/// sublattice indices a, b carry no phase.
inline Mat bloch_matrix(const Mat &H, double k, int cell_size) {
    const auto m = static_cast<Eigen::Index>(cell_size);
    if(H.rows() % m != 0) throw std::invalid_argument("bloch_matrix: size is not a multiple of the cell");
    const auto cells = H.rows() / m;
    Mat out = Mat::Zero(m, m);
    for(Eigen::Index c = 0; c < cells; ++c)
        for(Eigen::Index cp = 0; cp < cells; ++cp) {
            const cplx ph = std::polar(1.0, k * static_cast<double>(cp - c));
            out += ph * H.block(c * m, cp * m, m, m);
        }
    return out;
}

struct DispersionCurve {
    std::string model;
    std::vector<double> k;
    std::vector<std::vector<double>> omega; ///< [band][k], bands ascending
    std::vector<std::vector<double>> sigma; ///< same layout; empty until propagated
    int n_max = 0;
    std::vector<std::uint64_t> seeds;
    double max_imag = 0.0; ///< largest discarded imaginary residue

    [[nodiscard]] std::size_t bands() const { return omega.size(); }
};

inline constexpr double dispersion_imag_tolerance = 1e-8;

namespace detail {

/// Bands of the (Hermitian) Bloch matrix, ascending. Exact ties put the
/// sublattice-symmetric (bonding) combination first.
inline std::vector<double> bands_of(const Mat &Mk, double &max_imag) {
    const auto m = Mk.rows();
    const double herm = (Mk - Mk.adjoint()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, Mk.cwiseAbs().maxCoeff());
    if(herm > 1e-6 * scale) throw std::runtime_error("dispersion: Bloch matrix is not Hermitian (" + std::to_string(herm) + ")");
    if(m == 1) {
        max_imag = std::max(max_imag, std::abs(Mk(0, 0).imag()));
        return {Mk(0, 0).real()};
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Mk + Mk.adjoint()));
    std::vector<double> e(es.eigenvalues().data(), es.eigenvalues().data() + m);
    if(m == 2 && std::abs(e[1] - e[0]) < 1e-10) {
        const auto v = es.eigenvectors();
        const double c0 = (std::conj(v(0, 0)) * v(1, 0)).real(), c1 = (std::conj(v(0, 1)) * v(1, 1)).real();
        if(c1 > c0) std::swap(e[0], e[1]);
    }
    return e;
}

inline DispersionCurve empty_curve(const std::vector<double> &ks, int bands) {
    DispersionCurve c;
    c.k = ks;
    c.omega.assign(static_cast<std::size_t>(bands), std::vector<double>(ks.size()));
    return c;
}

} // namespace detail

/// ω(k) from reduced contributions: Σ_C Bloch[P̄_C](k), band-diagonalized.
inline DispersionCurve dispersion(const std::vector<ReducedContribution<Mat>> &reduced, const std::vector<double> &ks,
                                  int cell_size = 1) {
    if(reduced.empty()) throw std::invalid_argument("dispersion: no reduced contributions");
    auto curve = detail::empty_curve(ks, cell_size);
    for(std::size_t q = 0; q < ks.size(); ++q) {
        Mat Mk = Mat::Zero(cell_size, cell_size);
        for(const auto &r : reduced) Mk += static_cast<double>(r.weight) * bloch_matrix(r.value, ks[q], cell_size);
        const auto e = detail::bands_of(Mk, curve.max_imag);
        for(int b = 0; b < cell_size; ++b) curve.omega[static_cast<std::size_t>(b)][q] = e[static_cast<std::size_t>(b)];
    }
    curve.n_max = reduced.back().length * cell_size;
    return curve;
}

/// Σ_C w_C H_C as displacement sums S_d = Σ_{c'−c=d} H_{(c,·),(c',·)}, evaluated on a
/// fixed k-grid with a precomputed phase table (the hot path of Monte-Carlo draws).
class BlochSum {
  public:
    BlochSum(std::vector<double> ks, int cell_size, int max_cells)
        : k_(std::move(ks)), cell_(cell_size), maxd_(std::max(0, max_cells - 1)) {
        const int nd = 2 * maxd_ + 1;
        phase_.resize(k_.size() * static_cast<std::size_t>(nd));
        for(std::size_t q = 0; q < k_.size(); ++q)
            for(int d = -maxd_; d <= maxd_; ++d) phase_[q * nd + static_cast<std::size_t>(d + maxd_)] = std::polar(1.0, k_[q] * d);
    }

    [[nodiscard]] const std::vector<double> &k() const { return k_; }
    [[nodiscard]] int cell_size() const { return cell_; }

    /// Displacement sums of Σ_C w_C H_C.
    [[nodiscard]] std::vector<Mat> displacement_sums(const std::vector<std::pair<const Mat *, int>> &clusters) const {
        const auto m = static_cast<Eigen::Index>(cell_);
        std::vector<Mat> S(static_cast<std::size_t>(2 * maxd_ + 1), Mat::Zero(m, m));
        for(const auto &[H, w] : clusters) {
            if(H->rows() % m != 0) throw std::invalid_argument("BlochSum: size is not a multiple of the cell");
            const auto cells = H->rows() / m;
            if(cells - 1 > maxd_) throw std::invalid_argument("BlochSum: cluster larger than the phase table");
            for(Eigen::Index c = 0; c < cells; ++c)
                for(Eigen::Index cp = 0; cp < cells; ++cp)
                    S[static_cast<std::size_t>(cp - c + maxd_)] += static_cast<double>(w) * H->block(c * m, cp * m, m, m);
        }
        return S;
    }

    /// Band energies per k, [band][k].
    [[nodiscard]] std::vector<std::vector<double>> bands(const std::vector<Mat> &S, double &max_imag) const {
        const int nd = 2 * maxd_ + 1;
        std::vector<std::vector<double>> out(static_cast<std::size_t>(cell_), std::vector<double>(k_.size()));
        const auto m = static_cast<Eigen::Index>(cell_);
        for(std::size_t q = 0; q < k_.size(); ++q) {
            Mat Mk = Mat::Zero(m, m);
            for(int d = 0; d < nd; ++d) Mk += phase_[q * static_cast<std::size_t>(nd) + static_cast<std::size_t>(d)] * S[static_cast<std::size_t>(d)];
            const auto e = detail::bands_of(Mk, max_imag);
            for(int b = 0; b < cell_; ++b) out[static_cast<std::size_t>(b)][q] = e[static_cast<std::size_t>(b)];
        }
        return out;
    }

  private:
    std::vector<double> k_;
    int cell_;
    int maxd_;
    std::vector<cplx> phase_;
};

/// ω(k) of Σ_C w_C Bloch[H_C](k).
inline DispersionCurve weighted_dispersion(const std::vector<std::pair<const Mat *, int>> &clusters,
                                           const BlochSum &bloch) {
    DispersionCurve c;
    c.k = bloch.k();
    c.omega = bloch.bands(bloch.displacement_sums(clusters), c.max_imag);
    for(const auto &[H, w] : clusters) c.n_max = std::max(c.n_max, static_cast<int>(H->rows()));
    return c;
}

/// Telescoped form: Bloch[H(L)] − Bloch[H(L−1)] equals the sum of all reduced
/// contributions up to length L.
inline DispersionCurve telescoped_dispersion(const Mat &H_top, const Mat &H_sub, const std::vector<double> &ks,
                                             int cell_size = 1) {
    if(H_top.rows() != H_sub.rows() + cell_size)
        throw std::invalid_argument("telescoped_dispersion: clusters must differ by one cell");
    const BlochSum bloch(ks, cell_size, static_cast<int>(H_top.rows()) / cell_size);
    std::vector<std::pair<const Mat *, int>> cl{{&H_top, +1}};
    if(H_sub.rows() > 0) cl.emplace_back(&H_sub, -1);
    return weighted_dispersion(cl, bloch);
}

/// Ground-state energy per site: Σ_ℓ Ē_ℓ / cell_size.
inline double energy_per_site(const std::map<int, double> &energies, int cell_size = 1) {
    double e = 0;
    for(const auto &r : reduced_contributions(energies, cell_size)) e += r.value;
    return e / cell_size;
}

/// mean_k |a(k) − b(k)| over all bands.
inline double mean_abs_difference(const DispersionCurve &a, const DispersionCurve &b) {
    if(a.k.size() != b.k.size() || a.bands() != b.bands()) throw std::invalid_argument("curves do not share a grid");
    for(std::size_t q = 0; q < a.k.size(); ++q)
        if(std::abs(a.k[q] - b.k[q]) > 1e-12) throw std::invalid_argument("curves do not share a grid");
    double s = 0;
    for(std::size_t band = 0; band < a.bands(); ++band)
        for(std::size_t q = 0; q < a.k.size(); ++q) s += std::abs(a.omega[band][q] - b.omega[band][q]);
    return s / static_cast<double>(a.k.size() * a.bands());
}

inline DispersionCurve analytic_curve(double J, const std::vector<double> &ks, double h = 1.0) {
    auto c = detail::empty_curve(ks, 1);
    for(std::size_t q = 0; q < ks.size(); ++q) c.omega[0][q] = analytic_dispersion(J, ks[q], h);
    c.model = "analytic";
    return c;
}

} // namespace nlceqa
