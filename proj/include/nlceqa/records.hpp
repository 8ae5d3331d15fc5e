#pragma once

#include "state.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

/// One estimated expectation value.
struct MeasurementRecord {
    double value = 0.0;
    long shots = 0; ///< 0 means exact (infinite-shot) evaluation
    double sigma = 0.0;
    std::string label;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const MeasurementRecord &r) {
    return {{"label", r.label}, {"value", r.value}, {"sigma", r.sigma}, {"shots", r.shots}, {"seed", r.seed}};
}

inline MeasurementRecord record_from_json(const nlohmann::json &j) {
    return {j.at("value").get<double>(), j.at("shots").get<long>(), j.at("sigma").get<double>(),
            j.at("label").get<std::string>(), j.at("seed").get<std::uint64_t>()};
}

/// Root-sum-square combination of independent σ.
inline double rss(std::initializer_list<double> s) {
    double a = 0;
    for(double v : s) a += v * v;
    return std::sqrt(a);
}

enum class MatrixRole { hamiltonian, overlap };

inline std::string to_string(MatrixRole r) { return r == MatrixRole::hamiltonian ? "hamiltonian" : "overlap"; }

/// N x N matrix estimate with independent σ on real and imaginary parts.
struct MatrixEstimate {
    MatrixRole role = MatrixRole::hamiltonian;
    Mat value;
    RMat sigma_re;
    RMat sigma_im;
    std::vector<MeasurementRecord> records; ///< raw circuit records, in acquisition order

    MatrixEstimate() = default;
    MatrixEstimate(MatrixRole r, Mat v) : role(r), value(std::move(v)) {
        sigma_re = RMat::Zero(value.rows(), value.cols());
        sigma_im = RMat::Zero(value.rows(), value.cols());
    }

    [[nodiscard]] Eigen::Index n() const { return value.rows(); }
    [[nodiscard]] bool exact() const { return sigma_re.isZero(0.0) && sigma_im.isZero(0.0); }
};

inline nlohmann::json to_json(const MatrixEstimate &m) {
    auto grid = [&](auto &&f) {
        auto rows = nlohmann::json::array();
        for(Eigen::Index i = 0; i < m.n(); ++i) {
            auto row = nlohmann::json::array();
            for(Eigen::Index j = 0; j < m.n(); ++j) row.push_back(f(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    return {{"role", to_string(m.role)},
            {"n", m.n()},
            {"re", grid([&](auto i, auto j) { return m.value(i, j).real(); })},
            {"im", grid([&](auto i, auto j) { return m.value(i, j).imag(); })},
            {"sigma_re", grid([&](auto i, auto j) { return m.sigma_re(i, j); })},
            {"sigma_im", grid([&](auto i, auto j) { return m.sigma_im(i, j); })}};
}

inline MatrixEstimate matrix_from_json(const nlohmann::json &j) {
    const auto role = j.at("role").get<std::string>();
    if(role != "hamiltonian" && role != "overlap") throw std::invalid_argument("matrix file: unknown role " + role);
    const auto n = j.at("n").get<Eigen::Index>();
    MatrixEstimate m(role == "hamiltonian" ? MatrixRole::hamiltonian : MatrixRole::overlap, Mat::Zero(n, n));
    for(Eigen::Index a = 0; a < n; ++a)
        for(Eigen::Index b = 0; b < n; ++b) {
            const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
            m.value(a, b) = cplx(j.at("re").at(ua).at(ub).get<double>(), j.at("im").at(ua).at(ub).get<double>());
            m.sigma_re(a, b) = j.at("sigma_re").at(ua).at(ub).get<double>();
            m.sigma_im(a, b) = j.at("sigma_im").at(ua).at(ub).get<double>();
        }
    return m;
}

/// Complex scalar estimate with independent σ on both parts.
struct ComplexEstimate {
    cplx value = 0.0;
    double sigma_re = 0.0;
    double sigma_im = 0.0;
};

/// The 2N+1 sector-crossing overlaps needed for the Δ correction (all carry the
/// common CX-test prefactor): ⟨Φ0|U|Φj⟩ (row), ⟨Φi|U|Φ0⟩ (column), ⟨Φ0|U|Φ0⟩.
struct CorrectionTerms {
    std::vector<ComplexEstimate> from_ground; ///< index j: ⟨Φ0|U|Φj⟩
    std::vector<ComplexEstimate> to_ground;   ///< index i: ⟨Φi|U|Φ0⟩
    ComplexEstimate ground;                   ///< ⟨Φ0|U|Φ0⟩
};

} // namespace nlceqa
