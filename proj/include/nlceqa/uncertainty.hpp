#pragma once

#include "concurrency.hpp"
#include "nlce.hpp"
#include "pcat.hpp"
#include "records.hpp"
#include "rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

/// Measured inputs of one cluster entering PCAT, with its NLCE weight.
struct ClusterInputs {
    ClusterSpec spec;
    MatrixEstimate H;
    MatrixEstimate O;
    double E0 = 0.0;
    double E0_sigma = 0.0; ///< h/√M for SQD energies
    int weight = 1;
};

struct McConfig {
    long samples = 10000;
    std::uint64_t seed = 0;
    int jobs = 1;
    double max_failure_fraction = 0.01;
};

struct McResult {
    DispersionCurve curve; ///< central value from unperturbed inputs, σ filled
    long draws = 0;
    long failed = 0; ///< draws rejected by PCAT (singular overlap)
};

class ExcessiveFailureError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int max_cells(const std::vector<ClusterInputs> &in) {
    int m = 1;
    for(const auto &c : in) m = std::max(m, c.spec.sites / c.spec.cell_size());
    return m;
}

inline int common_cell(const std::vector<ClusterInputs> &in) {
    if(in.empty()) throw std::invalid_argument("propagate: no clusters");
    const int cell = in.front().spec.cell_size();
    for(const auto &c : in)
        if(c.spec.cell_size() != cell) throw std::invalid_argument("propagate: clusters of different geometry");
    return cell;
}

/// One perturbed set of inputs → dispersion bands. Hamiltonian: upper triangle
/// (diagonal real) perturbed and mirrored; overlap: every Re/Im entry; E0 Gaussian.
inline std::vector<std::vector<double>> perturbed_bands(const std::vector<ClusterInputs> &in, const BlochSum &bloch,
                                                        std::uint64_t seed, bool perturb) {
    Philox4x32 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Mat> heff;
    heff.reserve(in.size());
    for(const auto &c : in) {
        Mat H = c.H.value, O = c.O.value;
        double E0 = c.E0;
        if(perturb) {
            const auto n = H.rows();
            for(Eigen::Index i = 0; i < n; ++i) {
                H(i, i) = cplx(H(i, i).real() + c.H.sigma_re(i, i) * g(rng), 0.0);
                for(Eigen::Index j = i + 1; j < n; ++j) {
                    const double re = c.H.sigma_re(i, j) * g(rng);
                    const double im = c.H.sigma_im(i, j) * g(rng);
                    H(i, j) += cplx(re, im);
                    H(j, i) = std::conj(H(i, j));
                }
            }
            for(Eigen::Index i = 0; i < O.rows(); ++i)
                for(Eigen::Index j = 0; j < O.cols(); ++j) {
                    const double re = c.O.sigma_re(i, j) * g(rng);
                    const double im = c.O.sigma_im(i, j) * g(rng);
                    O(i, j) += cplx(re, im);
                }
            E0 += c.E0_sigma * g(rng);
        }
        heff.push_back(effective_matrix(H, O, E0));
    }
    std::vector<std::pair<const Mat *, int>> wc;
    for(std::size_t q = 0; q < in.size(); ++q) wc.emplace_back(&heff[q], in[q].weight);
    double imag = 0;
    return bloch.bands(bloch.displacement_sums(wc), imag);
}

/// Sequential per-k accumulation in draw order (results independent of job count).
struct Moments {
    std::vector<std::vector<double>> mean, m2;
    long n = 0;

    Moments(std::size_t bands, std::size_t points)
        : mean(bands, std::vector<double>(points, 0.0)), m2(bands, std::vector<double>(points, 0.0)) {}

    void add(const std::vector<std::vector<double>> &x) {
        ++n;
        for(std::size_t b = 0; b < mean.size(); ++b)
            for(std::size_t q = 0; q < mean[b].size(); ++q) {
                const double d = x[b][q] - mean[b][q];
                mean[b][q] += d / static_cast<double>(n);
                m2[b][q] += d * (x[b][q] - mean[b][q]);
            }
    }

    [[nodiscard]] std::vector<std::vector<double>> stddev() const {
        auto s = m2;
        for(auto &band : s)
            for(auto &v : band) v = n > 1 ? std::sqrt(v / static_cast<double>(n - 1)) : 0.0;
        return s;
    }

    [[nodiscard]] double mean_stddev() const {
        double acc = 0;
        std::size_t cnt = 0;
        for(const auto &band : stddev())
            for(double v : band) {
                acc += v;
                ++cnt;
            }
        return cnt ? acc / static_cast<double>(cnt) : 0.0;
    }
};

/// Runs draws [0, total) in parallel batches and feeds every draw to
/// sink(index, ok, bands) in index order.
template <class Sink>
long run_draws(const std::vector<ClusterInputs> &in, const BlochSum &bloch, const McConfig &cfg, long total, Sink &&sink) {
    constexpr long batch = 512;
    long failed = 0;
    std::vector<std::vector<std::vector<double>>> buf;
    std::vector<char> ok;
    for(long start = 0; start < total; start += batch) {
        const long cnt = std::min(batch, total - start);
        buf.assign(static_cast<std::size_t>(cnt), {});
        ok.assign(static_cast<std::size_t>(cnt), 0);
        parallel_for(static_cast<std::size_t>(cnt), cfg.jobs, [&](std::size_t t) {
            const auto draw = static_cast<std::uint64_t>(start) + t;
            try {
                buf[t] = perturbed_bands(in, bloch, derive_seed(cfg.seed, draw), true);
                ok[t] = 1;
            } catch(const SingularOverlapError &) {
                ok[t] = 0;
            }
        });
        for(long t = 0; t < cnt; ++t) {
            const bool good = ok[static_cast<std::size_t>(t)] != 0;
            if(!good) ++failed;
            sink(start + t, good, buf[static_cast<std::size_t>(t)]);
        }
    }
    return failed;
}

inline void check_failures(long failed, long total, const McConfig &cfg) {
    if(static_cast<double>(failed) > cfg.max_failure_fraction * static_cast<double>(total))
        throw ExcessiveFailureError("Monte-Carlo propagation: " + std::to_string(failed) + " of " +
                                    std::to_string(total) + " draws hit a singular overlap matrix");
}

} // namespace detail

/// Monte-Carlo propagation of measurement σ through PCAT and NLCE. Draw d uses
/// the generator seeded with derive_seed(cfg.seed, d).
inline McResult propagate(const std::vector<ClusterInputs> &in, const std::vector<double> &ks, const McConfig &cfg) {
    if(cfg.samples < 1) throw std::invalid_argument("propagate: M_mc must be >= 1");
    const int cell = detail::common_cell(in);
    const BlochSum bloch(ks, cell, detail::max_cells(in));
    McResult r;
    r.curve.k = ks;
    r.curve.omega = detail::perturbed_bands(in, bloch, 0, false);
    r.curve.n_max = 0;
    for(const auto &c : in) r.curve.n_max = std::max(r.curve.n_max, c.spec.sites);
    r.curve.seeds = {cfg.seed};
    detail::Moments mom(r.curve.omega.size(), ks.size());
    r.draws = cfg.samples;
    r.failed = detail::run_draws(in, bloch, cfg, cfg.samples, [&](long, bool good, const auto &x) {
        if(good) mom.add(x);
    });
    detail::check_failures(r.failed, r.draws, cfg);
    r.curve.sigma = mom.stddev();
    return r;
}

struct ConvergenceRow {
    long samples = 0;
    double mean_eotm = 0.0;
};

/// Mean over k of the per-k σ at each sample count, from nested prefixes of one
/// master sequence of draws. Counts below 2 are skipped (σ undefined).
inline std::vector<ConvergenceRow> mc_convergence_study(const std::vector<ClusterInputs> &in, const std::vector<double> &ks,
                                                        std::vector<long> counts, const McConfig &cfg) {
    for(std::size_t i = 1; i < counts.size(); ++i)
        if(counts[i] < counts[i - 1]) throw std::invalid_argument("mc_convergence_study: sample counts must ascend");
    std::erase_if(counts, [](long c) { return c < 2; });
    if(counts.empty()) return {};
    const int cell = detail::common_cell(in);
    const BlochSum bloch(ks, cell, detail::max_cells(in));
    detail::Moments mom(static_cast<std::size_t>(cell), ks.size());
    std::vector<ConvergenceRow> rows;
    std::size_t next = 0;
    long failed = 0;
    detail::run_draws(in, bloch, cfg, counts.back(), [&](long idx, bool good, const auto &x) {
        if(good) mom.add(x);
        else ++failed;
        while(next < counts.size() && idx + 1 == counts[next]) {
            detail::check_failures(failed, idx + 1, cfg);
            rows.push_back({counts[next], mom.mean_stddev()});
            ++next;
        }
    });
    return rows;
}

} // namespace nlceqa
