#pragma once

#include "ansatz.hpp"
#include "ed.hpp"
#include "rng.hpp"
#include "simulator.hpp"

#include <ceres/ceres.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

enum class CostKind { variance_1qp, energy_gs };

inline std::string to_string(CostKind k) { return k == CostKind::variance_1qp ? "variance_1qp" : "energy_gs"; }

struct CostSpec {
    CostKind kind = CostKind::variance_1qp;
    Observable target;
    ClusterSpec cluster;
    /// Weight of the added ground-state energy term (variance kind only).
    double ground_weight = 0.0;
    int layers = 0; ///< 0: ⌈N/2⌉

    static CostSpec variance(const ClusterSpec &c, double ground_weight = 0.0) {
        return {CostKind::variance_1qp, build_tfim(c), c, ground_weight, 0};
    }
    static CostSpec energy(const ClusterSpec &c) { return {CostKind::energy_gs, build_tfim(c), c, 0.0, 0}; }

    [[nodiscard]] HvaAnsatz ansatz() const {
        return make_hva(target, layers > 0 ? layers : default_layers(cluster.sites));
    }
};

struct TrainResult {
    std::vector<double> params;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int restart = -1;
    std::uint64_t seed = 0;
    bool converged = false;
    int failed_restarts = 0;
};

struct TrainOptions {
    double fd_step = 1e-5;
    double gradient_tolerance = 1e-7;
    int max_iterations = 5000;
};

/// Columns U|Φ_i^[1]>, i = 0..N-1.
inline Mat one_qp_states(const Circuit &U) {
    const int n = U.n;
    const auto d = Eigen::Index{1} << n;
    Mat chi = Mat::Zero(d, n);
    for(int i = 0; i < n; ++i) chi(static_cast<Eigen::Index>(one_flip_index(i)), i) = 1.0;
    for(const auto &g : detail::all_gates(U))
        for(int i = 0; i < n; ++i) detail::apply_gate(chi.col(i).data(), static_cast<std::uint64_t>(d), g);
    return chi;
}

/// Σ_i ‖H χ_i‖² − Σ_ij |<χ_i|H|χ_j>|² for orthonormal columns χ.
inline double variance_cost(const Mat &chi, const Observable &H) {
    Mat Hchi(chi.rows(), chi.cols());
    for(Eigen::Index i = 0; i < chi.cols(); ++i) Hchi.col(i) = apply_observable(H, chi.col(i));
    const Mat block = chi.adjoint() * Hchi;
    return Hchi.squaredNorm() - block.squaredNorm();
}

inline double cost_variance_1qp(const Circuit &U, const Observable &H) { return variance_cost(one_qp_states(U), H); }

inline double cost_variance_1qp(std::span<const double> params, const ClusterSpec &spec) {
    const auto H = build_tfim(spec);
    return cost_variance_1qp(build_hva(H, params), H);
}

/// <Φ^[0]|U† H U|Φ^[0]>.
inline double cost_energy(const Circuit &U, const Observable &H) {
    const auto psi = run_pure(U, QuantumState::zero(U.n));
    return pauli_expectation(psi, H);
}

inline double cost_energy(std::span<const double> params, const ClusterSpec &spec) {
    const auto H = build_tfim(spec);
    return cost_energy(build_hva(H, params), H);
}

/// Value of a cost specification. With a ground-state weight w the variance cost
/// becomes C_var + w (C_E + |H|_1), which stays non-negative.
inline double evaluate_cost(const CostSpec &cs, const HvaAnsatz &a, std::span<const double> params) {
    const Circuit U = build_hva(a, params);
    if(cs.kind == CostKind::energy_gs) return cost_energy(U, cs.target);
    double c = cost_variance_1qp(U, cs.target);
    if(cs.ground_weight > 0) c += cs.ground_weight * (cost_energy(U, cs.target) + cs.target.coefficient_norm());
    return c;
}

namespace detail {

class FiniteDifferenceCost final : public ceres::FirstOrderFunction {
  public:
    FiniteDifferenceCost(const CostSpec &cs, HvaAnsatz a, double h) : cs_(cs), a_(std::move(a)), h_(h) {}

    bool Evaluate(const double *x, double *cost, double *gradient) const override {
        const auto n = a_.param_count();
        std::vector<double> p(x, x + n);
        *cost = evaluate_cost(cs_, a_, p);
        if(!std::isfinite(*cost)) {
            nan_seen = true;
            return false;
        }
        if(gradient) {
            for(std::size_t k = 0; k < n; ++k) {
                const double x0 = p[k];
                p[k] = x0 + h_;
                const double fp = evaluate_cost(cs_, a_, p);
                p[k] = x0 - h_;
                const double fm = evaluate_cost(cs_, a_, p);
                p[k] = x0;
                gradient[k] = (fp - fm) / (2 * h_);
                if(!std::isfinite(gradient[k])) {
                    nan_seen = true;
                    return false;
                }
            }
        }
        return true;
    }
    int NumParameters() const override { return static_cast<int>(a_.param_count()); }

    mutable bool nan_seen = false;

  private:
    const CostSpec &cs_;
    HvaAnsatz a_;
    double h_;
};

} // namespace detail

/// Best-of-restarts BFGS on the exact cost with central-difference gradients.
/// Restart r starts from θ ~ U[-0.1, 0.1] drawn with derive_seed(seed, r).
/// A restart that produces a non-finite cost is dropped.
inline TrainResult train(const CostSpec &cs, int restarts, std::uint64_t seed, const TrainOptions &opt = {}) {
    if(restarts < 1) throw std::invalid_argument("train: restarts must be >= 1");
    if(cs.ground_weight < 0) throw std::invalid_argument("train: negative ground-state weight");
    const HvaAnsatz a = cs.ansatz();
    TrainResult best;
    best.seed = seed;
    for(int r = 0; r < restarts; ++r) {
        Philox4x32 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::uniform_real_distribution<double> init(-0.1, 0.1);
        std::vector<double> x(a.param_count());
        for(auto &v : x) v = init(rng);

        auto *fn = new detail::FiniteDifferenceCost(cs, a, opt.fd_step);
        ceres::GradientProblem problem(fn); // takes ownership
        ceres::GradientProblemSolver::Options o;
        o.line_search_direction_type = ceres::BFGS;
        o.max_num_iterations = opt.max_iterations;
        o.gradient_tolerance = opt.gradient_tolerance;
        o.function_tolerance = 1e-300;
        o.parameter_tolerance = 1e-300;
        o.logging_type = ceres::SILENT;
        ceres::GradientProblemSolver::Summary summary;
        ceres::Solve(o, problem, x.data(), &summary);

        const double c = evaluate_cost(cs, a, x);
        if(fn->nan_seen || !std::isfinite(c)) {
            ++best.failed_restarts;
            continue;
        }
        if(c < best.cost) {
            best.params = x;
            best.cost = c;
            best.iterations = static_cast<int>(summary.iterations.size());
            best.restart = r;
            best.converged = summary.termination_type == ceres::CONVERGENCE;
        }
    }
    if(best.restart < 0) throw std::runtime_error("train: every restart produced a non-finite cost");
    return best;
}

/// Parameter file: {"<model>|<cluster>|<kind>|<seed>": {"params": [...], "cost": c, ...}, ...}.
inline std::string parameter_key(const std::string &model, const ClusterSpec &c, CostKind k, std::uint64_t seed) {
    return model + "|" + c.label() + "|" + to_string(k) + "|" + std::to_string(seed);
}

inline void store_parameters(const std::string &path, const std::string &key, const TrainResult &r) {
    nlohmann::json j = nlohmann::json::object();
    if(std::ifstream in(path); in) {
        try {
            in >> j;
        } catch(const nlohmann::json::exception &) {
            j = nlohmann::json::object();
        }
    }
    j[key] = {{"params", r.params}, {"cost", r.cost},     {"iterations", r.iterations},
              {"restart", r.restart}, {"seed", r.seed}, {"converged", r.converged}};
    if(const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if(!out) throw std::runtime_error("store_parameters: cannot write " + tmp);
        out << j.dump(2) << '\n';
    }
    if(std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("store_parameters: rename failed");
}

inline std::optional<TrainResult> load_parameters(const std::string &path, const std::string &key) {
    std::ifstream in(path);
    if(!in) return std::nullopt;
    nlohmann::json j;
    in >> j;
    if(!j.contains(key)) return std::nullopt;
    const auto &e = j.at(key);
    TrainResult r;
    r.params = e.at("params").get<std::vector<double>>();
    r.cost = e.at("cost").get<double>();
    r.iterations = e.value("iterations", 0);
    r.restart = e.value("restart", 0);
    r.seed = e.value("seed", std::uint64_t{0});
    r.converged = e.value("converged", false);
    return r;
}

} // namespace nlceqa
