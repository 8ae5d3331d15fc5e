#pragma once

#include "simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlceqa {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { chain, chain_lf, ladder };
enum class SolverKind { ed, vqe, asp };
enum class BackendKind { exact, shots };

inline std::string to_string(ModelKind m) {
    switch(m) {
        case ModelKind::chain: return "chain";
        case ModelKind::chain_lf: return "chain_lf";
        case ModelKind::ladder: return "ladder";
    }
    return "?";
}
inline std::string to_string(SolverKind s) {
    switch(s) {
        case SolverKind::ed: return "ed";
        case SolverKind::vqe: return "vqe";
        case SolverKind::asp: return "asp";
    }
    return "?";
}
inline std::string to_string(BackendKind b) { return b == BackendKind::exact ? "exact" : "shots"; }

/// One experiment. Keys of the config file are the names used in `entries()`.
struct ExperimentConfig {
    ModelKind model = ModelKind::chain;
    double J = 0.3, h = 1.0, hl = 0.0;
    int n_max = 5;
    SolverKind solver = SolverKind::vqe;
    BackendKind backend = BackendKind::exact;
    long shots = 2000;
    double p1 = 0.003, p2 = 0.01, noise_scale = 0.0;
    std::uint64_t seed = 1;
    int k_points = 201;
    long mc_samples = 10000;
    std::string out = "out";
    bool symmetrize = false;
    std::string lf_correction = "auto"; ///< auto | on | off

    int asp_steps = 10;
    int trotter_order = 1;
    double asp_dt = 0.0; ///< <= 0: default step duration

    int vqe_restarts = 3;
    int vqe_layers = 0; ///< 0: ⌈N/2⌉
    double vqe_ground_weight = 1.0;
    int vqe_max_iterations = 5000;
    std::uint64_t vqe_seed = 1; ///< training seed, independent of the measurement seed
    std::string vqe_param_file; ///< empty: <out>/parameters.json

    std::vector<long> grid_shots{2000};
    std::vector<double> grid_scales{0.0, 0.1, 1.0, 10.0};
    std::vector<std::uint64_t> grid_seeds{1};
    std::vector<int> sweep_steps{5, 10, 20, 40};
    std::vector<double> sweep_scales{0.0};
    std::vector<long> mc_counts{10, 100, 1000, 10000, 100000};
    std::vector<int> circuit_n{2, 3, 4, 5, 6, 7, 8};
    int square_n_max = 100;

    [[nodiscard]] Couplings couplings() const { return {J, h, hl}; }
    [[nodiscard]] NoiseModel noise() const { return {p1, p2, noise_scale}; }
    [[nodiscard]] Geometry geometry() const { return model == ModelKind::ladder ? Geometry::ladder : Geometry::chain; }
    [[nodiscard]] bool correction_enabled() const {
        if(lf_correction == "on") return true;
        if(lf_correction == "off") return false;
        return hl != 0.0;
    }
    [[nodiscard]] std::string model_label() const;

    void set(const std::string &key, const std::string &value);
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const;
    void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if(b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string unquote(std::string s) {
    if(s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
    return s;
}

template <class T>
T parse_number(const std::string &key, const std::string &v) {
    T out{};
    const auto *end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if(ec != std::errc{} || ptr != end) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
    return out;
}

template <>
inline double parse_number<double>(const std::string &key, const std::string &v) {
    // from_chars for double is missing in older libstdc++ releases.
    std::size_t pos = 0;
    double out = 0;
    try {
        out = std::stod(v, &pos);
    } catch(const std::exception &) {
        pos = std::string::npos;
    }
    if(pos != v.size()) throw ConfigError("config: bad value for " + key + ": '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string &key, const std::string &v) {
    if(v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if(v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

/// "[1, 2, 3]" or "1,2,3".
template <class T>
std::vector<T> parse_list(const std::string &key, std::string v) {
    v = trim(v);
    if(!v.empty() && v.front() == '[') {
        if(v.back() != ']') throw ConfigError("config: unterminated list for " + key);
        v = v.substr(1, v.size() - 2);
    }
    std::vector<T> out;
    std::stringstream ss(v);
    for(std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if(!item.empty()) out.push_back(parse_number<T>(key, item));
    }
    return out;
}

template <class T>
std::string join(const std::vector<T> &v) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for(std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ']';
    return os.str();
}

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace detail

inline std::string ExperimentConfig::model_label() const {
    std::ostringstream os;
    os << to_string(model) << "_J" << J << "_h" << h;
    if(hl != 0.0) os << "_hl" << hl;
    os << "_N" << n_max << "_" << to_string(solver);
    return os.str();
}

inline void ExperimentConfig::set(const std::string &key_in, const std::string &raw) {
    using detail::parse_number;
    const std::string key = detail::trim(key_in);
    const std::string v = detail::unquote(detail::trim(raw));
    if(key == "model") {
        if(v == "chain") model = ModelKind::chain;
        else if(v == "chain_lf") model = ModelKind::chain_lf;
        else if(v == "ladder") model = ModelKind::ladder;
        else throw ConfigError("config: unknown model '" + v + "' (chain, chain_lf, ladder)");
    } else if(key == "solver") {
        if(v == "ed") solver = SolverKind::ed;
        else if(v == "vqe") solver = SolverKind::vqe;
        else if(v == "asp") solver = SolverKind::asp;
        else throw ConfigError("config: unknown solver '" + v + "' (ed, vqe, asp)");
    } else if(key == "backend") {
        if(v == "exact") backend = BackendKind::exact;
        else if(v == "shots") backend = BackendKind::shots;
        else throw ConfigError("config: unknown backend '" + v + "' (exact, shots)");
    } else if(key == "J") J = parse_number<double>(key, v);
    else if(key == "h") h = parse_number<double>(key, v);
    else if(key == "hl") hl = parse_number<double>(key, v);
    else if(key == "n_max") n_max = parse_number<int>(key, v);
    else if(key == "shots") shots = parse_number<long>(key, v);
    else if(key == "noise.p1") p1 = parse_number<double>(key, v);
    else if(key == "noise.p2") p2 = parse_number<double>(key, v);
    else if(key == "noise.scale") noise_scale = parse_number<double>(key, v);
    else if(key == "seed") seed = parse_number<std::uint64_t>(key, v);
    else if(key == "k_points") k_points = parse_number<int>(key, v);
    else if(key == "mc_samples") mc_samples = parse_number<long>(key, v);
    else if(key == "out") out = v;
    else if(key == "symmetrize") symmetrize = detail::parse_bool(key, v);
    else if(key == "lf_correction") {
        if(v != "auto" && v != "on" && v != "off") throw ConfigError("config: lf_correction must be auto, on or off");
        lf_correction = v;
    } else if(key == "asp.steps") asp_steps = parse_number<int>(key, v);
    else if(key == "asp.trotter_order") trotter_order = parse_number<int>(key, v);
    else if(key == "asp.dt") asp_dt = parse_number<double>(key, v);
    else if(key == "vqe.restarts") vqe_restarts = parse_number<int>(key, v);
    else if(key == "vqe.layers") vqe_layers = parse_number<int>(key, v);
    else if(key == "vqe.ground_weight") vqe_ground_weight = parse_number<double>(key, v);
    else if(key == "vqe.max_iterations") vqe_max_iterations = parse_number<int>(key, v);
    else if(key == "vqe.seed") vqe_seed = parse_number<std::uint64_t>(key, v);
    else if(key == "vqe.param_file") vqe_param_file = v;
    else if(key == "grid.shots") grid_shots = detail::parse_list<long>(key, v);
    else if(key == "grid.scales") grid_scales = detail::parse_list<double>(key, v);
    else if(key == "grid.seeds") grid_seeds = detail::parse_list<std::uint64_t>(key, v);
    else if(key == "sweep.steps") sweep_steps = detail::parse_list<int>(key, v);
    else if(key == "sweep.scales") sweep_scales = detail::parse_list<double>(key, v);
    else if(key == "mc.counts") mc_counts = detail::parse_list<long>(key, v);
    else if(key == "circuits.n") circuit_n = detail::parse_list<int>(key, v);
    else if(key == "circuits.square_n_max") square_n_max = parse_number<int>(key, v);
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    using detail::join;
    using detail::num;
    auto q = [](const std::string &s) { return "\"" + s + "\""; };
    return {{"model", to_string(model)},
            {"J", num(J)},
            {"h", num(h)},
            {"hl", num(hl)},
            {"n_max", std::to_string(n_max)},
            {"solver", to_string(solver)},
            {"backend", to_string(backend)},
            {"shots", std::to_string(shots)},
            {"noise.p1", num(p1)},
            {"noise.p2", num(p2)},
            {"noise.scale", num(noise_scale)},
            {"seed", std::to_string(seed)},
            {"k_points", std::to_string(k_points)},
            {"mc_samples", std::to_string(mc_samples)},
            {"out", q(out)},
            {"symmetrize", symmetrize ? "true" : "false"},
            {"lf_correction", lf_correction},
            {"asp.steps", std::to_string(asp_steps)},
            {"asp.trotter_order", std::to_string(trotter_order)},
            {"asp.dt", num(asp_dt)},
            {"vqe.restarts", std::to_string(vqe_restarts)},
            {"vqe.layers", std::to_string(vqe_layers)},
            {"vqe.ground_weight", num(vqe_ground_weight)},
            {"vqe.max_iterations", std::to_string(vqe_max_iterations)},
            {"vqe.seed", std::to_string(vqe_seed)},
            {"vqe.param_file", q(vqe_param_file)},
            {"grid.shots", join(grid_shots)},
            {"grid.scales", join(grid_scales)},
            {"grid.seeds", join(grid_seeds)},
            {"sweep.steps", join(sweep_steps)},
            {"sweep.scales", join(sweep_scales)},
            {"mc.counts", join(mc_counts)},
            {"circuits.n", join(circuit_n)},
            {"circuits.square_n_max", std::to_string(square_n_max)}};
}

inline void ExperimentConfig::validate() const {
    auto fail = [](const std::string &m) { throw ConfigError("config: " + m); };
    if(model == ModelKind::chain && hl != 0.0) fail("model 'chain' has no longitudinal field; use chain_lf");
    if(model == ModelKind::chain_lf && hl == 0.0) fail("model 'chain_lf' needs hl != 0");
    if(model == ModelKind::ladder && hl != 0.0) fail("ladder runs without longitudinal field");
    if(model == ModelKind::ladder) {
        if(n_max < 4 || n_max % 2) fail("ladder needs even n_max >= 4");
    } else if(n_max < 2) {
        fail("chain needs n_max >= 2");
    }
    if(n_max > 12) fail("n_max above 12 is beyond exact simulation");
    if(!(h > 0)) fail("h must be positive");
    if(shots < 1) fail("shots must be >= 1");
    if(k_points < 2) fail("k_points must be >= 2");
    if(mc_samples < 0) fail("mc_samples must be >= 0");
    if(asp_steps < 1) fail("asp.steps must be >= 1");
    if(trotter_order != 1 && trotter_order != 2) fail("asp.trotter_order must be 1 or 2");
    if(vqe_restarts < 1) fail("vqe.restarts must be >= 1");
    if(vqe_layers < 0) fail("vqe.layers must be >= 0");
    if(vqe_ground_weight < 0) fail("vqe.ground_weight must be >= 0");
    noise().validate();
    for(double s : grid_scales)
        if(s < 0) fail("grid.scales must be non-negative");
    for(double s : sweep_scales)
        if(s < 0) fail("sweep.scales must be non-negative");
    for(long s : grid_shots)
        if(s < 1) fail("grid.shots must be >= 1");
    for(int s : sweep_steps)
        if(s < 1) fail("sweep.steps must be >= 1");
    if(!std::is_sorted(mc_counts.begin(), mc_counts.end())) fail("mc.counts must ascend");
}

/// Flat `key = value` text; `[section]` headers prefix the following keys with "section.".
/// '#' starts a comment outside quotes.
inline void apply_config_text(ExperimentConfig &cfg, const std::string &text, const std::string &origin = "config") {
    std::istringstream in(text);
    std::string section;
    int lineno = 0;
    for(std::string line; std::getline(in, line);) {
        ++lineno;
        bool quoted = false;
        for(std::size_t i = 0; i < line.size(); ++i) {
            if(line[i] == '"') quoted = !quoted;
            if(line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = detail::trim(line);
        if(line.empty()) continue;
        if(line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if(eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        if(!section.empty()) key = section + "." + key;
        try {
            cfg.set(key, line.substr(eq + 1));
        } catch(const ConfigError &e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline ExperimentConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if(!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    apply_config_text(cfg, ss.str(), path);
    return cfg;
}

/// `key=value` override as given on the command line.
inline void apply_override(ExperimentConfig &cfg, const std::string &kv) {
    const auto eq = kv.find('=');
    if(eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
}

inline std::string config_text(const ExperimentConfig &cfg) {
    std::string s;
    for(const auto &[k, v] : cfg.entries()) s += k + " = " + v + "\n";
    return s;
}

} // namespace nlceqa
