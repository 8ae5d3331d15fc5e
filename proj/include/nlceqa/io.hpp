#pragma once

#include "nlce.hpp"
#include "records.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlceqa {

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::filesystem::path &path, const std::string &content) {
    if(path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if(!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if(!out.flush()) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if(!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Shortest round-trip representation of a double.
inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Comma-separated table with '#'-prefixed header lines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> r) {
        if(r.size() != columns.size()) throw std::invalid_argument("CsvTable: row width differs from column count");
        rows.push_back(std::move(r));
    }

    [[nodiscard]] std::string str() const {
        std::string s;
        for(const auto &h : header) s += "# " + h + "\n";
        for(std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
        s += "\n";
        for(const auto &r : rows) {
            for(std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += "\n";
        }
        return s;
    }
};

inline CsvTable parse_csv(const std::string &text) {
    CsvTable t;
    std::istringstream in(text);
    bool have_columns = false;
    for(std::string line; std::getline(in, line);) {
        if(line.empty()) continue;
        if(line.front() == '#') {
            t.header.push_back(line.size() > 2 ? line.substr(2) : std::string{});
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for(std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if(!have_columns) {
            t.columns = std::move(cells);
            have_columns = true;
        } else {
            t.add_row(std::move(cells));
        }
    }
    return t;
}

/// Columns k, omega_band0[, omega_band1], sigma_band0[, sigma_band1].
inline CsvTable curve_table(const DispersionCurve &c, const std::vector<std::string> &header = {}) {
    CsvTable t;
    t.header = header;
    t.header.push_back("model: " + c.model);
    t.header.push_back("N_max: " + std::to_string(c.n_max));
    std::string seeds;
    for(auto s : c.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
    t.header.push_back("seeds: " + (seeds.empty() ? std::string("none") : seeds));
    t.columns.push_back("k");
    for(std::size_t b = 0; b < c.bands(); ++b) t.columns.push_back("omega_band" + std::to_string(b));
    for(std::size_t b = 0; b < c.bands(); ++b) t.columns.push_back("sigma_band" + std::to_string(b));
    for(std::size_t q = 0; q < c.k.size(); ++q) {
        std::vector<std::string> r{fmt(c.k[q])};
        for(std::size_t b = 0; b < c.bands(); ++b) r.push_back(fmt(c.omega[b][q]));
        for(std::size_t b = 0; b < c.bands(); ++b) r.push_back(c.sigma.empty() ? "0" : fmt(c.sigma[b][q]));
        t.add_row(std::move(r));
    }
    return t;
}

inline void write_curve(const std::filesystem::path &path, const DispersionCurve &c,
                        const std::vector<std::string> &header = {}) {
    write_atomic(path, curve_table(c, header).str());
}

inline DispersionCurve read_curve(const std::filesystem::path &path) {
    const auto t = parse_csv(read_file(path));
    if(t.columns.empty() || t.columns.front() != "k") throw std::runtime_error(path.string() + ": not a curve file");
    const std::size_t bands = (t.columns.size() - 1) / 2;
    DispersionCurve c;
    c.omega.assign(bands, {});
    c.sigma.assign(bands, {});
    for(const auto &r : t.rows) {
        c.k.push_back(std::stod(r[0]));
        for(std::size_t b = 0; b < bands; ++b) {
            c.omega[b].push_back(std::stod(r[1 + b]));
            c.sigma[b].push_back(std::stod(r[1 + bands + b]));
        }
    }
    for(const auto &h : t.header) {
        if(h.rfind("model: ", 0) == 0) c.model = h.substr(7);
        if(h.rfind("N_max: ", 0) == 0) c.n_max = std::stoi(h.substr(7));
    }
    return c;
}

/// One JSON object per line.
inline std::string jsonl(const std::vector<MeasurementRecord> &records) {
    std::string s;
    for(const auto &r : records) s += to_json(r).dump() + "\n";
    return s;
}

inline std::vector<MeasurementRecord> parse_jsonl(const std::string &text) {
    std::vector<MeasurementRecord> out;
    std::istringstream in(text);
    for(std::string line; std::getline(in, line);)
        if(!line.empty()) out.push_back(record_from_json(nlohmann::json::parse(line)));
    return out;
}

} // namespace nlceqa
