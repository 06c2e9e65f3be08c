#pragma once

// File formats: curve CSV, model/report JSON, band and study artifacts.

#include "fpcb/arh.hpp"
#include "fpcb/bands.hpp"
#include "fpcb/error.hpp"
#include "fpcb/evalkit.hpp"
#include "fpcb/rkhs.hpp"
#include "fpcb/study.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace fpcb::io {

using json = nlohmann::json;

inline constexpr int model_format_version = 1;
inline constexpr int report_format_version = 1;

// ---------------------------------------------------------------------------
// Text helpers

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fingerprint(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV

/// RFC-4180 records. Quoted fields may contain commas, quotes ("") and line
/// breaks. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t line = 1;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        if (!(row.empty() && !field_started && field.empty())) {
            end_field();
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw Error(ErrorKind::parse, "line " + std::to_string(line) + ": stray quote inside field");
                }
                quoted = true;
                field_started = true;
                break;
            case ',':
                field_started = true;
                end_field();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (quoted) throw Error(ErrorKind::parse, "unterminated quoted field at end of input");
    end_row();
    return rows;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool parse_number(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// One curve per row. An optional header row of `t=<value>` labels supplies
/// the grid; otherwise `grid` is used, or TimeGrid::uniform(m).
inline RawCurveSeries parse_series_csv(std::string_view text, const std::optional<TimeGrid>& grid = std::nullopt) {
    auto rows = parse_csv(text);
    if (rows.empty()) throw Error(ErrorKind::parse, "CSV has no rows");
    std::optional<TimeGrid> header_grid;
    std::size_t first = 0;
    if (!rows[0].empty() && detail::trim(rows[0][0]).rfind("t=", 0) == 0) {
        Vector ts;
        for (std::size_t j = 0; j < rows[0].size(); ++j) {
            const std::string cell = detail::trim(rows[0][j]);
            double v = 0.0;
            if (cell.rfind("t=", 0) != 0 || !detail::parse_number(cell.substr(2), v)) {
                throw Error(ErrorKind::parse, "header column " + std::to_string(j + 1) + ": expected t=<value>, got '" +
                                                  cell + "'");
            }
            ts.push_back(v);
        }
        try {
            header_grid = TimeGrid(ts);
        } catch (const Error& e) {
            throw Error(ErrorKind::parse, std::string("header grid invalid: ") + e.what());
        }
        first = 1;
    }
    if (first >= rows.size()) throw Error(ErrorKind::parse, "CSV has a header but no data rows");
    const std::size_t m = rows[first].size();
    RawCurveSeries series;
    for (std::size_t r = first; r < rows.size(); ++r) {
        const std::size_t line = r + 1;
        if (rows[r].size() != m) {
            throw Error(ErrorKind::parse, "row " + std::to_string(line) + ": expected " + std::to_string(m) +
                                              " columns, found " + std::to_string(rows[r].size()));
        }
        Vector curve(m);
        for (std::size_t j = 0; j < m; ++j) {
            if (!detail::parse_number(rows[r][j], curve[j]) || !std::isfinite(curve[j])) {
                throw Error(ErrorKind::parse, "row " + std::to_string(line) + ", column " + std::to_string(j + 1) +
                                                  ": not a finite number: '" + rows[r][j] + "'");
            }
        }
        series.curves.push_back(std::move(curve));
    }
    if (header_grid) {
        if (grid && !(*grid == *header_grid)) throw Error(ErrorKind::parse, "CSV header grid differs from configured grid");
        series.grid = *header_grid;
    } else {
        series.grid = grid ? *grid : TimeGrid::uniform(m);
    }
    if (series.grid.size() != m) {
        throw Error(ErrorKind::parse, "grid has " + std::to_string(series.grid.size()) + " points but rows have " +
                                          std::to_string(m) + " columns");
    }
    return series;
}

inline RawCurveSeries read_series_csv(const std::string& path, const std::optional<TimeGrid>& grid = std::nullopt) {
    try {
        return parse_series_csv(read_text(path), grid);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::parse) throw;
        throw Error(ErrorKind::parse, path + ": " + std::string(e.what()).substr(std::string("parse error: ").size()));
    }
}

inline std::string series_to_csv(const RawCurveSeries& series, bool header = true) {
    std::string out;
    if (header) {
        for (std::size_t j = 0; j < series.grid.size(); ++j) {
            if (j) out += ',';
            out += "t=" + format_double(series.grid[j]);
        }
        out += '\n';
    }
    for (const auto& c : series.curves) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j) out += ',';
            out += format_double(c[j]);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model JSON

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        throw Error(ErrorKind::parse, what + ": expected a non-empty array of rows");
    }
    Matrix m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != m.cols()) throw Error(ErrorKind::parse, what + ": ragged rows");
        for (std::size_t c = 0; c < m.cols(); ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

struct ModelFile {
    ArhModel model;
    TimeGrid grid;
    Hyperparameters params;
    double ridge = 0.0;
    std::size_t n_curves = 0;
    std::string input_fingerprint;
    std::string config_fingerprint;
};

inline json model_to_json(const ModelFile& mf) {
    json j;
    j["version"] = model_format_version;
    j["kernel"] = {{"family", "gaussian"}, {"sigma", mf.params.sigma}};
    j["gamma"] = mf.params.gamma;
    j["d"] = mf.params.d;
    j["ridge"] = mf.ridge;
    j["n_curves"] = mf.n_curves;
    j["grid"] = mf.grid.points();
    j["mean_coeffs"] = mf.model.mean_coeffs;
    j["autoreg"] = matrix_to_json(mf.model.autoreg);
    j["cov0"] = matrix_to_json(mf.model.cov0);
    j["cov1"] = matrix_to_json(mf.model.cov1);
    j["fingerprint"] = {{"input", mf.input_fingerprint}, {"config", mf.config_fingerprint}};
    return j;
}

/// Rebuilds the RKHS basis from the stored grid and hyperparameters.
inline ModelFile model_from_json(const json& j, const NumericPolicy& policy = default_policy()) {
    try {
        if (j.at("version").get<int>() != model_format_version) {
            throw Error(ErrorKind::parse, "unsupported model version " + j.at("version").dump());
        }
        ModelFile mf;
        if (j.at("kernel").at("family").get<std::string>() != "gaussian") {
            throw Error(ErrorKind::parse, "unsupported kernel family");
        }
        mf.params.sigma = j.at("kernel").at("sigma").get<double>();
        mf.params.gamma = j.at("gamma").get<double>();
        mf.params.d = j.at("d").get<std::size_t>();
        mf.ridge = j.value("ridge", 0.0);
        mf.n_curves = j.value("n_curves", std::size_t{0});
        mf.grid = TimeGrid(j.at("grid").get<Vector>());
        mf.model.mean_coeffs = j.at("mean_coeffs").get<Vector>();
        mf.model.autoreg = matrix_from_json(j.at("autoreg"), "autoreg");
        mf.model.cov0 = matrix_from_json(j.at("cov0"), "cov0");
        mf.model.cov1 = matrix_from_json(j.at("cov1"), "cov1");
        const std::size_t d = mf.params.d;
        if (mf.model.mean_coeffs.size() != d || mf.model.autoreg.rows() != d || mf.model.autoreg.cols() != d) {
            throw Error(ErrorKind::parse, "model matrices do not match d");
        }
        mf.input_fingerprint = j.at("fingerprint").value("input", "");
        mf.config_fingerprint = j.at("fingerprint").value("config", "");
        mf.model.basis = std::make_shared<const RkhsBasis>(mf.grid, KernelSpec{KernelFamily::gaussian, mf.params.sigma},
                                                           mf.params.gamma, d, policy);
        return mf;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("model JSON: ") + e.what());
    }
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Bands

inline std::string band_to_csv(const PredictiveBand& band, const TimeGrid& grid) {
    std::string out = "t,lower,upper\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out += format_double(grid[i]) + "," + format_double(band.lower[i]) + "," + format_double(band.upper[i]) + "\n";
    }
    return out;
}

inline std::string hull_to_csv(const Hull2D& hull) {
    std::string out = "t,y\n";
    for (const auto& p : hull.vertices) out += format_double(p.t) + "," + format_double(p.y) + "\n";
    return out;
}

inline std::string ensemble_to_csv(const BootstrapEnsemble& ens) {
    std::string out;
    for (const auto& c : ens.replicates) {
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j) out += ',';
            out += format_double(c[j]);
        }
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Study artifacts

inline std::string records_to_csv(const std::vector<ReplicateRecord>& records) {
    std::string out = "replicate,seed,method,alpha,covered,amplitude,rmse\n";
    for (const auto& r : records) {
        out += std::to_string(r.replicate) + "," + std::to_string(r.seed) + "," + csv_escape(r.method) + "," +
               format_double(r.alpha) + "," + (r.covered ? (*r.covered ? "1" : "0") : "") + "," +
               (r.amplitude ? format_double(*r.amplitude) : "") + "," + format_double(r.rmse) + "\n";
    }
    return out;
}

inline std::vector<ReplicateRecord> records_from_csv(std::string_view text) {
    auto rows = parse_csv(text);
    if (rows.empty() || rows[0].size() != 7 || rows[0][0] != "replicate") {
        throw Error(ErrorKind::parse, "records CSV: missing header");
    }
    std::vector<ReplicateRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r];
        if (f.size() != 7) throw Error(ErrorKind::parse, "records CSV row " + std::to_string(r + 1) + ": expected 7 columns");
        ReplicateRecord rec;
        double v = 0.0;
        auto num = [&](std::size_t col) {
            if (!detail::parse_number(f[col], v)) {
                throw Error(ErrorKind::parse, "records CSV row " + std::to_string(r + 1) + ", column " +
                                                  std::to_string(col + 1) + ": not a number");
            }
            return v;
        };
        rec.replicate = static_cast<std::size_t>(num(0));
        rec.seed = std::stoull(f[1]);
        rec.method = f[2];
        rec.alpha = num(3);
        if (!f[4].empty()) rec.covered = num(4) != 0.0;
        if (!f[5].empty()) rec.amplitude = num(5);
        rec.rmse = num(6);
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::string table_to_csv(const MetricTable& table) {
    std::string out = "method,nominal,coverage,coverage_sd,coverage_se,amplitude,amplitude_sd,amplitude_se,rmse,rmse_sd,rmse_se,count\n";
    auto cells = [](const std::optional<MetricSummary>& s) {
        if (!s) return std::string(",,");
        return format_double(s->mean) + "," + format_double(s->sd) + "," + format_double(s->se);
    };
    for (const auto& r : table.rows) {
        std::size_t count = r.coverage ? r.coverage->count : r.rmse ? r.rmse->count : 0;
        out += csv_escape(r.method) + "," + (r.nominal > 0.0 ? format_double(r.nominal) : "") + "," +
               cells(r.coverage) + "," + cells(r.amplitude) + "," + cells(r.rmse) + "," + std::to_string(count) + "\n";
    }
    return out;
}

/// Aligned plain text: one block of band methods by nominal level with
/// coverage and amplitude (sd in parentheses), then the RMSE rows.
inline std::string table_to_text(const MetricTable& table) {
    std::ostringstream out;
    out << std::fixed;
    bool band_header = false;
    bool rmse_header = false;
    for (const auto& r : table.rows) {
        if (r.coverage) {
            if (!band_header) {
                out << std::left << std::setw(12) << "method" << std::right << std::setw(9) << "nominal" << std::setw(18)
                    << "Cov." << std::setw(18) << "Amp." << "\n";
                band_header = true;
            }
            std::ostringstream cov, amp;
            cov << std::fixed << std::setprecision(3) << r.coverage->mean << " (" << r.coverage->sd << ")";
            amp << std::fixed << std::setprecision(3) << r.amplitude->mean << " (" << r.amplitude->sd << ")";
            out << std::left << std::setw(12) << r.method << std::right << std::setw(8) << std::setprecision(0)
                << r.nominal * 100.0 << "%" << std::setw(18) << cov.str() << std::setw(18) << amp.str() << "\n";
        } else if (r.rmse) {
            if (!rmse_header) {
                out << "\n" << std::left << std::setw(12) << "predictor" << std::right << std::setw(18) << "RMSE" << "\n";
                rmse_header = true;
            }
            std::ostringstream e;
            e << std::fixed << std::setprecision(3) << r.rmse->mean << " (" << r.rmse->sd << ")";
            out << std::left << std::setw(12) << r.method << std::right << std::setw(18) << e.str() << "\n";
        }
    }
    return out.str();
}

inline std::string horizons_to_csv(const RealResult& res) {
    std::string out = "horizon,index,rmse,alpha,fpcb_covered,fpcb_amplitude,gaussian_covered,gaussian_amplitude,"
                      "empirical_covered,empirical_amplitude,nested\n";
    for (const auto& h : res.horizons) {
        for (std::size_t a = 0; a < h.alphas.size(); ++a) {
            out += std::to_string(h.horizon) + "," + std::to_string(h.index) + "," + format_double(h.rmse) + "," +
                   format_double(h.alphas[a]) + "," + (h.fpcb[a].covered ? "1" : "0") + "," +
                   format_double(h.fpcb[a].amplitude) + "," + (h.gaussian[a].covered ? "1" : "0") + "," +
                   format_double(h.gaussian[a].amplitude) + "," + (h.empirical[a].covered ? "1" : "0") + "," +
                   format_double(h.empirical[a].amplitude) + "," + (h.nested ? "1" : "0") + "\n";
        }
    }
    return out;
}

/// Long format for plotting: one row per horizon, alpha and grid point.
inline std::string plot_to_csv(const RealResult& res, const TimeGrid& grid) {
    std::string out = "horizon,alpha,t,truth,prediction,lower,upper\n";
    for (const auto& h : res.horizons) {
        for (std::size_t a = 0; a < h.alphas.size(); ++a) {
            for (std::size_t i = 0; i < grid.size(); ++i) {
                out += std::to_string(h.horizon) + "," + format_double(h.alphas[a]) + "," + format_double(grid[i]) +
                       "," + format_double(h.truth[i]) + "," + format_double(h.prediction[i]) + "," +
                       format_double(h.bands[a].lower[i]) + "," + format_double(h.bands[a].upper[i]) + "\n";
            }
        }
    }
    return out;
}

inline json params_to_json(const Hyperparameters& p) { return {{"sigma", p.sigma}, {"d", p.d}, {"gamma", p.gamma}}; }

}  // namespace fpcb::io
