#pragma once

// Run configuration loaded from JSON or TOML, with environment overrides.

#include "fpcb/error.hpp"
#include "fpcb/evalkit.hpp"
#include "fpcb/io.hpp"
#include "fpcb/numeric_policy.hpp"
#include "fpcb/simulator.hpp"
#include "fpcb/study.hpp"

#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace fpcb {

struct IoPaths {
    std::string input;       // series CSV
    std::string output_dir = ".";
    std::string model;       // model.json for predict
    std::string truth;       // optional held-out curve CSV for band reports
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: all available cores
    std::optional<double> sigma;
    std::optional<std::size_t> d;
    double gamma = 1e-4;
    double ridge = 0.0;
    BootstrapSpec bootstrap;
    std::size_t knn_k = 0;
    std::vector<double> alphas{0.2, 0.1, 0.05};
    ArhSimSpec sim;
    std::optional<SplitSpec> split;
    CalibrationGrid grid{{5.0, 20.0, 50.0}, {3, 5, 7}, {1e-4}};
    bool joint_band_calibration = true;
    double band_alpha = 0.1;
    std::size_t calibration_B = 0;
    std::size_t calibration_valid_steps = 0;
    std::size_t replicates = 100;
    bool sqrt_transform = false;
    bool refit_each_step = false;
    IoPaths io;
    NumericPolicy policy;
    std::string fingerprint;  // hash of the source text

    [[nodiscard]] std::optional<Hyperparameters> pinned() const {
        if (sigma && d) return Hyperparameters{*sigma, *d, gamma};
        return std::nullopt;
    }

    void validate() const {
        auto bad = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
        if (sigma.has_value() != d.has_value()) bad("model.sigma and model.d must be given together");
        if (sigma && !(*sigma > 0.0)) bad("model.sigma must be > 0");
        if (d && *d < 1) bad("model.d must be >= 1");
        if (!(gamma > 0.0)) bad("model.gamma must be > 0");
        if (ridge < 0.0) bad("model.ridge must be >= 0");
        if (bootstrap.B < 2) bad("bootstrap.B must be >= 2");
        if (bootstrap.h < 1) bad("bootstrap.h must be >= 1");
        if (alphas.empty()) bad("alphas must not be empty");
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            if (!(alphas[i] > 0.0 && alphas[i] < 1.0)) bad("alphas must lie in (0, 1)");
            if (i && !(alphas[i] < alphas[i - 1])) bad("alphas must be strictly decreasing");
        }
        if (!(band_alpha > 0.0 && band_alpha < 1.0)) bad("calibration.band_alpha must lie in (0, 1)");
        if (replicates < 1) bad("mc.replicates must be >= 1");
        if (knn_k != 0 && knn_k >= bootstrap.B) bad("knn_k must be < bootstrap.B");
        try {
            grid.validate();
            if (split) split->validate();
            fpcb::validate(sim);
        } catch (const Error& e) {
            bad(e.what());
        }
    }

    [[nodiscard]] PipelineSettings pipeline() const {
        PipelineSettings s;
        s.grid = grid;
        s.pinned = pinned();
        s.joint_band_calibration = joint_band_calibration;
        s.band_alpha = band_alpha;
        s.calibration_B = calibration_B;
        s.calibration_valid_steps = calibration_valid_steps;
        s.alphas = alphas;
        s.bootstrap = bootstrap;
        s.bootstrap.seed = seed;
        s.knn_k = knn_k;
        s.ridge = ridge;
        s.policy = policy;
        return s;
    }
};

namespace config_detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorKind::config, where + " must be a table/object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) {
            throw Error(ErrorKind::config, "unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace config_detail

/// Parses a configuration document. `toml` selects TOML syntax; otherwise JSON.
inline RunConfig parse_config(const std::string& text, bool toml) {
    using namespace config_detail;
    json j;
    try {
        if (toml) {
            const toml::table tbl = toml::parse(text);
            std::ostringstream ss;
            ss << toml::json_formatter{tbl};
            j = json::parse(ss.str());
        } else {
            j = json::parse(text);
        }
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML: " << e.description() << " at line " << e.source().begin.line;
        throw Error(ErrorKind::config, msg.str());
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("JSON: ") + e.what());
    }

    RunConfig c;
    c.fingerprint = io::fingerprint(text);
    try {
        reject_unknown(j, {"seed", "threads", "model", "bootstrap", "knn_k", "alphas", "sim", "split", "calibration",
                           "mc", "real", "io", "policy"},
                       "");
        read(j, "seed", c.seed);
        read(j, "threads", c.threads);
        read(j, "knn_k", c.knn_k);
        read(j, "alphas", c.alphas);
        if (j.contains("model")) {
            const json& m = j["model"];
            reject_unknown(m, {"sigma", "d", "gamma", "ridge"}, "model");
            read(m, "sigma", c.sigma);
            read(m, "d", c.d);
            read(m, "gamma", c.gamma);
            read(m, "ridge", c.ridge);
        }
        if (j.contains("bootstrap")) {
            const json& b = j["bootstrap"];
            reject_unknown(b, {"B", "h", "refit", "max_retries"}, "bootstrap");
            read(b, "B", c.bootstrap.B);
            read(b, "h", c.bootstrap.h);
            read(b, "refit", c.bootstrap.refit);
            read(b, "max_retries", c.bootstrap.max_retries);
        }
        if (j.contains("sim")) {
            const json& s = j["sim"];
            reject_unknown(s, {"m_prime", "psi", "gamma0", "eps", "n", "m", "burn_in", "mean"}, "sim");
            read(s, "m_prime", c.sim.m_prime);
            read(s, "psi", c.sim.psi_diag);
            read(s, "gamma0", c.sim.gamma0_diag);
            read(s, "eps", c.sim.eps);
            read(s, "n", c.sim.n);
            read(s, "m", c.sim.m);
            read(s, "burn_in", c.sim.burn_in);
            read(s, "mean", c.sim.mean_coeffs);
        }
        if (j.contains("split")) {
            const json& s = j["split"];
            reject_unknown(s, {"train", "valid", "test"}, "split");
            SplitSpec sp{0.0, 0.0, 0.0};
            read(s, "train", sp.train);
            read(s, "valid", sp.valid);
            read(s, "test", sp.test);
            c.split = sp;
        }
        if (j.contains("calibration")) {
            const json& g = j["calibration"];
            reject_unknown(g, {"sigmas", "ds", "gammas", "joint_band", "band_alpha", "B", "valid_steps"}, "calibration");
            read(g, "sigmas", c.grid.sigmas);
            read(g, "ds", c.grid.ds);
            read(g, "gammas", c.grid.gammas);
            read(g, "joint_band", c.joint_band_calibration);
            read(g, "band_alpha", c.band_alpha);
            read(g, "B", c.calibration_B);
            read(g, "valid_steps", c.calibration_valid_steps);
        }
        if (j.contains("mc")) {
            const json& m = j["mc"];
            reject_unknown(m, {"replicates"}, "mc");
            read(m, "replicates", c.replicates);
        }
        if (j.contains("real")) {
            const json& r = j["real"];
            reject_unknown(r, {"sqrt_transform", "refit_each_step"}, "real");
            read(r, "sqrt_transform", c.sqrt_transform);
            read(r, "refit_each_step", c.refit_each_step);
        }
        if (j.contains("io")) {
            const json& p = j["io"];
            reject_unknown(p, {"input", "output_dir", "model", "truth"}, "io");
            read(p, "input", c.io.input);
            read(p, "output_dir", c.io.output_dir);
            read(p, "model", c.io.model);
            read(p, "truth", c.io.truth);
        }
        if (j.contains("policy")) {
            const json& p = j["policy"];
            reject_unknown(p, {"symmetry_tol", "psd_clip", "psd_reject", "jacobi_tol", "jacobi_max_sweeps",
                               "condition_limit", "rank_rel_tol", "kernel_underflow", "pinv_rel_tol",
                               "innovation_psd_tol", "hull_slack", "collinear_tol"},
                           "policy");
            NumericPolicy& np = c.policy;
            read(p, "symmetry_tol", np.symmetry_tol);
            read(p, "psd_clip", np.psd_clip);
            read(p, "psd_reject", np.psd_reject);
            read(p, "jacobi_tol", np.jacobi_tol);
            read(p, "jacobi_max_sweeps", np.jacobi_max_sweeps);
            read(p, "condition_limit", np.condition_limit);
            read(p, "rank_rel_tol", np.rank_rel_tol);
            read(p, "kernel_underflow", np.kernel_underflow);
            read(p, "pinv_rel_tol", np.pinv_rel_tol);
            read(p, "innovation_psd_tol", np.innovation_psd_tol);
            read(p, "hull_slack", np.hull_slack);
            read(p, "collinear_tol", np.collinear_tol);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("config value has the wrong type: ") + e.what());
    }
    return c;
}

inline bool is_toml_path(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".toml") == 0;
}

inline RunConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, std::string("cannot read config: ") + e.what());
    }
    return parse_config(text, is_toml_path(path));
}

/// FPCB_SEED and FPCB_THREADS override file values.
inline void apply_env_overrides(RunConfig& c) {
    auto parse_env = [](const char* name) -> std::optional<std::uint64_t> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        char* end = nullptr;
        const unsigned long long x = std::strtoull(v, &end, 10);
        if (*end != '\0' || v[0] == '-') {
            throw Error(ErrorKind::config, std::string(name) + " must be a non-negative integer, got '" + v + "'");
        }
        return x;
    };
    if (auto s = parse_env("FPCB_SEED")) c.seed = *s;
    if (auto t = parse_env("FPCB_THREADS")) c.threads = static_cast<std::size_t>(*t);
}

}  // namespace fpcb
