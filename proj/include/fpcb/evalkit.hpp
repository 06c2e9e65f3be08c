#pragma once

// Metrics, naive baselines, chronological splits and grid-search calibration.

#include "fpcb/arh.hpp"
#include "fpcb/bands.hpp"
#include "fpcb/bootstrap.hpp"
#include "fpcb/error.hpp"
#include "fpcb/rkhs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace fpcb {

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.empty()) throw Error(ErrorKind::dimension, "rmse: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

/// rho_tau(u) = u (tau - 1{u < 0}), u = value - pred_quantile.
inline double pinball(double value, double pred_quantile, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw Error(ErrorKind::parameter, "pinball: tau must lie in (0, 1)");
    const double u = value - pred_quantile;
    return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

/// Mean over grid points of pinball(truth, L, alpha/2) + pinball(truth, U, 1 - alpha/2).
inline double band_pinball(const PredictiveBand& band, std::span<const double> truth, double alpha) {
    if (truth.size() != band.lower.size() || truth.empty()) throw Error(ErrorKind::dimension, "band_pinball: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        s += pinball(truth[i], band.lower[i], alpha / 2.0) + pinball(truth[i], band.upper[i], 1.0 - alpha / 2.0);
    }
    return s / static_cast<double>(truth.size());
}

enum class BaselineKind { mean, persistence };

inline Vector baseline_predict(BaselineKind kind, const RkhsRepresentation& rep) {
    if (rep.size() == 0) throw Error(ErrorKind::parameter, "baseline needs at least one curve");
    if (kind == BaselineKind::persistence) return rep.smoothed.back();
    Vector out(rep.smoothed.front().size(), 0.0);
    for (const auto& c : rep.smoothed)
        for (std::size_t i = 0; i < c.size(); ++i) out[i] += c[i];
    for (double& v : out) v /= static_cast<double>(rep.size());
    return out;
}

// ---------------------------------------------------------------------------
// Splits

/// Chronological proportions; the earliest block trains. test may be 0 for a
/// two-way training/validation split.
struct SplitSpec {
    double train = 0.8;
    double valid = 0.2;
    double test = 0.0;

    void validate() const {
        if (!(train > 0.0) || !(valid > 0.0) || test < 0.0) {
            throw Error(ErrorKind::parameter, "split fractions: train and valid must be > 0, test >= 0");
        }
        if (std::abs(train + valid + test - 1.0) > 1e-9) {
            throw Error(ErrorKind::parameter, "split fractions must sum to 1");
        }
    }
};

struct SplitCounts {
    std::size_t train = 0;
    std::size_t valid = 0;
    std::size_t test = 0;
};

/// valid and test blocks are rounded to the nearest count; train takes the rest.
inline SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    auto round_count = [n](double frac) {
        return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 0.5));
    };
    SplitCounts c;
    c.test = round_count(spec.test);
    c.valid = std::max<std::size_t>(1, round_count(spec.valid));
    if (c.test + c.valid >= n) throw Error(ErrorKind::parameter, "series too short for the requested split");
    c.train = n - c.valid - c.test;
    return c;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationGrid {
    std::vector<double> sigmas;
    std::vector<std::size_t> ds;
    std::vector<double> gammas;

    void validate() const {
        if (sigmas.empty() || ds.empty() || gammas.empty()) throw Error(ErrorKind::parameter, "empty calibration grid");
        for (double s : sigmas)
            if (!(s > 0.0)) throw Error(ErrorKind::parameter, "calibration sigmas must be > 0");
        for (double g : gammas)
            if (!(g > 0.0)) throw Error(ErrorKind::parameter, "calibration gammas must be > 0");
        for (std::size_t d : ds)
            if (d < 1) throw Error(ErrorKind::parameter, "calibration ds must be >= 1");
    }
};

struct Hyperparameters {
    double sigma = 1.0;
    std::size_t d = 1;
    double gamma = 1e-4;

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

enum class CalibrationObjective { rmse, band_pinball };

struct CalibrationOptions {
    double ridge = 0.0;
    BootstrapSpec bootstrap;        // used by the band objective
    std::size_t knn_k = 0;          // 0: ceil(sqrt(B))
    std::size_t max_valid_steps = 0;  // band objective: 0 = every validation curve
    bool refit_each_step = false;
    NumericPolicy policy;
};

struct CandidateScore {
    Hyperparameters params;
    std::optional<double> score;
    std::string failure;
};

struct CalibrationResult {
    Hyperparameters best;
    double best_score = 0.0;
    std::vector<CandidateScore> candidates;  // in (d, sigma, gamma) order
};

namespace detail {

inline std::vector<std::size_t> spread_indices(std::size_t count, std::size_t limit) {
    std::vector<std::size_t> idx;
    if (limit == 0 || limit >= count) {
        for (std::size_t i = 0; i < count; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < limit; ++i) {
        idx.push_back((i * (count - 1)) / std::max<std::size_t>(limit - 1, 1));
    }
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

inline RawCurveSeries head(const RawCurveSeries& series, std::size_t count) {
    RawCurveSeries out{series.grid, {}};
    out.curves.assign(series.curves.begin(), series.curves.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

}  // namespace detail

/// Validation score of one candidate: the model is fitted on the first
/// `train` curves and rolled one step at a time over the next `valid`
/// curves; the prediction for curve j only sees curves before j.
inline double score_candidate(const RawCurveSeries& series, const Hyperparameters& hp, std::size_t train,
                              std::size_t valid, CalibrationObjective objective, double band_alpha,
                              const CalibrationOptions& opt) {
    auto basis = std::make_shared<const RkhsBasis>(series.grid, KernelSpec{KernelFamily::gaussian, hp.sigma},
                                                   hp.gamma, hp.d, opt.policy);
    RkhsRepresentation rep = represent_with(basis, detail::head(series, train));
    ArhModel model = fit(rep, opt.ridge, opt.policy);

    const auto steps = objective == CalibrationObjective::band_pinball
                           ? detail::spread_indices(valid, opt.max_valid_steps)
                           : detail::spread_indices(valid, 0);
    std::optional<BootstrapDraws> draws;
    double total = 0.0;
    for (std::size_t s : steps) {
        const std::size_t j = train + s;
        if (opt.refit_each_step && j > train) {
            rep = represent_with(basis, detail::head(series, j));
            model = fit(rep, opt.ridge, opt.policy);
            draws.reset();
        }
        const Vector last = basis->coefficients(basis->smooth(series.curves[j - 1]));
        const Vector& truth = series.curves[j];
        if (objective == CalibrationObjective::rmse) {
            total += rmse(basis->reconstruct(predict_next(model, last)), truth);
            continue;
        }
        if (!draws) {
            const auto fr = fitted_and_residuals(model, rep);
            draws = draw_bootstrap(rep, model, fr.pool, opt.bootstrap);
        }
        const BootstrapEnsemble ens = forecast_ensemble(*draws, last);
        const std::size_t k = opt.knn_k ? opt.knn_k : default_knn_k(ens.size());
        const EntropyScores scores = knn_entropy_scores(ens.replicate_coeffs, k, opt.bootstrap.threads);
        const PredictiveBand band = build_hull_band(ens, select_mes(scores, band_alpha), series.grid);
        total += band_pinball(band, truth, band_alpha);
    }
    return total / static_cast<double>(steps.size());
}

/// Exhaustive grid search over explicit block sizes: curves [0, train) fit,
/// curves [train, train + valid) validate. Ties go to the smaller d, then
/// sigma, then gamma.
inline CalibrationResult calibrate_blocks(const RawCurveSeries& series, const CalibrationGrid& grid, std::size_t train,
                                          std::size_t valid, CalibrationObjective objective, double band_alpha,
                                          const CalibrationOptions& opt = {}) {
    grid.validate();
    series.validate();
    if (objective == CalibrationObjective::band_pinball && !(band_alpha > 0.0 && band_alpha < 1.0)) {
        throw Error(ErrorKind::parameter, "band_alpha must lie in (0, 1)");
    }
    if (train < 1 || valid < 1 || train + valid > series.size()) {
        throw Error(ErrorKind::parameter, "calibration blocks do not fit in the series");
    }

    std::vector<Hyperparameters> cands;
    for (std::size_t d : grid.ds)
        for (double s : grid.sigmas)
            for (double g : grid.gammas) cands.push_back({s, d, g});
    std::sort(cands.begin(), cands.end(), [](const Hyperparameters& a, const Hyperparameters& b) {
        return std::tie(a.d, a.sigma, a.gamma) < std::tie(b.d, b.sigma, b.gamma);
    });
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    CalibrationResult result;
    result.candidates.reserve(cands.size());
    std::optional<std::size_t> best;
    for (const auto& hp : cands) {
        CandidateScore cs{hp, std::nullopt, {}};
        try {
            cs.score = score_candidate(series, hp, train, valid, objective, band_alpha, opt);
            if (!std::isfinite(*cs.score)) {
                cs.failure = "non-finite score";
                cs.score.reset();
            }
        } catch (const Error& e) {
            cs.failure = e.what();
        }
        result.candidates.push_back(cs);
        const auto& last = result.candidates.back();
        if (last.score && (!best || *last.score < *result.candidates[*best].score)) best = result.candidates.size() - 1;
    }
    if (!best) {
        std::ostringstream msg;
        msg << "every calibration candidate failed:";
        for (const auto& c : result.candidates) {
            msg << "\n  sigma=" << c.params.sigma << " d=" << c.params.d << " gamma=" << c.params.gamma << ": "
                << c.failure;
        }
        throw Error(ErrorKind::calibration, msg.str());
    }
    result.best = result.candidates[*best].params;
    result.best_score = *result.candidates[*best].score;
    return result;
}

/// Grid search with block sizes taken from a chronological split; the test
/// block (if any) is never touched.
inline CalibrationResult calibrate(const RawCurveSeries& series, const CalibrationGrid& grid, const SplitSpec& split,
                                   CalibrationObjective objective, double band_alpha,
                                   const CalibrationOptions& opt = {}) {
    const SplitCounts counts = split_counts(series.size(), split);
    return calibrate_blocks(series, grid, counts.train, counts.valid, objective, band_alpha, opt);
}

// ---------------------------------------------------------------------------
// Aggregation

struct MetricSummary {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
    double se = 0.0;  // sd / sqrt(count); binomial for coverage
    std::size_t count = 0;
};

inline MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        s.se = s.sd / std::sqrt(static_cast<double>(values.size()));
    }
    return s;
}

/// Coverage summary: empirical fraction with binomial standard error.
inline MetricSummary summarize_coverage(const std::vector<bool>& covered) {
    Vector v;
    v.reserve(covered.size());
    for (bool c : covered) v.push_back(c ? 1.0 : 0.0);
    MetricSummary s = summarize(v);
    if (!covered.empty()) s.se = std::sqrt(s.mean * (1.0 - s.mean) / static_cast<double>(covered.size()));
    return s;
}

struct MetricRow {
    std::string method;
    double nominal = 0.0;  // 1 - alpha
    std::optional<MetricSummary> coverage;
    std::optional<MetricSummary> amplitude;
    std::optional<MetricSummary> rmse;
};

struct MetricTable {
    std::vector<MetricRow> rows;

    [[nodiscard]] const MetricRow* find(const std::string& method, double nominal) const {
        for (const auto& r : rows)
            if (r.method == method && std::abs(r.nominal - nominal) < 1e-9) return &r;
        return nullptr;
    }
};

}  // namespace fpcb
