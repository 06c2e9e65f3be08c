#pragma once

// End-to-end experiment drivers: the Monte Carlo coverage/amplitude study on
// simulated ARH(1) data and the rolling test-block pipeline for observed
// series.

#include "fpcb/arh.hpp"
#include "fpcb/bands.hpp"
#include "fpcb/bootstrap.hpp"
#include "fpcb/evalkit.hpp"
#include "fpcb/parallel.hpp"
#include "fpcb/rkhs.hpp"
#include "fpcb/simulator.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fpcb {

inline const std::vector<std::string>& study_methods() {
    static const std::vector<std::string> methods{"fpcb", "gaussian", "empirical", "mean", "persistence"};
    return methods;
}

/// Settings shared by the Monte Carlo study and the observed-data pipeline.
struct PipelineSettings {
    CalibrationGrid grid{{5.0, 20.0, 50.0}, {3, 5, 7}, {1e-4}};
    std::optional<Hyperparameters> pinned;  // skips calibration when set
    bool joint_band_calibration = true;     // false: bands reuse the RMSE-optimal parameters
    double band_alpha = 0.1;                // risk level scored by the band calibration
    std::size_t calibration_B = 0;          // 0: same as bootstrap.B
    std::size_t calibration_valid_steps = 0;  // 0: all validation curves
    std::vector<double> alphas{0.2, 0.1, 0.05};
    BootstrapSpec bootstrap;
    std::size_t knn_k = 0;  // 0: ceil(sqrt(B))
    double ridge = 0.0;
    NumericPolicy policy;
};

struct ChosenParameters {
    Hyperparameters prediction;
    Hyperparameters band;
    bool calibrated = false;
};

inline ChosenParameters choose_parameters(const RawCurveSeries& series, std::size_t train, std::size_t valid,
                                          const PipelineSettings& s, std::uint64_t seed) {
    if (s.pinned) return {*s.pinned, *s.pinned, false};
    CalibrationOptions opt;
    opt.ridge = s.ridge;
    opt.policy = s.policy;
    opt.knn_k = s.knn_k;
    opt.max_valid_steps = s.calibration_valid_steps;
    opt.bootstrap = s.bootstrap;
    opt.bootstrap.seed = seed;
    opt.bootstrap.threads = 1;
    if (s.calibration_B) opt.bootstrap.B = s.calibration_B;
    ChosenParameters out;
    out.calibrated = true;
    out.prediction = calibrate_blocks(series, s.grid, train, valid, CalibrationObjective::rmse, 0.0, opt).best;
    out.band = s.joint_band_calibration
                   ? calibrate_blocks(series, s.grid, train, valid, CalibrationObjective::band_pinball, s.band_alpha, opt)
                         .best
                   : out.prediction;
    return out;
}

/// Everything needed to forecast and band the curve following a fitted block.
struct FittedPipeline {
    std::shared_ptr<const RkhsBasis> pred_basis;
    ArhModel pred_model;
    RkhsRepresentation pred_rep;
    std::shared_ptr<const RkhsBasis> band_basis;
    BootstrapDraws draws;
};

inline FittedPipeline fit_pipeline(const RawCurveSeries& block, const ChosenParameters& p, const PipelineSettings& s,
                                   std::uint64_t seed, std::size_t threads) {
    FittedPipeline fp;
    fp.pred_basis = std::make_shared<const RkhsBasis>(block.grid, KernelSpec{KernelFamily::gaussian, p.prediction.sigma},
                                                      p.prediction.gamma, p.prediction.d, s.policy);
    fp.pred_rep = represent_with(fp.pred_basis, block);
    fp.pred_model = fit(fp.pred_rep, s.ridge, s.policy);

    RkhsRepresentation band_rep = fp.pred_rep;
    ArhModel band_model = fp.pred_model;
    if (!(p.band == p.prediction)) {
        fp.band_basis = std::make_shared<const RkhsBasis>(block.grid, KernelSpec{KernelFamily::gaussian, p.band.sigma},
                                                          p.band.gamma, p.band.d, s.policy);
        band_rep = represent_with(fp.band_basis, block);
        band_model = fit(band_rep, s.ridge, s.policy);
    } else {
        fp.band_basis = fp.pred_basis;
    }
    BootstrapSpec spec = s.bootstrap;
    spec.seed = seed;
    spec.threads = threads;
    const auto fr = fitted_and_residuals(band_model, band_rep);
    fp.draws = draw_bootstrap(band_rep, band_model, fr.pool, spec);
    return fp;
}

struct StepBands {
    Vector prediction;  // ARH-RKHS point forecast
    BootstrapEnsemble ensemble;
    std::vector<PredictiveBand> hull;       // one per alpha
    std::vector<PredictiveBand> gaussian;   // one per alpha
    std::vector<PredictiveBand> empirical;  // one per alpha
};

/// Forecast and bands for the curve that follows `previous`.
inline StepBands forecast_step(const FittedPipeline& fp, std::span<const double> previous, const PipelineSettings& s,
                               std::size_t threads) {
    StepBands out;
    const Vector pred_last = fp.pred_basis->project(previous);
    out.prediction = fp.pred_basis->reconstruct(predict_next(fp.pred_model, pred_last));
    const Vector band_last = fp.band_basis->project(previous);
    out.ensemble = forecast_ensemble(fp.draws, band_last);
    const std::size_t k = s.knn_k ? s.knn_k : default_knn_k(out.ensemble.size());
    const EntropyScores scores = knn_entropy_scores(out.ensemble.replicate_coeffs, k, threads);
    for (double alpha : s.alphas) {
        out.hull.push_back(build_hull_band(out.ensemble, select_mes(scores, alpha), fp.band_basis->grid()));
        out.gaussian.push_back(build_pointwise_band(out.ensemble, alpha, PointwiseKind::gaussian));
        out.empirical.push_back(build_pointwise_band(out.ensemble, alpha, PointwiseKind::empirical));
    }
    return out;
}

/// True when each band contains the next one in the list on every grid point
/// (alphas ordered from largest to smallest).
inline bool bands_nested(const std::vector<PredictiveBand>& bands, double tol = 1e-9) {
    for (std::size_t a = 1; a < bands.size(); ++a)
        for (std::size_t i = 0; i < bands[a].lower.size(); ++i)
            if (bands[a].lower[i] > bands[a - 1].lower[i] + tol || bands[a].upper[i] < bands[a - 1].upper[i] - tol)
                return false;
    return true;
}

// ---------------------------------------------------------------------------
// Monte Carlo study

struct StudyConfig {
    ArhSimSpec sim;  // sim.n is the sample size N; one extra curve is simulated for testing
    std::size_t replicates = 100;
    std::uint64_t seed = 1;  // replicate r uses seed + r
    SplitSpec split{0.8, 0.2, 0.0};
    PipelineSettings pipeline;
    std::size_t threads = 0;
    double max_failure_fraction = 0.05;
};

struct ReplicateRecord {
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    std::string method;
    double alpha = 0.0;
    std::optional<bool> covered;
    std::optional<double> amplitude;
    double rmse = 0.0;
};

struct ReplicateOutcome {
    std::vector<ReplicateRecord> records;
    ChosenParameters params;
    bool nested = true;
};

struct McStudyResult {
    std::vector<ReplicateRecord> records;
    MetricTable table;
    std::size_t failures = 0;
    std::vector<std::string> failure_messages;
    std::vector<ChosenParameters> params;  // per successful replicate
};

inline ReplicateOutcome run_replicate(const StudyConfig& cfg, std::size_t r) {
    const std::uint64_t seed = cfg.seed + r;
    ArhSimSpec sim = cfg.sim;
    sim.seed = seed;
    sim.n = cfg.sim.n + 1;
    const SimResult simres = simulate(sim, cfg.pipeline.policy);
    const Vector truth = simres.series.curves.back();
    RawCurveSeries block{simres.series.grid, {}};
    block.curves.assign(simres.series.curves.begin(), simres.series.curves.end() - 1);

    const SplitCounts counts = split_counts(block.size(), cfg.split);
    ReplicateOutcome out;
    out.params = choose_parameters(block, counts.train, counts.valid, cfg.pipeline, seed);
    const FittedPipeline fp = fit_pipeline(block, out.params, cfg.pipeline, seed, 1);
    const StepBands step = forecast_step(fp, block.curves.back(), cfg.pipeline, 1);
    out.nested = bands_nested(step.hull);

    const double arh_rmse = rmse(step.prediction, truth);
    const double mean_rmse = rmse(baseline_predict(BaselineKind::mean, fp.pred_rep), truth);
    const double persist_rmse = rmse(baseline_predict(BaselineKind::persistence, fp.pred_rep), truth);
    const TimeGrid& grid = block.grid;
    const double slack = cfg.pipeline.policy.hull_slack;
    for (std::size_t a = 0; a < cfg.pipeline.alphas.size(); ++a) {
        const double alpha = cfg.pipeline.alphas[a];
        auto band_record = [&](const char* method, const PredictiveBand& band) {
            const BandReport rep = evaluate_band(band, truth, grid, slack);
            out.records.push_back({r, seed, method, alpha, rep.covered, rep.amplitude, arh_rmse});
        };
        band_record("fpcb", step.hull[a]);
        band_record("gaussian", step.gaussian[a]);
        band_record("empirical", step.empirical[a]);
        out.records.push_back({r, seed, "mean", alpha, std::nullopt, std::nullopt, mean_rmse});
        out.records.push_back({r, seed, "persistence", alpha, std::nullopt, std::nullopt, persist_rmse});
    }
    return out;
}

/// Aggregated table as a pure function of the records. Band methods get
/// coverage and amplitude per nominal level; RMSE rows are reported for
/// arh-rkhs (taken from the fpcb records), mean and persistence at the first
/// nominal level only, since RMSE does not depend on alpha.
inline MetricTable aggregate_records(const std::vector<ReplicateRecord>& records) {
    std::vector<double> alphas;
    for (const auto& rec : records)
        if (std::find(alphas.begin(), alphas.end(), rec.alpha) == alphas.end()) alphas.push_back(rec.alpha);
    std::sort(alphas.begin(), alphas.end(), std::greater<>());

    MetricTable table;
    for (const std::string method : {"fpcb", "gaussian", "empirical"}) {
        for (double alpha : alphas) {
            std::vector<bool> cov;
            Vector amp;
            for (const auto& rec : records) {
                if (rec.method != method || rec.alpha != alpha || !rec.covered) continue;
                cov.push_back(*rec.covered);
                amp.push_back(*rec.amplitude);
            }
            if (cov.empty()) continue;
            table.rows.push_back({method, 1.0 - alpha, summarize_coverage(cov), summarize(amp), std::nullopt});
        }
    }
    if (!alphas.empty()) {
        const double a0 = alphas.front();
        for (const auto& [label, source] : std::vector<std::pair<std::string, std::string>>{
                 {"arh-rkhs", "fpcb"}, {"mean", "mean"}, {"persistence", "persistence"}}) {
            Vector vals;
            for (const auto& rec : records)
                if (rec.method == source && rec.alpha == a0) vals.push_back(rec.rmse);
            if (!vals.empty()) table.rows.push_back({label, 0.0, std::nullopt, std::nullopt, summarize(vals)});
        }
    }
    return table;
}

inline McStudyResult run_mc_study(const StudyConfig& cfg) {
    std::vector<std::optional<ReplicateOutcome>> outcomes(cfg.replicates);
    std::vector<std::string> errors(cfg.replicates);
    parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
        try {
            outcomes[r] = run_replicate(cfg, r);
        } catch (const Error& e) {
            errors[r] = e.what();
        }
    });
    McStudyResult result;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
        if (!outcomes[r]) {
            ++result.failures;
            result.failure_messages.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
            continue;
        }
        result.records.insert(result.records.end(), outcomes[r]->records.begin(), outcomes[r]->records.end());
        result.params.push_back(outcomes[r]->params);
    }
    if (static_cast<double>(result.failures) > cfg.max_failure_fraction * static_cast<double>(cfg.replicates)) {
        std::string msg = std::to_string(result.failures) + " of " + std::to_string(cfg.replicates) +
                          " replicates failed";
        if (!result.failure_messages.empty()) msg += "; first: " + result.failure_messages.front();
        throw Error(ErrorKind::numeric, msg);
    }
    result.table = aggregate_records(result.records);
    return result;
}

// ---------------------------------------------------------------------------
// Observed-series pipeline

struct RealConfig {
    SplitSpec split{0.6, 0.2, 0.2};
    bool sqrt_transform = false;
    bool refit_each_step = false;
    std::uint64_t seed = 1;
    PipelineSettings pipeline;
    std::size_t threads = 0;
};

struct HorizonReport {
    std::size_t horizon = 0;  // 1-based position in the test block
    std::size_t index = 0;    // 0-based curve index in the series
    double rmse = 0.0;
    std::vector<double> alphas;
    std::vector<BandReport> fpcb;
    std::vector<BandReport> gaussian;
    std::vector<BandReport> empirical;
    bool nested = true;
    Vector truth;
    Vector prediction;
    std::vector<PredictiveBand> bands;  // hull bands per alpha
};

struct RealResult {
    ChosenParameters params;
    SplitCounts counts;
    std::vector<HorizonReport> horizons;
    MetricTable table;
};

inline RawCurveSeries sqrt_transformed(const RawCurveSeries& series) {
    RawCurveSeries out = series;
    for (std::size_t k = 0; k < out.curves.size(); ++k)
        for (std::size_t i = 0; i < out.curves[k].size(); ++i) {
            const double v = out.curves[k][i];
            if (v < 0.0) {
                throw Error(ErrorKind::parameter, "square-root transform needs non-negative data (curve " +
                                                      std::to_string(k) + ", column " + std::to_string(i) + ")");
            }
            out.curves[k][i] = std::sqrt(v);
        }
    return out;
}

inline RealResult run_real(const RawCurveSeries& raw, const RealConfig& cfg) {
    raw.validate();
    const RawCurveSeries series = cfg.sqrt_transform ? sqrt_transformed(raw) : raw;
    RealResult result;
    result.counts = split_counts(series.size(), cfg.split);
    if (result.counts.test == 0) throw Error(ErrorKind::parameter, "observed-data pipeline needs a test block");
    const std::size_t fit_end = result.counts.train + result.counts.valid;
    RawCurveSeries calib = detail::head(series, fit_end);
    result.params = choose_parameters(calib, result.counts.train, result.counts.valid, cfg.pipeline, cfg.seed);

    std::optional<FittedPipeline> fp;
    const std::size_t threads = resolve_threads(cfg.threads);
    for (std::size_t j = fit_end; j < series.size(); ++j) {
        if (!fp || cfg.refit_each_step) {
            fp = fit_pipeline(detail::head(series, j), result.params, cfg.pipeline, cfg.seed + j, threads);
        }
        const StepBands step = forecast_step(*fp, series.curves[j - 1], cfg.pipeline, threads);
        HorizonReport h;
        h.horizon = j - fit_end + 1;
        h.index = j;
        h.truth = series.curves[j];
        h.prediction = step.prediction;
        h.rmse = rmse(step.prediction, h.truth);
        h.alphas = cfg.pipeline.alphas;
        h.nested = bands_nested(step.hull);
        const double slack = cfg.pipeline.policy.hull_slack;
        for (std::size_t a = 0; a < h.alphas.size(); ++a) {
            h.fpcb.push_back(evaluate_band(step.hull[a], h.truth, series.grid, slack));
            h.gaussian.push_back(evaluate_band(step.gaussian[a], h.truth, series.grid, slack));
            h.empirical.push_back(evaluate_band(step.empirical[a], h.truth, series.grid, slack));
        }
        h.bands = step.hull;
        result.horizons.push_back(std::move(h));
    }

    for (const auto& [method, pick] : std::vector<std::pair<std::string, int>>{{"fpcb", 0}, {"gaussian", 1}, {"empirical", 2}}) {
        for (std::size_t a = 0; a < cfg.pipeline.alphas.size(); ++a) {
            std::vector<bool> cov;
            Vector amp;
            for (const auto& h : result.horizons) {
                const auto& rep = pick == 0 ? h.fpcb[a] : pick == 1 ? h.gaussian[a] : h.empirical[a];
                cov.push_back(rep.covered);
                amp.push_back(rep.amplitude);
            }
            result.table.rows.push_back({method, 1.0 - cfg.pipeline.alphas[a], summarize_coverage(cov), summarize(amp),
                                         std::nullopt});
        }
    }
    Vector errs;
    for (const auto& h : result.horizons) errs.push_back(h.rmse);
    result.table.rows.push_back({"arh-rkhs", 0.0, std::nullopt, std::nullopt, summarize(errs)});
    return result;
}

}  // namespace fpcb
