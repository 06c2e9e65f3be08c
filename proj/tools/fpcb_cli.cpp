// fpcb: simulate, fit, predict, band, mc-study and real subcommands.

#include "fpcb/config.hpp"
#include "fpcb/io.hpp"
#include "fpcb/study.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace fpcb;
using json = nlohmann::json;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out;
    std::string input;
};

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (f.config.empty()) c.fingerprint = io::fingerprint("defaults");
    apply_env_overrides(c);
    if (f.seed) c.seed = *f.seed;
    if (f.threads) c.threads = *f.threads;
    if (!f.out.empty()) c.io.output_dir = f.out;
    if (!f.input.empty()) c.io.input = f.input;
    c.validate();
    return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.io.output_dir);
    return (fs::path(c.io.output_dir) / name).string();
}

RawCurveSeries load_input(const RunConfig& c) {
    if (c.io.input.empty()) throw Error(ErrorKind::config, "no input series: pass --input or set io.input");
    return io::read_series_csv(c.io.input);
}

std::string alpha_tag(double alpha) { return io::format_double(alpha); }

ChosenParameters parameters_for(const RawCurveSeries& series, const RunConfig& c) {
    const SplitSpec split = c.split.value_or(SplitSpec{0.8, 0.2, 0.0});
    const SplitCounts counts = split_counts(series.size(), split);
    return choose_parameters(series, counts.train, counts.valid, c.pipeline(), c.seed);
}

int cmd_simulate(const RunConfig& c) {
    ArhSimSpec spec = c.sim;
    spec.seed = c.seed;
    const SimOperators ops = assemble_operators(spec);
    const Matrix ge = symmetrize(ops.gamma0 - ops.psi * ops.gamma0 * ops.psi.transpose());
    const double lmin = sym_eigen(ge, c.policy).values.back();
    std::cout << "Gamma_eps minimum eigenvalue: " << lmin << "\n";
    std::cout << "Gamma_eps diagonal:";
    for (double v : ge.diag()) std::cout << " " << v;
    std::cout << "\n";
    const bool ok = lmin >= -c.policy.innovation_psd_tol;
    std::cout << "compatibility: " << (ok ? "compatible" : "incompatible") << "\n";
    const SimResult res = simulate(spec, c.policy);
    const std::string path = out_path(c, "series.csv");
    io::write_text(path, io::series_to_csv(res.series));
    std::cout << "wrote " << res.series.size() << " curves x " << res.series.grid.size() << " points to " << path << "\n";
    return 0;
}

int cmd_fit(const RunConfig& c) {
    const RawCurveSeries series = load_input(c);
    const ChosenParameters p = parameters_for(series, c);
    const Hyperparameters& hp = p.prediction;
    if (series.size() < hp.d + 2) {
        throw Error(ErrorKind::parameter, "fit refused: need at least d + 2 = " + std::to_string(hp.d + 2) +
                                              " curves, have " + std::to_string(series.size()));
    }
    const auto rep = represent_series(series, KernelSpec{KernelFamily::gaussian, hp.sigma}, hp.gamma, hp.d, c.policy);
    io::ModelFile mf;
    mf.model = fit(rep, c.ridge, c.policy);
    mf.grid = series.grid;
    mf.params = hp;
    mf.ridge = c.ridge;
    mf.n_curves = series.size();
    mf.input_fingerprint = io::fingerprint(io::read_text(c.io.input));
    mf.config_fingerprint = c.fingerprint;
    const std::string path = out_path(c, "model.json");
    io::write_json(path, io::model_to_json(mf));
    std::cout << "fitted sigma=" << hp.sigma << " d=" << hp.d << " gamma=" << hp.gamma << (p.calibrated ? " (calibrated)" : " (pinned)")
              << "\nwrote " << path << "\n";
    return 0;
}

int cmd_predict(const RunConfig& c) {
    if (c.io.model.empty()) throw Error(ErrorKind::config, "no model: pass --model or set io.model");
    const io::ModelFile mf = io::model_from_json(io::read_json(c.io.model), c.policy);
    if (c.io.input.empty()) throw Error(ErrorKind::config, "no input series: pass --input or set io.input");
    const RawCurveSeries series = io::read_series_csv(c.io.input, mf.grid);
    const Vector last = mf.model.basis->project(series.curves.back());
    const Vector pred = point_forecast(mf.model, *mf.model.basis, last, c.bootstrap.h);
    RawCurveSeries out{mf.grid, {pred}};
    const std::string path = out_path(c, "prediction.csv");
    io::write_text(path, io::series_to_csv(out));
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_band(const RunConfig& c) {
    const RawCurveSeries series = load_input(c);
    ChosenParameters p;
    if (!c.io.model.empty()) {
        const io::ModelFile mf = io::model_from_json(io::read_json(c.io.model), c.policy);
        p = {mf.params, mf.params, false};
    } else {
        p = parameters_for(series, c);
    }
    const PipelineSettings s = c.pipeline();
    const std::size_t threads = resolve_threads(c.threads);
    const FittedPipeline fp = fit_pipeline(series, p, s, c.seed, threads);
    const StepBands step = forecast_step(fp, series.curves.back(), s, threads);
    if (!bands_nested(step.hull)) throw Error(ErrorKind::numeric, "bands at decreasing alpha are not nested");

    std::optional<Vector> truth;
    if (!c.io.truth.empty()) {
        const RawCurveSeries t = io::read_series_csv(c.io.truth, series.grid);
        truth = t.curves.front();
    }
    json report;
    report["version"] = io::report_format_version;
    report["command"] = "band";
    report["prediction_params"] = io::params_to_json(p.prediction);
    report["band_params"] = io::params_to_json(p.band);
    report["calibrated"] = p.calibrated;
    report["B"] = c.bootstrap.B;
    report["h"] = c.bootstrap.h;
    report["seed"] = c.seed;
    report["nested"] = true;
    report["fingerprint"] = {{"input", io::fingerprint(io::read_text(c.io.input))}, {"config", c.fingerprint}};
    json bands = json::array();
    for (std::size_t a = 0; a < c.alphas.size(); ++a) {
        const double alpha = c.alphas[a];
        const PredictiveBand& band = step.hull[a];
        io::write_text(out_path(c, "band_" + alpha_tag(alpha) + ".csv"), io::band_to_csv(band, series.grid));
        if (band.hull) io::write_text(out_path(c, "hull_" + alpha_tag(alpha) + ".csv"), io::hull_to_csv(*band.hull));
        json entry{{"alpha", alpha}, {"kind", to_string(band.kind)}, {"amplitude", band_amplitude(band, series.grid)}};
        if (truth) entry["covered"] = evaluate_band(band, *truth, series.grid, c.policy.hull_slack).covered;
        bands.push_back(entry);
    }
    report["bands"] = bands;
    io::write_json(out_path(c, "report.json"), report);
    io::write_text(out_path(c, "ensemble.csv"), io::ensemble_to_csv(step.ensemble));
    io::write_json(out_path(c, "ensemble.json"),
                   {{"version", io::report_format_version}, {"replicates", step.ensemble.size()},
                    {"grid", series.grid.points()}, {"seed", c.seed}, {"h", c.bootstrap.h},
                    {"band_params", io::params_to_json(p.band)}});
    RawCurveSeries pred{series.grid, {step.prediction}};
    io::write_text(out_path(c, "prediction.csv"), io::series_to_csv(pred));
    std::cout << "wrote bands for " << c.alphas.size() << " levels to " << c.io.output_dir << "\n";
    return 0;
}

int cmd_mc_study(const RunConfig& c) {
    StudyConfig sc;
    sc.sim = c.sim;
    sc.replicates = c.replicates;
    sc.seed = c.seed;
    sc.split = c.split.value_or(SplitSpec{0.8, 0.2, 0.0});
    sc.pipeline = c.pipeline();
    sc.threads = c.threads;
    const McStudyResult res = run_mc_study(sc);
    io::write_text(out_path(c, "records.csv"), io::records_to_csv(res.records));
    io::write_text(out_path(c, "table.csv"), io::table_to_csv(res.table));
    const std::string text = io::table_to_text(res.table);
    io::write_text(out_path(c, "table.txt"), text);
    json summary{{"version", io::report_format_version},
                 {"command", "mc-study"},
                 {"replicates", c.replicates},
                 {"failures", res.failures},
                 {"failure_messages", res.failure_messages},
                 {"N", c.sim.n},
                 {"B", c.bootstrap.B},
                 {"seed", c.seed},
                 {"config_fingerprint", c.fingerprint}};
    io::write_json(out_path(c, "study.json"), summary);
    std::cout << text;
    if (res.failures) std::cout << res.failures << " replicate(s) failed and were excluded\n";
    return 0;
}

int cmd_real(const RunConfig& c) {
    const RawCurveSeries series = load_input(c);
    RealConfig rc;
    rc.split = c.split.value_or(SplitSpec{0.6, 0.2, 0.2});
    rc.sqrt_transform = c.sqrt_transform;
    rc.refit_each_step = c.refit_each_step;
    rc.seed = c.seed;
    rc.pipeline = c.pipeline();
    rc.threads = c.threads;
    const RealResult res = run_real(series, rc);
    io::write_text(out_path(c, "horizons.csv"), io::horizons_to_csv(res));
    io::write_text(out_path(c, "plot.csv"), io::plot_to_csv(res, series.grid));
    io::write_text(out_path(c, "table.csv"), io::table_to_csv(res.table));
    const std::string text = io::table_to_text(res.table);
    io::write_text(out_path(c, "table.txt"), text);
    bool nested = true;
    for (const auto& h : res.horizons) nested = nested && h.nested;
    json report{{"version", io::report_format_version},
                {"command", "real"},
                {"split", {{"train", res.counts.train}, {"valid", res.counts.valid}, {"test", res.counts.test}}},
                {"horizons", res.horizons.size()},
                {"calibrated", res.params.calibrated},
                {"prediction_params", io::params_to_json(res.params.prediction)},
                {"band_params", io::params_to_json(res.params.band)},
                {"sqrt_transform", c.sqrt_transform},
                {"refit_each_step", c.refit_each_step},
                {"nested", nested},
                {"fingerprint", {{"input", io::fingerprint(io::read_text(c.io.input))}, {"config", c.fingerprint}}}};
    io::write_json(out_path(c, "report.json"), report);
    std::cout << "test horizons: " << res.horizons.size() << "\n" << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Functional prediction bands for ARH(1) series"};
    app.require_subcommand(1);
    CommonFlags flags;
    std::string model_path;
    std::string truth_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", flags.config, "TOML or JSON configuration file");
        sub->add_option("--seed", flags.seed, "random seed (overrides FPCB_SEED and the file)");
        sub->add_option("--threads", flags.threads, "worker threads, 0 for all cores (overrides FPCB_THREADS)");
        sub->add_option("-o,--out", flags.out, "output directory");
    };
    auto* sim = app.add_subcommand("simulate", "simulate an ARH(1) series to series.csv");
    auto* fit_cmd = app.add_subcommand("fit", "fit the RKHS representation and ARH(1) model to model.json");
    auto* pred = app.add_subcommand("predict", "point forecast of the next curve from model.json");
    auto* band = app.add_subcommand("band", "bootstrap prediction bands for the next curve");
    auto* mc = app.add_subcommand("mc-study", "Monte Carlo coverage study on simulated data");
    auto* real = app.add_subcommand("real", "rolling test-block evaluation on an observed series");
    for (auto* sub : {sim, fit_cmd, pred, band, mc, real}) add_common(sub);
    for (auto* sub : {fit_cmd, pred, band, real}) sub->add_option("-i,--input", flags.input, "series CSV");
    for (auto* sub : {pred, band}) sub->add_option("-m,--model", model_path, "model.json");
    band->add_option("--truth", truth_path, "CSV holding the realized next curve");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code_for(ErrorKind::config);
    }

    try {
        RunConfig c = resolve_config(flags);
        if (!model_path.empty()) c.io.model = model_path;
        if (!truth_path.empty()) c.io.truth = truth_path;
        if (*sim) return cmd_simulate(c);
        if (*fit_cmd) return cmd_fit(c);
        if (*pred) return cmd_predict(c);
        if (*band) return cmd_band(c);
        if (*mc) return cmd_mc_study(c);
        if (*real) return cmd_real(c);
    } catch (const Error& e) {
        std::cerr << "fpcb: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "fpcb: io error: " << e.what() << "\n";
        return exit_code_for(ErrorKind::io);
    } catch (const std::exception& e) {
        std::cerr << "fpcb: " << e.what() << "\n";
        return exit_code_for(ErrorKind::numeric);
    }
    return 0;
}
