// Drives the fpcb executable end to end. FPCB_CLI_PATH (environment, else the
// build-time definition) points at the binary.

#include "fpcb/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace fpcb;
using json = nlohmann::json;

namespace {

std::string cli() {
    if (const char* p = std::getenv("FPCB_CLI_PATH")) return p;
#ifdef FPCB_CLI_PATH
    return FPCB_CLI_PATH;
#else
    return "fpcb";
#endif
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("fpcb_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        io::write_text(path(name), text);
        return path(name);
    }
};

std::string synthetic_csv(std::size_t n, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    RawCurveSeries s{TimeGrid::uniform(m), {}};
    double level = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        level = 0.6 * level + nd(rng);
        Vector c(m);
        for (std::size_t j = 0; j < m; ++j)
            c[j] = 30.0 + 5.0 * level + 8.0 * std::sin(2 * std::numbers::pi * s.grid[j]) + 2.0 * nd(rng);
        s.curves.push_back(std::move(c));
    }
    return io::series_to_csv(s);
}

const char* small_config = R"({"bootstrap": {"B": 60}, "calibration": {"sigmas": [5.0, 20.0], "ds": [3, 5],
    "B": 30, "valid_steps": 3}, "sim": {"n": 40}})";

}  // namespace

TEST_F(CliTest, SimulateIsByteReproducible) {
    ASSERT_EQ(run("simulate --seed 9 -o " + path("a")), 0);
    ASSERT_EQ(run("simulate --seed 9 -o " + path("b")), 0);
    ASSERT_EQ(run("simulate --seed 10 -o " + path("c")), 0);
    const std::string a = io::read_text(path("a/series.csv"));
    EXPECT_EQ(a, io::read_text(path("b/series.csv")));
    EXPECT_NE(a, io::read_text(path("c/series.csv")));
    const RawCurveSeries s = io::parse_series_csv(a);
    EXPECT_EQ(s.size(), 250u);
    EXPECT_EQ(s.grid.size(), 64u);
}

TEST_F(CliTest, ExitCodes) {
    const std::string unit_root = write("ur.json", R"({"sim": {"psi": [1.0, 0.9]}})");
    EXPECT_EQ(run("simulate -c " + unit_root + " -o " + path("x")), 2);
    const std::string unknown = write("uk.toml", "[sim]\nbogus = 1\n");
    EXPECT_EQ(run("simulate -c " + unknown + " -o " + path("x")), 3);
    EXPECT_EQ(run("predict -i " + path("missing.csv") + " -m " + path("missing.json")), 1);
    EXPECT_EQ(run("nonsense"), 3);
    const std::string bad_csv = write("bad.csv", "1,2\n3,x\n");
    EXPECT_EQ(run("fit -i " + bad_csv + " -o " + path("x")), 1);
}

TEST_F(CliTest, EnvironmentSeedAndFlagPrecedence) {
    ::setenv("FPCB_SEED", "9", 1);
    const int env_rc = run("simulate -o " + path("env"));
    const int flag_rc = run("simulate --seed 10 -o " + path("flag"));
    ::unsetenv("FPCB_SEED");
    ASSERT_EQ(env_rc, 0);
    ASSERT_EQ(flag_rc, 0);
    ASSERT_EQ(run("simulate --seed 9 -o " + path("a")), 0);
    ASSERT_EQ(run("simulate --seed 10 -o " + path("b")), 0);
    EXPECT_EQ(io::read_text(path("env/series.csv")), io::read_text(path("a/series.csv")));
    EXPECT_EQ(io::read_text(path("flag/series.csv")), io::read_text(path("b/series.csv")));
}

TEST_F(CliTest, FitPredictRoundTrip) {
    const std::string cfg = write("cfg.json", R"({"model": {"sigma": 20.0, "d": 5}, "sim": {"n": 60}})");
    ASSERT_EQ(run("simulate -c " + cfg + " -o " + path("sim")), 0);
    ASSERT_EQ(run("fit -c " + cfg + " -i " + path("sim/series.csv") + " -o " + path("fit")), 0);
    const io::ModelFile mf = io::model_from_json(io::read_json(path("fit/model.json")));
    EXPECT_EQ(mf.params.sigma, 20.0);
    EXPECT_EQ(mf.params.d, 5u);
    EXPECT_EQ(mf.n_curves, 60u);
    ASSERT_EQ(run("predict -c " + cfg + " -i " + path("sim/series.csv") + " -m " + path("fit/model.json") + " -o " +
                  path("pred")),
              0);
    const RawCurveSeries pred = io::read_series_csv(path("pred/prediction.csv"));
    ASSERT_EQ(pred.size(), 1u);
    const RawCurveSeries series = io::read_series_csv(path("sim/series.csv"));
    const Vector expect = mf.model.basis->reconstruct(
        predict_next(mf.model, mf.model.basis->project(series.curves.back())));
    for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_NEAR(pred.curves[0][j], expect[j], 1e-9);
}

TEST_F(CliTest, FitRefusesTooFewCurves) {
    const std::string cfg = write("cfg.json", R"({"model": {"sigma": 20.0, "d": 5}})");
    const std::string csv = write("short.csv", synthetic_csv(6, 16, 1));
    EXPECT_EQ(run("fit -c " + cfg + " -i " + csv + " -o " + path("fit")), 2);
}

TEST_F(CliTest, BandOutputs) {
    const std::string cfg = write("cfg.json", small_config);
    ASSERT_EQ(run("simulate -c " + cfg + " -o " + path("sim")), 0);
    const RawCurveSeries t{TimeGrid::uniform(64), {Vector(64, 0.0)}};
    const std::string truth = write("truth.csv", io::series_to_csv(t));
    ASSERT_EQ(run("band -c " + cfg + " -i " + path("sim/series.csv") + " --truth " + truth + " -o " + path("band")),
              0);
    const json report = io::read_json(path("band/report.json"));
    EXPECT_TRUE(report["nested"].get<bool>());
    ASSERT_EQ(report["bands"].size(), 3u);
    double prev = -1.0;
    for (const auto& b : report["bands"]) {
        EXPECT_TRUE(b.contains("covered"));
        EXPECT_GE(b["amplitude"].get<double>(), prev - 1e-9);
        prev = b["amplitude"].get<double>();
    }
    for (const char* alpha : {"0.2", "0.1", "0.05"}) {
        const auto rows = io::parse_csv(io::read_text(path(std::string("band/band_") + alpha + ".csv")));
        EXPECT_EQ(rows.size(), 65u);
        for (std::size_t r = 1; r < rows.size(); ++r) EXPECT_LE(std::stod(rows[r][1]), std::stod(rows[r][2]));
    }
    EXPECT_EQ(io::parse_csv(io::read_text(path("band/ensemble.csv"))).size(), 60u);
    EXPECT_EQ(io::read_json(path("band/ensemble.json"))["replicates"].get<std::size_t>(), 60u);
}

TEST_F(CliTest, RealPipelineWithPinnedParameters) {
    const std::string csv = write("daily.csv", synthetic_csv(182, 48, 3));
    const std::string cfg = write("cfg.toml", "[model]\nsigma = 1.0\nd = 7\n[bootstrap]\nB = 100\n");
    ASSERT_EQ(run("real -c " + cfg + " -i " + csv + " -o " + path("real")), 0);
    const json report = io::read_json(path("real/report.json"));
    EXPECT_EQ(report["horizons"].get<std::size_t>(), 36u);
    EXPECT_EQ(report["split"]["test"].get<std::size_t>(), 36u);
    EXPECT_TRUE(report["nested"].get<bool>());
    EXPECT_FALSE(report["calibrated"].get<bool>());
    EXPECT_EQ(report["prediction_params"]["sigma"].get<double>(), 1.0);
    EXPECT_EQ(report["prediction_params"]["d"].get<std::size_t>(), 7u);
    EXPECT_EQ(io::parse_csv(io::read_text(path("real/horizons.csv"))).size(), 1u + 36u * 3u);
}

TEST_F(CliTest, McStudyTableMatchesIndependentReaggregation) {
    const std::string cfg =
        write("cfg.json", R"({"bootstrap": {"B": 60}, "calibration": {"sigmas": [5.0, 20.0], "ds": [3, 5],
        "B": 30, "valid_steps": 3}, "sim": {"n": 40}, "mc": {"replicates": 3}})");
    ASSERT_EQ(run("mc-study -c " + cfg + " --threads 1 -o " + path("mc")), 0);
    const auto records = io::parse_csv(io::read_text(path("mc/records.csv")));
    ASSERT_EQ(records.size(), 1u + 3u * 5u * 3u);
    // group by (method, alpha) straight from the raw CSV cells
    std::map<std::pair<std::string, std::string>, std::vector<std::vector<std::string>>> groups;
    for (std::size_t r = 1; r < records.size(); ++r) groups[{records[r][2], records[r][3]}].push_back(records[r]);
    const auto table = io::parse_csv(io::read_text(path("mc/table.csv")));
    ASSERT_GT(table.size(), 1u);
    std::size_t checked = 0;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        if (row[0] == "fpcb" || row[0] == "gaussian" || row[0] == "empirical") {
            const double nominal = std::stod(row[1]);
            std::vector<std::vector<std::string>>* g = nullptr;
            for (auto& [key, rows] : groups)
                if (key.first == row[0] && std::abs(std::stod(key.second) - (1.0 - nominal)) < 1e-9) g = &rows;
            ASSERT_NE(g, nullptr) << row[0] << " " << nominal;
            double cov = 0.0, amp = 0.0;
            for (const auto& rec : *g) {
                cov += std::stod(rec[4]);
                amp += std::stod(rec[5]);
            }
            cov /= static_cast<double>(g->size());
            amp /= static_cast<double>(g->size());
            EXPECT_NEAR(std::stod(row[2]), cov, 1e-12);
            EXPECT_NEAR(std::stod(row[5]), amp, 1e-9 * (1 + amp));
            EXPECT_EQ(std::stoul(row[11]), g->size());
            ++checked;
        } else {
            EXPECT_TRUE(row[1].empty());
            const std::string source = row[0] == "arh-rkhs" ? "fpcb" : row[0];
            double rmse = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 1; i < records.size(); ++i)
                if (records[i][2] == source && std::stod(records[i][3]) == 0.2) {
                    rmse += std::stod(records[i][6]);
                    ++n;
                }
            EXPECT_NEAR(std::stod(row[8]), rmse / static_cast<double>(n), 1e-9);
            ++checked;
        }
    }
    EXPECT_EQ(checked, 9u + 3u);
    const json study = io::read_json(path("mc/study.json"));
    EXPECT_EQ(study["failures"].get<std::size_t>(), 0u);
}
