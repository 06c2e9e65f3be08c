#include "fpcb/config.hpp"
#include "fpcb/io.hpp"
#include "fpcb/simulator.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

using namespace fpcb;

namespace {

std::string error_text(const std::function<void()>& fn, ErrorKind expect) {
    try {
        fn();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), expect) << e.what();
        return e.what();
    }
    ADD_FAILURE() << "expected an error";
    return {};
}

struct EnvGuard {
    std::string name;
    explicit EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
    ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST(Csv, QuotedFieldsAndLineEndings) {
    const auto rows = io::parse_csv("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,2,3\n");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0][1], "b,c");
    EXPECT_EQ(rows[0][2], "say \"hi\"");
    EXPECT_EQ(rows[1][2], "3");
    EXPECT_EQ(io::csv_escape("x,y"), "\"x,y\"");
    EXPECT_EQ(io::csv_escape("plain"), "plain");
}

TEST(SeriesCsv, ErrorsNameRowAndColumn) {
    const std::string msg =
        error_text([] { io::parse_series_csv("1,2,3\n4,oops,6\n"); }, ErrorKind::parse);
    EXPECT_NE(msg.find("row 2, column 2"), std::string::npos) << msg;
    const std::string ragged = error_text([] { io::parse_series_csv("1,2,3\n4,5\n"); }, ErrorKind::parse);
    EXPECT_NE(ragged.find("row 2"), std::string::npos) << ragged;
    error_text([] { io::parse_series_csv("1,nan,3\n"); }, ErrorKind::parse);
    error_text([] { io::parse_series_csv(""); }, ErrorKind::parse);
}

TEST(SeriesCsv, HeaderGrid) {
    const RawCurveSeries s = io::parse_series_csv("t=0,t=0.5,t=1\n1,2,3\n4,5,6\n");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.grid[1], 0.5);
    EXPECT_EQ(s.curves[1][2], 6.0);
    const RawCurveSeries plain = io::parse_series_csv("1,2,3,4\n");
    EXPECT_EQ(plain.grid, TimeGrid::uniform(4));
    error_text([] { io::parse_series_csv("t=0,t=0.5,t=1\n1,2,3\n", TimeGrid::uniform(3)); }, ErrorKind::parse);
    error_text([] { io::parse_series_csv("t=0,x,t=1\n1,2,3\n"); }, ErrorKind::parse);
}

TEST(SeriesCsv, RoundTripIsExact) {
    ArhSimSpec spec;
    spec.n = 12;
    const RawCurveSeries s = simulate(spec).series;
    const RawCurveSeries back = io::parse_series_csv(io::series_to_csv(s));
    EXPECT_EQ(back.grid, s.grid);
    EXPECT_EQ(back.curves, s.curves);
}

TEST(ModelJson, RoundTrip) {
    ArhSimSpec spec;
    spec.n = 60;
    const RawCurveSeries s = simulate(spec).series;
    const auto rep = represent_series(s, KernelSpec{KernelFamily::gaussian, 20.0}, 1e-4, 5);
    io::ModelFile mf;
    mf.model = fit(rep);
    mf.grid = s.grid;
    mf.params = {20.0, 5, 1e-4};
    mf.n_curves = 60;
    mf.input_fingerprint = io::fingerprint(io::series_to_csv(s));
    const io::ModelFile back = io::model_from_json(nlohmann::json::parse(io::model_to_json(mf).dump()));
    EXPECT_EQ(back.params, mf.params);
    EXPECT_EQ(back.input_fingerprint, mf.input_fingerprint);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(back.model.mean_coeffs[i], mf.model.mean_coeffs[i], 1e-12);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(back.model.autoreg(i, j), mf.model.autoreg(i, j), 1e-12);
    }
    const Vector last(rep.coeffs.row(59).begin(), rep.coeffs.row(59).end());
    const Vector p0 = rep.basis->reconstruct(predict_next(mf.model, last));
    const Vector p1 = back.model.basis->reconstruct(predict_next(back.model, last));
    for (std::size_t j = 0; j < p0.size(); ++j) EXPECT_NEAR(p0[j], p1[j], 1e-12);
}

TEST(ModelJson, RejectsWrongVersionAndShapes) {
    nlohmann::json j = {{"version", 2}};
    error_text([&] { io::model_from_json(j); }, ErrorKind::parse);
    error_text([] { io::model_from_json(nlohmann::json::object()); }, ErrorKind::parse);
}

TEST(Fingerprint, StableAndSensitive) {
    EXPECT_EQ(io::fingerprint("abc"), io::fingerprint("abc"));
    EXPECT_NE(io::fingerprint("abc"), io::fingerprint("abd"));
    EXPECT_EQ(io::fingerprint("").size(), 16u);
}

TEST(Config, DefaultsAndUnknownKeys) {
    const RunConfig c = parse_config("{}", false);
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.alphas, (std::vector<double>{0.2, 0.1, 0.05}));
    EXPECT_FALSE(c.pinned().has_value());
    const std::string msg = error_text([] { parse_config(R"({"model": {"sigmaa": 1}})", false); }, ErrorKind::config);
    EXPECT_NE(msg.find("model.sigmaa"), std::string::npos);
    error_text([] { parse_config(R"({"bogus": 1})", false); }, ErrorKind::config);
    error_text([] { parse_config("[model]\nbogus = 1\n", true); }, ErrorKind::config);
    error_text([] { parse_config(R"({"seed": "x"})", false); }, ErrorKind::config);
    error_text([] { parse_config("{", false); }, ErrorKind::config);
}

TEST(Config, TomlAndJsonAgree) {
    const std::string toml = R"(
seed = 7
alphas = [0.3, 0.1]
[model]
sigma = 1.0
d = 7
[bootstrap]
B = 50
refit = false
[sim]
psi = [0.5, 0.4]
gamma0 = [1.0, 0.5]
n = 30
[split]
train = 0.6
valid = 0.2
test = 0.2
[calibration]
sigmas = [2.0, 4.0]
ds = [2]
[policy]
hull_slack = 1e-8
)";
    const std::string js = R"({"seed": 7, "alphas": [0.3, 0.1], "model": {"sigma": 1.0, "d": 7},
        "bootstrap": {"B": 50, "refit": false}, "sim": {"psi": [0.5, 0.4], "gamma0": [1.0, 0.5], "n": 30},
        "split": {"train": 0.6, "valid": 0.2, "test": 0.2}, "calibration": {"sigmas": [2.0, 4.0], "ds": [2]},
        "policy": {"hull_slack": 1e-8}})";
    const RunConfig a = parse_config(toml, true);
    const RunConfig b = parse_config(js, false);
    for (const RunConfig* c : {&a, &b}) {
        EXPECT_EQ(c->seed, 7u);
        EXPECT_EQ(c->alphas, (std::vector<double>{0.3, 0.1}));
        ASSERT_TRUE(c->pinned().has_value());
        EXPECT_EQ(c->pinned()->sigma, 1.0);
        EXPECT_EQ(c->pinned()->d, 7u);
        EXPECT_EQ(c->bootstrap.B, 50u);
        EXPECT_FALSE(c->bootstrap.refit);
        EXPECT_EQ(c->sim.psi_diag, (Vector{0.5, 0.4}));
        EXPECT_EQ(c->sim.n, 30u);
        ASSERT_TRUE(c->split.has_value());
        EXPECT_DOUBLE_EQ(c->split->test, 0.2);
        EXPECT_EQ(c->grid.sigmas, (std::vector<double>{2.0, 4.0}));
        EXPECT_EQ(c->policy.hull_slack, 1e-8);
        EXPECT_NO_THROW(c->validate());
    }
    EXPECT_EQ(a.pipeline().bootstrap.seed, 7u);
}

TEST(Config, Validation) {
    auto invalid = [](const std::string& js) {
        error_text([&] { parse_config(js, false).validate(); }, ErrorKind::config);
    };
    invalid(R"({"model": {"sigma": 1.0}})");
    invalid(R"({"alphas": [0.1, 0.2]})");
    invalid(R"({"alphas": [1.5]})");
    invalid(R"({"bootstrap": {"B": 1}})");
    invalid(R"({"split": {"train": 0.5, "valid": 0.2, "test": 0.2}})");
    invalid(R"({"sim": {"eps": 0}})");
    invalid(R"({"knn_k": 1000})");
}

TEST(Config, EnvironmentOverridesFile) {
    RunConfig c = parse_config(R"({"seed": 3, "threads": 2})", false);
    {
        EnvGuard seed("FPCB_SEED", "11");
        EnvGuard threads("FPCB_THREADS", "1");
        apply_env_overrides(c);
    }
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.threads, 1u);
    EnvGuard bad("FPCB_SEED", "-4");
    error_text([&] { apply_env_overrides(c); }, ErrorKind::config);
}

TEST(Config, LoadDetectsTomlByExtension) {
    const auto dir = std::filesystem::temp_directory_path() / "fpcb_test_config";
    std::filesystem::create_directories(dir);
    io::write_text((dir / "a.toml").string(), "seed = 5\n");
    io::write_text((dir / "a.json").string(), "{\"seed\": 6}\n");
    EXPECT_EQ(load_config((dir / "a.toml").string()).seed, 5u);
    EXPECT_EQ(load_config((dir / "a.json").string()).seed, 6u);
    error_text([&] { load_config((dir / "missing.json").string()); }, ErrorKind::config);
    std::filesystem::remove_all(dir);
}

TEST(Records, CsvRoundTrip) {
    std::vector<ReplicateRecord> recs;
    recs.push_back({0, 42, "fpcb", 0.1, true, 3.25, 0.5});
    recs.push_back({1, 43, "mean", 0.2, std::nullopt, std::nullopt, 0.75});
    const auto back = io::records_from_csv(io::records_to_csv(recs));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].method, "fpcb");
    EXPECT_EQ(back[0].covered, std::optional<bool>(true));
    EXPECT_EQ(back[0].amplitude, std::optional<double>(3.25));
    EXPECT_EQ(back[1].seed, 43u);
    EXPECT_FALSE(back[1].covered.has_value());
    EXPECT_EQ(back[1].rmse, 0.75);
    error_text([] { io::records_from_csv("nope\n"); }, ErrorKind::parse);
}
