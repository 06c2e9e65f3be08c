#include "fpcb/evalkit.hpp"
#include "fpcb/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace fpcb;

namespace {

RawCurveSeries sim_series(std::size_t n, std::uint64_t seed, std::size_t m = 64) {
    ArhSimSpec spec;
    spec.n = n;
    spec.m = m;
    spec.seed = seed;
    return simulate(spec).series;
}

PredictiveBand rect(std::size_t m, double lo, double hi) {
    PredictiveBand b;
    b.kind = BandKind::envelope;
    b.lower = Vector(m, lo);
    b.upper = Vector(m, hi);
    return b;
}

}  // namespace

TEST(Rmse, Examples) {
    EXPECT_DOUBLE_EQ(rmse(Vector{1.0, 2.0}, Vector{1.0, 2.0}), 0.0);
    EXPECT_NEAR(rmse(Vector{0.0, 0.0}, Vector{3.0, 4.0}), 3.5355339059327378, 1e-12);
    EXPECT_THROW(rmse(Vector{1.0}, Vector{1.0, 2.0}), Error);
}

TEST(Rmse, MetricProperties) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 50; ++rep) {
        Vector x(20), y(20), z(20);
        for (std::size_t i = 0; i < 20; ++i) {
            x[i] = nd(rng);
            y[i] = nd(rng);
            z[i] = nd(rng);
        }
        EXPECT_DOUBLE_EQ(rmse(x, y), rmse(y, x));
        EXPECT_GE(rmse(x, y), 0.0);
        EXPECT_LE(rmse(x, z), rmse(x, y) + rmse(y, z) + 1e-12);
    }
}

TEST(Pinball, Examples) {
    EXPECT_NEAR(pinball(1.0, 3.0, 0.1), 1.8, 1e-12);
    EXPECT_NEAR(pinball(3.0, 1.0, 0.1), 0.2, 1e-12);
    EXPECT_EQ(pinball(2.0, 2.0, 0.7), 0.0);
    EXPECT_THROW(pinball(1.0, 1.0, 0.0), Error);
    EXPECT_THROW(pinball(1.0, 1.0, 1.0), Error);
}

TEST(Pinball, NonNegativeAndConvexInQuantile) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5, 5), tau(0.01, 0.99), w(0, 1);
    for (int rep = 0; rep < 500; ++rep) {
        const double y = u(rng), q1 = u(rng), q2 = u(rng), t = tau(rng), lam = w(rng);
        EXPECT_GE(pinball(y, q1, t), 0.0);
        const double mix = pinball(y, lam * q1 + (1 - lam) * q2, t);
        EXPECT_LE(mix, lam * pinball(y, q1, t) + (1 - lam) * pinball(y, q2, t) + 1e-12);
    }
}

TEST(BandPinball, Examples) {
    const double alpha = 0.2;
    // truth above the band: only the upper term is positive
    const PredictiveBand b = rect(1, 0.0, 1.0);
    EXPECT_NEAR(band_pinball(b, Vector{3.0}, alpha), 3.0 * 0.1 + 2.0 * 0.9, 1e-12);
    EXPECT_NEAR(band_pinball(b, Vector{0.5}, alpha), 0.5 * 0.1 + 0.5 * 0.1, 1e-12);
    EXPECT_THROW(band_pinball(b, Vector{1.0, 2.0}, alpha), Error);
}

TEST(BandPinball, TighterBandWinsWhenCovering) {
    const Vector truth(10, 0.5);
    EXPECT_LT(band_pinball(rect(10, 0.4, 0.6), truth, 0.1), band_pinball(rect(10, 0.0, 1.0), truth, 0.1));
}

TEST(Baselines, MeanAndPersistence) {
    const RawCurveSeries s = sim_series(30, 4);
    const auto rep = represent_series(s, KernelSpec{KernelFamily::gaussian, 20.0}, 1e-4, 5);
    EXPECT_EQ(baseline_predict(BaselineKind::persistence, rep), rep.smoothed.back());
    const Vector mean = baseline_predict(BaselineKind::mean, rep);
    for (std::size_t j = 0; j < 64; ++j) {
        double sum = 0.0;
        for (const auto& c : rep.smoothed) sum += c[j];
        EXPECT_NEAR(mean[j], sum / 30.0, 1e-12);
    }
}

TEST(Baselines, MeanIsReconstructedMeanCoefficientsAtFullRank) {
    const RawCurveSeries s = sim_series(25, 6, 20);
    const auto rep = represent_series(s, KernelSpec{KernelFamily::gaussian, 400.0}, 1e-4, 20);
    const ArhModel m = fit(rep, 1e-6);
    const Vector via_coeffs = rep.basis->reconstruct(m.mean_coeffs);
    const Vector mean = baseline_predict(BaselineKind::mean, rep);
    for (std::size_t j = 0; j < 20; ++j) EXPECT_NEAR(mean[j], via_coeffs[j], 1e-8);
}

TEST(Splits, Counts) {
    const SplitCounts c = split_counts(182, SplitSpec{0.6, 0.2, 0.2});
    EXPECT_EQ(c.test, 36u);
    EXPECT_EQ(c.valid, 36u);
    EXPECT_EQ(c.train, 110u);
    const SplitCounts d = split_counts(250, SplitSpec{0.8, 0.2, 0.0});
    EXPECT_EQ(d.train, 200u);
    EXPECT_EQ(d.valid, 50u);
    EXPECT_EQ(d.test, 0u);
    EXPECT_THROW(split_counts(10, SplitSpec{0.5, 0.2, 0.2}), Error);
    EXPECT_THROW(split_counts(2, SplitSpec{0.1, 0.5, 0.4}), Error);
}

TEST(Calibrate, SingleCandidate) {
    const RawCurveSeries s = sim_series(60, 7);
    const CalibrationGrid grid{{20.0}, {5}, {1e-4}};
    const auto r = calibrate(s, grid, SplitSpec{0.8, 0.2, 0.0}, CalibrationObjective::rmse, 0.1);
    EXPECT_EQ(r.best, (Hyperparameters{20.0, 5, 1e-4}));
    ASSERT_EQ(r.candidates.size(), 1u);
    EXPECT_EQ(*r.candidates[0].score, r.best_score);
}

TEST(Calibrate, CandidatesDedupedAndOrdered) {
    const RawCurveSeries s = sim_series(40, 7);
    const auto r = calibrate_blocks(s, CalibrationGrid{{50.0, 5.0, 5.0}, {5, 3}, {1e-4}}, 32, 8,
                                    CalibrationObjective::rmse, 0.1);
    ASSERT_EQ(r.candidates.size(), 4u);
    EXPECT_EQ(r.candidates[0].params, (Hyperparameters{5.0, 3, 1e-4}));
    EXPECT_EQ(r.candidates[1].params, (Hyperparameters{50.0, 3, 1e-4}));
    EXPECT_EQ(r.candidates[2].params, (Hyperparameters{5.0, 5, 1e-4}));
    EXPECT_EQ(r.candidates[3].params, (Hyperparameters{50.0, 5, 1e-4}));
}

TEST(Calibrate, ExhaustiveAndReproducible) {
    const RawCurveSeries s = sim_series(80, 8);
    const CalibrationGrid grid{{5.0, 20.0, 50.0}, {3, 5, 7}, {1e-4}};
    const auto r = calibrate_blocks(s, grid, 64, 16, CalibrationObjective::rmse, 0.1);
    ASSERT_EQ(r.candidates.size(), 9u);
    double best = std::numeric_limits<double>::infinity();
    Hyperparameters arg;
    for (const auto& c : r.candidates) {
        ASSERT_TRUE(c.score.has_value()) << c.failure;
        const double again = score_candidate(s, c.params, 64, 16, CalibrationObjective::rmse, 0.1, {});
        EXPECT_EQ(again, *c.score);
        if (again < best) {
            best = again;
            arg = c.params;
        }
    }
    EXPECT_EQ(r.best, arg);
    EXPECT_EQ(r.best_score, best);
    const auto r2 = calibrate_blocks(s, grid, 64, 16, CalibrationObjective::rmse, 0.1);
    EXPECT_EQ(r2.best, r.best);
    EXPECT_EQ(r2.best_score, r.best_score);
}

TEST(Calibrate, NeverReadsTheTestBlock) {
    RawCurveSeries s = sim_series(100, 9);
    const CalibrationGrid grid{{5.0, 20.0}, {3, 5}, {1e-4}};
    const SplitSpec split{0.6, 0.2, 0.2};
    CalibrationOptions opt;
    opt.bootstrap.B = 50;
    opt.max_valid_steps = 3;
    const auto a = calibrate(s, grid, split, CalibrationObjective::band_pinball, 0.1, opt);
    for (std::size_t k = 80; k < 100; ++k)
        for (double& v : s.curves[k]) v = 1e6;
    const auto b = calibrate(s, grid, split, CalibrationObjective::band_pinball, 0.1, opt);
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(a.best_score, b.best_score);
}

TEST(Calibrate, AllCandidatesFailing) {
    const RawCurveSeries s = sim_series(30, 10);
    // d larger than the grid size makes every basis invalid
    try {
        calibrate(s, CalibrationGrid{{20.0}, {100, 200}, {1e-4}}, SplitSpec{0.8, 0.2, 0.0},
                  CalibrationObjective::rmse, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::calibration);
        EXPECT_NE(std::string(e.what()).find("d=100"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("d=200"), std::string::npos);
    }
}

TEST(Calibrate, GridValidation) {
    const RawCurveSeries s = sim_series(30, 10);
    EXPECT_THROW(calibrate(s, CalibrationGrid{{}, {3}, {1e-4}}, SplitSpec{}, CalibrationObjective::rmse, 0.1), Error);
    EXPECT_THROW(calibrate(s, CalibrationGrid{{-1.0}, {3}, {1e-4}}, SplitSpec{}, CalibrationObjective::rmse, 0.1),
                 Error);
}

TEST(Summaries, SampleSdAndBinomialSe) {
    const MetricSummary s = summarize(Vector{1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-12);
    EXPECT_NEAR(s.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
    const MetricSummary c = summarize_coverage({true, true, true, false});
    EXPECT_DOUBLE_EQ(c.mean, 0.75);
    EXPECT_NEAR(c.se, std::sqrt(0.75 * 0.25 / 4.0), 1e-12);
}
