#pragma once

// Minimum-entropy-set selection of bootstrap replicates and simultaneous
// predictive bands.
//
// Local entropy of replicate b is estimated as exp(mean distance from its
// coefficient vector to its k nearest neighbours). Replicates whose score is
// at most the (1 - alpha) empirical quantile form the MES; the band is the
// convex hull of their graphs {(t_i, Z_b(t_i))}.

#include "fpcb/bootstrap.hpp"
#include "fpcb/error.hpp"
#include "fpcb/numkit.hpp"
#include "fpcb/parallel.hpp"
#include "fpcb/rkhs.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace fpcb {

struct EntropyScores {
    std::size_t k = 0;
    Vector mean_distances;  // d-bar_k per point
    Vector scores;          // exp(d-bar_k)
};

/// Sorted distances from each point to its k nearest neighbours (self
/// excluded by index, duplicates kept). Exact O(B^2 d).
inline std::vector<Vector> knn_distances(const Matrix& points, std::size_t k, std::size_t threads = 1) {
    const std::size_t B = points.rows();
    if (k < 1 || k >= B) {
        throw Error(ErrorKind::parameter, "k must satisfy 1 <= k <= B-1 (k=" + std::to_string(k) +
                                              ", B=" + std::to_string(B) + ")");
    }
    const std::size_t d = points.cols();
    std::vector<Vector> out(B);
    parallel_for(B, threads, [&](std::size_t i) {
        Vector dist;
        dist.reserve(B - 1);
        const auto pi = points.row(i);
        for (std::size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            const auto pj = points.row(j);
            double s = 0.0;
            for (std::size_t l = 0; l < d; ++l) {
                const double diff = pi[l] - pj[l];
                s += diff * diff;
            }
            dist.push_back(std::sqrt(s));
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
        dist.resize(k);
        std::sort(dist.begin(), dist.end());
        out[i] = std::move(dist);
    });
    return out;
}

inline EntropyScores knn_entropy_scores(const Matrix& points, std::size_t k, std::size_t threads = 1) {
    const auto dists = knn_distances(points, k, threads);
    EntropyScores out;
    out.k = k;
    out.mean_distances.resize(dists.size());
    out.scores.resize(dists.size());
    for (std::size_t i = 0; i < dists.size(); ++i) {
        double s = 0.0;
        for (double v : dists[i]) s += v;
        out.mean_distances[i] = s / static_cast<double>(k);
        out.scores[i] = std::exp(out.mean_distances[i]);
    }
    return out;
}

/// ceil(sqrt(B)), clamped to [1, B-1].
inline std::size_t default_knn_k(std::size_t B) {
    if (B < 2) return 1;
    auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(B))));
    return std::clamp<std::size_t>(k, 1, B - 1);
}

/// 1-based rank ceil(q * B) of the inverse-CDF empirical quantile, in [1, B].
inline std::size_t quantile_rank(double q, std::size_t B) {
    const double raw = std::ceil(q * static_cast<double>(B) - 1e-9);
    return std::clamp<std::size_t>(raw < 1.0 ? 1 : static_cast<std::size_t>(raw), 1, B);
}

/// Inverse-CDF empirical quantile (no interpolation).
inline double empirical_quantile(Vector values, double q) {
    if (values.empty()) throw Error(ErrorKind::parameter, "quantile of empty sample");
    const std::size_t r = quantile_rank(q, values.size());
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(r - 1), values.end());
    return values[r - 1];
}

struct MesSelection {
    double alpha = 0.0;
    std::vector<std::size_t> member_indices;  // ascending
    double threshold = 0.0;                   // score at the (1 - alpha) quantile
};

/// Ties at the threshold are included.
inline MesSelection select_mes(const EntropyScores& scores, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::parameter, "alpha must lie in (0, 1)");
    const Vector& md = scores.mean_distances;
    if (md.empty()) throw Error(ErrorKind::parameter, "no scores to select from");
    const double cut = empirical_quantile(md, 1.0 - alpha);
    MesSelection sel;
    sel.alpha = alpha;
    sel.threshold = std::exp(cut);
    for (std::size_t b = 0; b < md.size(); ++b)
        if (md[b] <= cut) sel.member_indices.push_back(b);
    return sel;
}

enum class BandKind { hull, envelope, gaussian_pointwise, empirical_pointwise };

inline const char* to_string(BandKind kind) {
    switch (kind) {
        case BandKind::hull: return "hull";
        case BandKind::envelope: return "envelope";
        case BandKind::gaussian_pointwise: return "gaussian_pointwise";
        case BandKind::empirical_pointwise: return "empirical_pointwise";
    }
    return "unknown";
}

struct PredictiveBand {
    BandKind kind = BandKind::hull;
    std::optional<Hull2D> hull;
    Vector lower;
    Vector upper;
    double alpha = 0.0;
};

struct BandReport {
    bool covered = false;
    double amplitude = 0.0;
};

inline PredictiveBand envelope_band(const std::vector<Vector>& curves, const std::vector<std::size_t>& members,
                                    double alpha) {
    if (members.empty()) throw Error(ErrorKind::parameter, "band needs at least one member curve");
    PredictiveBand band;
    band.kind = BandKind::envelope;
    band.alpha = alpha;
    band.lower = curves[members.front()];
    band.upper = curves[members.front()];
    for (std::size_t b : members) {
        const Vector& c = curves[b];
        for (std::size_t i = 0; i < c.size(); ++i) {
            band.lower[i] = std::min(band.lower[i], c[i]);
            band.upper[i] = std::max(band.upper[i], c[i]);
        }
    }
    return band;
}

/// Convex hull of the graphs of the selected replicates. Only the per-column
/// extremes can be hull vertices, so the cloud is reduced to 2m points before
/// hulling. A degenerate (collinear) cloud falls back to the min/max envelope.
inline PredictiveBand build_hull_band(const BootstrapEnsemble& ensemble, const MesSelection& selection,
                                      const TimeGrid& grid) {
    PredictiveBand env = envelope_band(ensemble.replicates, selection.member_indices, selection.alpha);
    if (env.lower.size() != grid.size()) throw Error(ErrorKind::dimension, "replicate length differs from grid");
    std::vector<Point2> cloud;
    cloud.reserve(2 * grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cloud.push_back({grid[i], env.lower[i]});
        if (env.upper[i] != env.lower[i]) cloud.push_back({grid[i], env.upper[i]});
    }
    Hull2D hull;
    try {
        hull = convex_hull(std::move(cloud));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::degenerate_hull) throw;
        return env;
    }
    PredictiveBand band;
    band.kind = BandKind::hull;
    band.alpha = selection.alpha;
    band.lower.resize(grid.size());
    band.upper.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const VerticalSlice s = hull_bounds_at(hull, grid[i]);
        band.lower[i] = s.lower;
        band.upper[i] = s.upper;
    }
    band.hull = std::move(hull);
    return band;
}

enum class PointwiseKind { gaussian, empirical };

inline PredictiveBand build_pointwise_band(const BootstrapEnsemble& ensemble, double alpha, PointwiseKind kind) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::parameter, "alpha must lie in (0, 1)");
    const std::size_t B = ensemble.size();
    if (B < 2) throw Error(ErrorKind::parameter, "pointwise bands need B >= 2");
    const std::size_t m = ensemble.replicates.front().size();
    PredictiveBand band;
    band.alpha = alpha;
    band.lower.resize(m);
    band.upper.resize(m);
    Vector column(B);
    if (kind == PointwiseKind::gaussian) {
        band.kind = BandKind::gaussian_pointwise;
        const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
        for (std::size_t i = 0; i < m; ++i) {
            double mean = 0.0;
            for (std::size_t b = 0; b < B; ++b) mean += ensemble.replicates[b][i];
            mean /= static_cast<double>(B);
            double ss = 0.0;
            for (std::size_t b = 0; b < B; ++b) {
                const double dv = ensemble.replicates[b][i] - mean;
                ss += dv * dv;
            }
            const double sd = std::sqrt(ss / static_cast<double>(B - 1));
            band.lower[i] = mean - z * sd;
            band.upper[i] = mean + z * sd;
        }
    } else {
        band.kind = BandKind::empirical_pointwise;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t b = 0; b < B; ++b) column[b] = ensemble.replicates[b][i];
            band.lower[i] = empirical_quantile(column, alpha / 2.0);
            band.upper[i] = empirical_quantile(column, 1.0 - alpha / 2.0);
        }
    }
    return band;
}

/// Trapezoidal integral of U - L over the grid.
inline double band_amplitude(const PredictiveBand& band, const TimeGrid& grid) {
    double amp = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double w0 = band.upper[i - 1] - band.lower[i - 1];
        const double w1 = band.upper[i] - band.lower[i];
        amp += 0.5 * (w0 + w1) * (grid[i] - grid[i - 1]);
    }
    return amp;
}

inline BandReport evaluate_band(const PredictiveBand& band, std::span<const double> truth, const TimeGrid& grid,
                                double slack = default_policy().hull_slack) {
    if (truth.size() != grid.size() || band.lower.size() != grid.size()) {
        throw Error(ErrorKind::dimension, "truth, band and grid sizes differ");
    }
    BandReport report;
    report.covered = true;
    for (std::size_t i = 0; i < grid.size() && report.covered; ++i) {
        if (band.kind == BandKind::hull && band.hull) {
            report.covered = hull_contains(*band.hull, {grid[i], truth[i]}, slack);
        } else {
            report.covered = truth[i] >= band.lower[i] - slack && truth[i] <= band.upper[i] + slack;
        }
    }
    report.amplitude = band_amplitude(band, grid);
    return report;
}

}  // namespace fpcb
