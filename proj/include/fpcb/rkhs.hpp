#pragma once

// Gaussian-kernel RKHS representation of discretized curves: kernel ridge
// smoothing, Gram eigensystem, truncated Nystrom coefficients and their
// reconstruction on the sampling grid.

#include "fpcb/error.hpp"
#include "fpcb/numkit.hpp"

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fpcb {

/// Strictly increasing sampling abscissae in [0, 1].
class TimeGrid {
public:
    TimeGrid() = default;

    explicit TimeGrid(Vector points) : points_(std::move(points)) {
        if (points_.size() < 2) throw Error(ErrorKind::parameter, "time grid needs at least 2 points");
        if (points_.front() < 0.0 || points_.back() > 1.0) {
            throw Error(ErrorKind::parameter, "time grid must lie in [0, 1]");
        }
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (!(points_[i] > points_[i - 1])) {
                throw Error(ErrorKind::parameter, "time grid must be strictly increasing");
            }
        }
    }

    /// t_i = (i - 1) / m, i = 1..m: left-closed, excludes t = 1.
    static TimeGrid uniform(std::size_t m) {
        Vector pts(m);
        for (std::size_t i = 0; i < m; ++i) pts[i] = static_cast<double>(i) / static_cast<double>(m);
        return TimeGrid(std::move(pts));
    }

    /// m equally spaced points covering both ends of [0, 1].
    static TimeGrid closed(std::size_t m) {
        Vector pts(m);
        for (std::size_t i = 0; i < m; ++i) pts[i] = static_cast<double>(i) / static_cast<double>(m - 1);
        return TimeGrid(std::move(pts));
    }

    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] const Vector& points() const noexcept { return points_; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    Vector points_;
};

/// Ordered curves sampled on one shared grid.
struct RawCurveSeries {
    TimeGrid grid;
    std::vector<Vector> curves;

    [[nodiscard]] std::size_t size() const noexcept { return curves.size(); }

    void validate() const {
        for (std::size_t k = 0; k < curves.size(); ++k) {
            if (curves[k].size() != grid.size()) {
                throw Error(ErrorKind::dimension, "curve " + std::to_string(k) + " has length " +
                                                      std::to_string(curves[k].size()) + ", grid has " +
                                                      std::to_string(grid.size()) + " points");
            }
            if (!all_finite(curves[k])) {
                throw Error(ErrorKind::numeric, "curve " + std::to_string(k) + " has non-finite values");
            }
        }
    }
};

enum class KernelFamily { gaussian };

/// K(t, s) = exp(-sigma * |t - s|^2).
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double sigma = 1.0;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw Error(ErrorKind::parameter, "kernel bandwidth sigma must be > 0");
        }
    }

    [[nodiscard]] double operator()(double t, double s) const {
        const double diff = t - s;
        return std::exp(-sigma * diff * diff);
    }
};

inline Matrix gram_matrix(const TimeGrid& grid, const KernelSpec& kernel,
                          const NumericPolicy& policy = default_policy()) {
    kernel.validate();
    const std::size_t m = grid.size();
    Matrix k(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        k(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            double v = kernel(grid[i], grid[j]);
            if (v < policy.kernel_underflow) v = 0.0;
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

struct SmoothedCurve {
    Vector a;       // representer weights, (gamma I + K) a = z
    Vector fitted;  // K a
};

inline SmoothedCurve smooth_with_gram(std::span<const double> z, const Matrix& gram, const LuSolver& solver) {
    SmoothedCurve out;
    out.a = solver.solve(z);
    out.fitted = gram * out.a;
    return out;
}

inline LuSolver ridge_solver(const Matrix& gram, double gamma, const NumericPolicy& policy) {
    if (gamma < 0.0 || !std::isfinite(gamma)) throw Error(ErrorKind::parameter, "ridge penalty gamma must be >= 0");
    Matrix system = gram;
    for (std::size_t i = 0; i < system.rows(); ++i) system(i, i) += gamma;
    try {
        return LuSolver(system, policy);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular_system) throw;
        throw Error(ErrorKind::singular_system,
                    "kernel ridge system is singular at gamma=" + std::to_string(gamma) +
                        "; use gamma > 0");
    }
}

/// Kernel ridge smoother for a single curve.
inline SmoothedCurve smooth_curve(std::span<const double> z, const TimeGrid& grid, const KernelSpec& kernel,
                                  double gamma, const NumericPolicy& policy = default_policy()) {
    if (z.size() != grid.size()) throw Error(ErrorKind::dimension, "curve length differs from grid size");
    const Matrix gram = gram_matrix(grid, kernel, policy);
    return smooth_with_gram(z, gram, ridge_solver(gram, gamma, policy));
}

/// c_i = (l_i / sqrt(m)) * (a . v_i), i = 1..d.
inline Vector extract_coefficients(std::span<const double> a, const EigenSystem& eig, std::size_t d,
                                   const NumericPolicy& policy = default_policy()) {
    const std::size_t m = eig.vectors.rows();
    if (a.size() != m) throw Error(ErrorKind::dimension, "weight vector length differs from Gram size");
    const std::size_t rank = eig.rank(policy.rank_rel_tol);
    if (d == 0 || d > rank) {
        throw Error(ErrorKind::truncation, "truncation order d=" + std::to_string(d) +
                                               " must be in [1, " + std::to_string(rank) + "]");
    }
    const double root_m = std::sqrt(static_cast<double>(m));
    Vector c(d);
    for (std::size_t i = 0; i < d; ++i) {
        double proj = 0.0;
        for (std::size_t j = 0; j < m; ++j) proj += a[j] * eig.vectors(j, i);
        c[i] = eig.values[i] / root_m * proj;
    }
    return c;
}

/// Sum_i c_i * sqrt(m) * v_i, the Nystrom expansion evaluated on the grid.
inline Vector reconstruct_on_grid(std::span<const double> coeffs, const EigenSystem& eig, std::size_t m) {
    if (eig.vectors.rows() != m) throw Error(ErrorKind::dimension, "eigensystem size differs from m");
    if (coeffs.size() > eig.size()) throw Error(ErrorKind::truncation, "more coefficients than eigenpairs");
    const double root_m = std::sqrt(static_cast<double>(m));
    Vector out(m, 0.0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const double w = coeffs[i] * root_m;
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < m; ++j) out[j] += w * eig.vectors(j, i);
    }
    return out;
}

/// Gram eigensystem plus truncation order, shared by every curve of a series.
///
/// Besides the literal smoothing route (solve, then extract) the basis caches
/// the equivalent closed-form projector
///     c_i = l_i / (sqrt(m) (gamma + l_i)) * (v_i . z),
/// which the bootstrap uses to project thousands of replicate curves cheaply.
class RkhsBasis {
public:
    RkhsBasis(TimeGrid grid, KernelSpec kernel, double gamma, std::size_t d,
              const NumericPolicy& policy = default_policy())
        : grid_(std::move(grid)), kernel_(kernel), gamma_(gamma), d_(d), policy_(policy),
          gram_(gram_matrix(grid_, kernel_, policy)), eig_(sym_eigen(gram_, policy)),
          solver_(ridge_solver(gram_, gamma, policy)) {
        rank_ = eig_.rank(policy.rank_rel_tol);
        if (d_ == 0 || d_ > rank_) {
            throw Error(ErrorKind::truncation, "truncation order d=" + std::to_string(d_) +
                                                   " must be in [1, rank(K)=" + std::to_string(rank_) +
                                                   "] for sigma=" + std::to_string(kernel_.sigma));
        }
        const std::size_t m = grid_.size();
        const double root_m = std::sqrt(static_cast<double>(m));
        projector_ = Matrix(d_, m);
        expander_ = Matrix(m, d_);
        shrinkage_.resize(d_);
        for (std::size_t i = 0; i < d_; ++i) {
            const double l = eig_.values[i];
            shrinkage_[i] = l / (gamma_ + l);
            const double w = l / (root_m * (gamma_ + l));
            for (std::size_t j = 0; j < m; ++j) {
                projector_(i, j) = w * eig_.vectors(j, i);
                expander_(j, i) = root_m * eig_.vectors(j, i);
            }
        }
    }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
    [[nodiscard]] double gamma() const noexcept { return gamma_; }
    [[nodiscard]] std::size_t d() const noexcept { return d_; }
    [[nodiscard]] std::size_t m() const noexcept { return grid_.size(); }
    [[nodiscard]] std::size_t rank() const noexcept { return rank_; }
    [[nodiscard]] const Matrix& gram() const noexcept { return gram_; }
    [[nodiscard]] const EigenSystem& eig() const noexcept { return eig_; }
    [[nodiscard]] const NumericPolicy& policy() const noexcept { return policy_; }

    /// l_i / (gamma + l_i): the map taking coefficients c to project(reconstruct(c)).
    [[nodiscard]] const Vector& shrinkage() const noexcept { return shrinkage_; }

    [[nodiscard]] SmoothedCurve smooth(std::span<const double> z) const {
        if (z.size() != m()) throw Error(ErrorKind::dimension, "curve length differs from grid size");
        return smooth_with_gram(z, gram_, solver_);
    }

    [[nodiscard]] Vector coefficients(const SmoothedCurve& s) const {
        return extract_coefficients(s.a, eig_, d_, policy_);
    }

    [[nodiscard]] Vector project(std::span<const double> curve) const {
        if (curve.size() != m()) throw Error(ErrorKind::dimension, "curve length differs from grid size");
        return projector_ * curve;
    }

    [[nodiscard]] Vector reconstruct(std::span<const double> coeffs) const {
        if (coeffs.size() != d_) throw Error(ErrorKind::dimension, "coefficient vector length differs from d");
        return expander_ * coeffs;
    }

private:
    TimeGrid grid_;
    KernelSpec kernel_;
    double gamma_;
    std::size_t d_;
    NumericPolicy policy_;
    Matrix gram_;
    EigenSystem eig_;
    LuSolver solver_;
    std::size_t rank_ = 0;
    Matrix projector_;
    Matrix expander_;
    Vector shrinkage_;
};

struct RkhsRepresentation {
    std::shared_ptr<const RkhsBasis> basis;
    Matrix coeffs;                  // n x d
    std::vector<Vector> smoothed;   // K a per curve

    [[nodiscard]] std::size_t size() const noexcept { return smoothed.size(); }
    [[nodiscard]] Vector coeff_row(std::size_t k) const {
        const auto r = coeffs.row(k);
        return {r.begin(), r.end()};
    }
};

inline RkhsRepresentation represent_with(std::shared_ptr<const RkhsBasis> basis, const RawCurveSeries& series) {
    series.validate();
    if (series.size() == 0) throw Error(ErrorKind::parameter, "cannot represent an empty series");
    if (!(series.grid == basis->grid())) throw Error(ErrorKind::dimension, "series grid differs from basis grid");
    RkhsRepresentation rep;
    rep.coeffs = Matrix(series.size(), basis->d());
    rep.smoothed.reserve(series.size());
    for (std::size_t k = 0; k < series.size(); ++k) {
        SmoothedCurve s = basis->smooth(series.curves[k]);
        const Vector c = basis->coefficients(s);
        std::copy(c.begin(), c.end(), rep.coeffs.row(k).begin());
        rep.smoothed.push_back(std::move(s.fitted));
    }
    rep.basis = std::move(basis);
    return rep;
}

inline RkhsRepresentation represent_series(const RawCurveSeries& series, const KernelSpec& kernel, double gamma,
                                           std::size_t d, const NumericPolicy& policy = default_policy()) {
    series.validate();
    auto basis = std::make_shared<const RkhsBasis>(series.grid, kernel, gamma, d, policy);
    return represent_with(std::move(basis), series);
}

}  // namespace fpcb
