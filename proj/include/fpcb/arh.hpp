#pragma once

// ARH(1) estimation on truncated RKHS coefficients.
//
// With centered coefficients d_k = c_k - mean,
//     C0 = 1/n     sum_k d_k d_k^T
//     C1 = 1/(n-1) sum_k d_k d_{k+1}^T
//     P  = pinv(C0 + ridge I) C1.
// For a vector AR(1) d_{k+1} = A d_k + e we have C1 = C0 A^T, so P estimates
// A^T and predictions are mean + P^T (c - mean).

#include "fpcb/error.hpp"
#include "fpcb/numkit.hpp"
#include "fpcb/rkhs.hpp"

#include <memory>
#include <string>
#include <vector>

namespace fpcb {

struct ArhModel {
    Vector mean_coeffs;  // c-bar, length d
    Matrix autoreg;      // P-hat, d x d
    Matrix cov0;         // C0-hat
    Matrix cov1;         // C1-hat
    std::shared_ptr<const RkhsBasis> basis;  // null for direct-coefficient fits

    [[nodiscard]] std::size_t d() const noexcept { return mean_coeffs.size(); }
};

struct ResidualPool {
    std::vector<Vector> residuals;  // n - 1 curves, epsilon_k = fitted_k - Z_k
    bool centered = false;

    [[nodiscard]] std::size_t size() const noexcept { return residuals.size(); }
};

/// Fits mean, lag-0/lag-1 covariances and the autoregression matrix from an
/// n x d coefficient matrix (rows ordered in time).
inline ArhModel fit_coefficients(const Matrix& coeffs, double ridge = 0.0,
                                 const NumericPolicy& policy = default_policy()) {
    if (coeffs.empty()) throw Error(ErrorKind::parameter, "empty coefficient matrix");
    const std::size_t n = coeffs.rows();
    const std::size_t d = coeffs.cols();
    if (n < d + 2) {
        throw Error(ErrorKind::parameter, "ARH fit needs n >= d + 2 curves (n=" + std::to_string(n) +
                                              ", d=" + std::to_string(d) + ")");
    }
    if (ridge < 0.0) throw Error(ErrorKind::parameter, "ridge must be >= 0");

    ArhModel model;
    model.mean_coeffs.assign(d, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) model.mean_coeffs[i] += coeffs(k, i);
    for (double& v : model.mean_coeffs) v /= static_cast<double>(n);

    Matrix centered(n, d);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < d; ++i) centered(k, i) = coeffs(k, i) - model.mean_coeffs[i];

    model.cov0 = Matrix(d, d);
    model.cov1 = Matrix(d, d);
    for (std::size_t k = 0; k < n; ++k) {
        const auto dk = centered.row(k);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i; j < d; ++j) model.cov0(i, j) += dk[i] * dk[j];
        if (k + 1 < n) {
            const auto dn = centered.row(k + 1);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) model.cov1(i, j) += dk[i] * dn[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            model.cov0(i, j) /= static_cast<double>(n);
            model.cov0(j, i) = model.cov0(i, j);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) model.cov1(i, j) /= static_cast<double>(n - 1);

    Matrix regularized = model.cov0;
    for (std::size_t i = 0; i < d; ++i) regularized(i, i) += ridge;

    Matrix inverse;
    try {
        inverse = pseudo_inverse(regularized, policy.pinv_rel_tol, policy);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::rank_zero) throw;
        throw Error(ErrorKind::singular_covariance,
                    "coefficient covariance is numerically zero; the series has no variation in the "
                    "retained basis (try ridge > 0 or a smaller d)");
    }
    model.autoreg = inverse * model.cov1;
    if (!all_finite(model.autoreg.data())) {
        throw Error(ErrorKind::numeric, "autoregression estimate is not finite");
    }
    return model;
}

inline ArhModel fit(const RkhsRepresentation& rep, double ridge = 0.0,
                    const NumericPolicy& policy = default_policy()) {
    ArhModel model = fit_coefficients(rep.coeffs, ridge, policy);
    model.basis = rep.basis;
    return model;
}

/// One-step prediction in coefficient space: mean + P^T (last - mean).
inline Vector predict_next(const ArhModel& model, std::span<const double> last_coeffs) {
    const std::size_t d = model.d();
    if (last_coeffs.size() != d) {
        throw Error(ErrorKind::dimension, "expected " + std::to_string(d) + " coefficients, got " +
                                              std::to_string(last_coeffs.size()));
    }
    Vector out = model.mean_coeffs;
    for (std::size_t j = 0; j < d; ++j) {
        const double dev = last_coeffs[j] - model.mean_coeffs[j];
        if (dev == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) out[i] += model.autoreg(j, i) * dev;
    }
    return out;
}

struct FittedResiduals {
    std::vector<Vector> fitted;  // curves 2..n
    ResidualPool pool;
};

/// Pointwise subtraction of the mean residual curve.
inline void center_pool(ResidualPool& pool) {
    if (pool.residuals.empty()) {
        pool.centered = true;
        return;
    }
    const std::size_t m = pool.residuals.front().size();
    Vector mean(m, 0.0);
    for (const auto& r : pool.residuals)
        for (std::size_t j = 0; j < m; ++j) mean[j] += r[j];
    for (double& v : mean) v /= static_cast<double>(pool.residuals.size());
    for (auto& r : pool.residuals)
        for (std::size_t j = 0; j < m; ++j) r[j] -= mean[j];
    pool.centered = true;
}

inline FittedResiduals fitted_and_residuals(const ArhModel& model, const RkhsRepresentation& rep) {
    if (!rep.basis) throw Error(ErrorKind::parameter, "representation has no basis");
    if (rep.coeffs.cols() != model.d()) throw Error(ErrorKind::dimension, "model and representation disagree on d");
    FittedResiduals out;
    const std::size_t n = rep.size();
    out.fitted.reserve(n - 1);
    out.pool.residuals.reserve(n - 1);
    for (std::size_t k = 1; k < n; ++k) {
        Vector fitted = rep.basis->reconstruct(predict_next(model, rep.coeffs.row(k - 1)));
        Vector resid(fitted.size());
        for (std::size_t j = 0; j < fitted.size(); ++j) resid[j] = fitted[j] - rep.smoothed[k][j];
        out.fitted.push_back(std::move(fitted));
        out.pool.residuals.push_back(std::move(resid));
    }
    center_pool(out.pool);
    return out;
}

}  // namespace fpcb
