#pragma once

// Functional residual bootstrap for ARH(1) predictions.
//
// For each replicate b:
//   a. resample n-1 centered residual curves and rebuild a pseudo-series
//      Z*_1 = Z_1, Z*_k = mu + Psi(Z*_{k-1} - mu) + eps*_k;
//   b. re-estimate Psi* on the pseudo-series (when refit is on);
//   c. forecast from the observed last curve,
//      Z*_{n+j} = mu + Psi*(Z*_{n+j-1} - mu) + eps*_{n+j}, j = 1..h,
//      with fresh resampled residuals as future innovations.
//
// The pseudo-series never has to be materialized as curves. Psi acts on a
// curve Z through its coefficients, Psi(Z) = reconstruct(P^T project(Z)), and
// project(reconstruct(c)) = S c with S = diag(l_i / (gamma + l_i)), so the
// recursion runs exactly in R^d using the projected residual pool.
//
// Steps a-b depend only on the training series. They are kept in
// BootstrapDraws so one set of draws can serve many conditioning curves
// (rolling validation and test windows).

#include "fpcb/arh.hpp"
#include "fpcb/error.hpp"
#include "fpcb/parallel.hpp"
#include "fpcb/rkhs.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace fpcb {

struct BootstrapSpec {
    std::size_t B = 1000;
    std::size_t h = 1;
    std::uint64_t seed = 1;
    bool refit = true;
    double ridge = 0.0;
    std::size_t threads = 1;
    std::size_t max_retries = 10;

    void validate() const {
        if (B < 1) throw Error(ErrorKind::parameter, "bootstrap B must be >= 1");
        if (h < 1) throw Error(ErrorKind::parameter, "bootstrap horizon h must be >= 1");
    }
};

struct BootstrapEnsemble {
    std::vector<Vector> replicates;  // B curves on the grid
    Matrix replicate_coeffs;         // B x d
    Vector point_prediction;

    [[nodiscard]] std::size_t size() const noexcept { return replicates.size(); }
};

/// Per-replicate operators and future-innovation draws.
struct BootstrapDraws {
    std::shared_ptr<const RkhsBasis> basis;
    ArhModel model;
    ResidualPool pool;
    std::vector<Vector> pool_coeffs;
    std::vector<Matrix> operators;                      // empty when refit is off
    std::vector<std::vector<std::size_t>> future_draws;  // B x h pool indices
    BootstrapSpec spec;
};

inline std::mt19937_64 replicate_stream(std::uint64_t seed, std::size_t replicate, std::size_t attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                      static_cast<std::uint32_t>(attempt)};
    return std::mt19937_64(seq);
}

/// Same projection and truncation as the fitted representation.
inline Matrix project_replicates(const std::vector<Vector>& curves, const RkhsBasis& basis) {
    if (curves.empty()) throw Error(ErrorKind::parameter, "no curves to project");
    Matrix out(curves.size(), basis.d());
    for (std::size_t b = 0; b < curves.size(); ++b) {
        const Vector c = basis.project(curves[b]);
        std::copy(c.begin(), c.end(), out.row(b).begin());
    }
    return out;
}

namespace detail {

// mean + P^T (c - mean) for an arbitrary operator P.
inline Vector apply_affine(const Vector& mean, const Matrix& op, std::span<const double> c) {
    const std::size_t d = mean.size();
    Vector out = mean;
    for (std::size_t j = 0; j < d; ++j) {
        const double dev = c[j] - mean[j];
        if (dev == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) out[i] += op(j, i) * dev;
    }
    return out;
}

}  // namespace detail

inline BootstrapDraws draw_bootstrap(const RkhsRepresentation& rep, const ArhModel& model, const ResidualPool& pool,
                                     const BootstrapSpec& spec) {
    spec.validate();
    if (!rep.basis) throw Error(ErrorKind::parameter, "representation has no basis");
    if (pool.residuals.empty()) throw Error(ErrorKind::parameter, "residual pool is empty");
    if (rep.coeffs.cols() != model.d()) throw Error(ErrorKind::dimension, "model and representation disagree on d");

    BootstrapDraws draws;
    draws.basis = rep.basis;
    draws.model = model;
    draws.pool = pool;
    draws.spec = spec;
    draws.pool_coeffs.reserve(pool.size());
    for (const auto& r : pool.residuals) draws.pool_coeffs.push_back(rep.basis->project(r));

    const std::size_t n = rep.size();
    const std::size_t d = model.d();
    const Vector& shrink = rep.basis->shrinkage();
    draws.future_draws.assign(spec.B, {});
    if (spec.refit) draws.operators.assign(spec.B, Matrix());

    parallel_for(spec.B, spec.threads, [&](std::size_t b) {
        for (std::size_t attempt = 0;; ++attempt) {
            auto rng = replicate_stream(spec.seed, b, attempt);
            std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
            if (spec.refit) {
                Matrix series(n, d);
                std::copy(rep.coeffs.row(0).begin(), rep.coeffs.row(0).end(), series.row(0).begin());
                for (std::size_t k = 1; k < n; ++k) {
                    const Vector pred = detail::apply_affine(model.mean_coeffs, model.autoreg, series.row(k - 1));
                    const Vector& e = draws.pool_coeffs[pick(rng)];
                    auto row = series.row(k);
                    for (std::size_t i = 0; i < d; ++i) row[i] = shrink[i] * pred[i] + e[i];
                }
                try {
                    draws.operators[b] = fit_coefficients(series, spec.ridge, model.basis ? model.basis->policy()
                                                                                          : default_policy())
                                             .autoreg;
                } catch (const Error& e) {
                    if (attempt + 1 >= spec.max_retries) {
                        throw Error(ErrorKind::replicate_failure,
                                    "bootstrap replicate " + std::to_string(b) + " failed after " +
                                        std::to_string(spec.max_retries) + " attempts: " + e.what());
                    }
                    continue;
                }
            }
            std::vector<std::size_t> future(spec.h);
            for (auto& idx : future) idx = pick(rng);
            draws.future_draws[b] = std::move(future);
            return;
        }
    });
    return draws;
}

/// h-step point prediction from the full-sample model (no innovations).
inline Vector point_forecast(const ArhModel& model, const RkhsBasis& basis, std::span<const double> last_coeffs,
                             std::size_t h) {
    Vector c(last_coeffs.begin(), last_coeffs.end());
    Vector pred;
    for (std::size_t step = 0; step < h; ++step) {
        pred = detail::apply_affine(model.mean_coeffs, model.autoreg, c);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = basis.shrinkage()[i] * pred[i];
    }
    return basis.reconstruct(pred);
}

/// Bootstrap predictive replicates conditioned on the coefficients of the
/// last observed curve.
inline BootstrapEnsemble forecast_ensemble(const BootstrapDraws& draws, std::span<const double> last_coeffs) {
    const RkhsBasis& basis = *draws.basis;
    const std::size_t d = draws.model.d();
    if (last_coeffs.size() != d) throw Error(ErrorKind::dimension, "conditioning coefficients length differs from d");
    const Vector& shrink = basis.shrinkage();
    const std::size_t B = draws.future_draws.size();

    BootstrapEnsemble out;
    out.point_prediction = point_forecast(draws.model, basis, last_coeffs, draws.spec.h);
    out.replicates.assign(B, {});
    parallel_for(B, draws.spec.threads, [&](std::size_t b) {
        const Matrix& op = draws.operators.empty() ? draws.model.autoreg : draws.operators[b];
        Vector c(last_coeffs.begin(), last_coeffs.end());
        Vector curve;
        const auto& future = draws.future_draws[b];
        for (std::size_t step = 0; step < future.size(); ++step) {
            const Vector pred = detail::apply_affine(draws.model.mean_coeffs, op, c);
            const std::size_t j = future[step];
            if (step + 1 == future.size()) {
                curve = basis.reconstruct(pred);
                const Vector& noise = draws.pool.residuals[j];
                for (std::size_t t = 0; t < curve.size(); ++t) curve[t] += noise[t];
            } else {
                const Vector& e = draws.pool_coeffs[j];
                for (std::size_t i = 0; i < d; ++i) c[i] = shrink[i] * pred[i] + e[i];
            }
        }
        out.replicates[b] = std::move(curve);
    });
    out.replicate_coeffs = project_replicates(out.replicates, basis);
    return out;
}

inline BootstrapEnsemble residual_bootstrap(const RkhsRepresentation& rep, const ArhModel& model,
                                            const ResidualPool& pool, const BootstrapSpec& spec) {
    const BootstrapDraws draws = draw_bootstrap(rep, model, pool, spec);
    return forecast_ensemble(draws, rep.coeffs.row(rep.size() - 1));
}

inline BootstrapEnsemble residual_bootstrap(const RkhsRepresentation& rep, const ArhModel& model,
                                            const BootstrapSpec& spec) {
    return residual_bootstrap(rep, model, fitted_and_residuals(model, rep).pool, spec);
}

}  // namespace fpcb
