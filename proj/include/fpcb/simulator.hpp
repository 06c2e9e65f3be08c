#pragma once

// ARH(1) trajectories simulated in a finite Fourier basis.
//
//   1. Psi and Gamma0 are diagonal, completed to size m' with a geometric
//      perturbation eps / 2^j.
//   2. Gamma_eps = Gamma0 - Psi Gamma0 Psi^T must be PSD.
//   3. eps_k = Gamma_eps^{1/2} xi_k with xi_k i.i.d. N(0, I).
//   4. Z_0 = eps_0, Z_k = Psi Z_{k-1} + eps_k (coefficient space, zero mean).

#include "fpcb/error.hpp"
#include "fpcb/numkit.hpp"
#include "fpcb/rkhs.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fpcb {

struct FourierBasis {
    std::size_t dim = 0;
    TimeGrid grid;
    Matrix values;  // dim x m
};

/// phi_1 = 1, phi_{2j} = sqrt(2) sin(2 pi j t), phi_{2j+1} = sqrt(2) cos(2 pi j t).
inline FourierBasis fourier_basis(std::size_t m_prime, const TimeGrid& grid) {
    if (m_prime == 0) throw Error(ErrorKind::parameter, "Fourier basis dimension must be >= 1");
    FourierBasis fb{m_prime, grid, Matrix(m_prime, grid.size())};
    const double root2 = std::numbers::sqrt2;
    for (std::size_t i = 0; i < m_prime; ++i) {
        const std::size_t index = i + 1;  // 1-based basis index
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const double t = grid[j];
            double v;
            if (index == 1) {
                v = 1.0;
            } else {
                const double freq = static_cast<double>(index / 2);
                const double arg = 2.0 * std::numbers::pi * freq * t;
                v = (index % 2 == 0) ? root2 * std::sin(arg) : root2 * std::cos(arg);
            }
            fb.values(i, j) = v;
        }
    }
    return fb;
}

struct ArhSimSpec {
    std::size_t m_prime = 5;
    Vector psi_diag{0.45, 0.9, 0.34, 0.45};
    Vector gamma0_diag{0.5, 0.23, 0.018};
    double eps = 0.05;
    std::size_t n = 250;
    std::size_t m = 64;
    std::uint64_t seed = 1;
    std::size_t burn_in = 0;
    Vector mean_coeffs;                 // optional additive mean, length <= m'
    std::optional<Matrix> psi_matrix;     // overrides psi_diag when set
    std::optional<Matrix> gamma0_matrix;  // overrides gamma0_diag when set
    std::optional<TimeGrid> grid;         // default: TimeGrid::uniform(m)

    [[nodiscard]] TimeGrid sampling_grid() const { return grid ? *grid : TimeGrid::uniform(m); }
};

struct SimOperators {
    Matrix psi;
    Matrix gamma0;
};

struct SimResult {
    RawCurveSeries series;
    Matrix coeff_paths;  // n x m', including mean_coeffs when set
    Matrix gamma_eps;
};

/// Spectral radius via Gelfand's formula on repeated squarings.
inline double spectral_radius(const Matrix& a) {
    Matrix p = a;
    double log_scale = 0.0;
    double power = 1.0;
    for (int i = 0; i < 10; ++i) {
        const double f = frobenius_norm(p);
        if (f == 0.0) return 0.0;
        p = (1.0 / f) * p;
        log_scale = 2.0 * (log_scale + std::log(f));
        p = p * p;
        power *= 2.0;
    }
    const double f = frobenius_norm(p);
    if (f == 0.0) return 0.0;
    return std::exp((log_scale + std::log(f)) / power);
}

inline Vector complete_diagonal(const Vector& given, std::size_t m_prime, double eps) {
    Vector out(m_prime, 0.0);
    for (std::size_t j = 0; j < m_prime; ++j) {
        out[j] = j < given.size() ? given[j] : eps / std::ldexp(1.0, static_cast<int>(j + 1 - given.size()));
    }
    return out;
}

inline void validate(const ArhSimSpec& spec) {
    if (spec.m_prime == 0) throw Error(ErrorKind::parameter, "m_prime must be >= 1");
    if (!spec.psi_matrix && spec.psi_diag.size() > spec.m_prime) {
        throw Error(ErrorKind::parameter, "psi_diag longer than m_prime");
    }
    if (!spec.gamma0_matrix && spec.gamma0_diag.size() > spec.m_prime) {
        throw Error(ErrorKind::parameter, "gamma0_diag longer than m_prime");
    }
    if (!(spec.eps > 0.0)) throw Error(ErrorKind::parameter, "eps must be > 0");
    for (double g : spec.gamma0_diag)
        if (!(g > 0.0)) throw Error(ErrorKind::parameter, "gamma0_diag entries must be > 0");
    if (spec.mean_coeffs.size() > spec.m_prime) throw Error(ErrorKind::parameter, "mean_coeffs longer than m_prime");
    if (spec.n == 0) throw Error(ErrorKind::parameter, "series length n must be >= 1");
    for (const auto* mat : {&spec.psi_matrix, &spec.gamma0_matrix}) {
        if (*mat && ((*mat)->rows() != spec.m_prime || (*mat)->cols() != spec.m_prime)) {
            throw Error(ErrorKind::dimension, "operator matrices must be m' x m'");
        }
    }
}

inline SimOperators assemble_operators(const ArhSimSpec& spec) {
    validate(spec);
    SimOperators ops;
    ops.psi = spec.psi_matrix ? *spec.psi_matrix
                              : Matrix::diagonal(complete_diagonal(spec.psi_diag, spec.m_prime, spec.eps));
    ops.gamma0 = spec.gamma0_matrix
                     ? *spec.gamma0_matrix
                     : Matrix::diagonal(complete_diagonal(spec.gamma0_diag, spec.m_prime, spec.eps));
    const double rho = spec.psi_matrix ? spectral_radius(ops.psi) : [&] {
        double r = 0.0;
        for (double v : ops.psi.diag()) r = std::max(r, std::abs(v));
        return r;
    }();
    if (rho >= 1.0) {
        throw Error(ErrorKind::stationarity,
                    "autoregression operator has spectral radius " + std::to_string(rho) + " >= 1");
    }
    return ops;
}

/// Gamma_eps = Gamma0 - Psi Gamma0 Psi^T, rejected when not PSD.
inline Matrix innovation_covariance(const Matrix& psi, const Matrix& gamma0,
                                    const NumericPolicy& policy = default_policy()) {
    if (!psi.square() || !gamma0.square() || psi.rows() != gamma0.rows()) {
        throw Error(ErrorKind::dimension, "Psi and Gamma0 must be square with equal size");
    }
    const Matrix ge = symmetrize(gamma0 - psi * gamma0 * psi.transpose());
    const double lmin = sym_eigen(ge, policy).values.back();
    if (lmin < -policy.innovation_psd_tol) {
        throw Error(ErrorKind::incompatible_operators,
                    "Psi and Gamma0 are incompatible with an ARH process: Gamma_eps has minimum eigenvalue " +
                        std::to_string(lmin));
    }
    return ge;
}

inline SimResult simulate(const ArhSimSpec& spec, const NumericPolicy& policy = default_policy()) {
    const SimOperators ops = assemble_operators(spec);
    const Matrix gamma_eps = innovation_covariance(ops.psi, ops.gamma0, policy);
    const Matrix root = psd_sqrt(gamma_eps, policy);
    const TimeGrid grid = spec.sampling_grid();
    const FourierBasis fb = fourier_basis(spec.m_prime, grid);
    const std::size_t mp = spec.m_prime;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector xi(mp);
    auto innovation = [&] {
        for (double& x : xi) x = normal(rng);
        return root * xi;
    };

    SimResult out;
    out.gamma_eps = gamma_eps;
    out.coeff_paths = Matrix(spec.n, mp);
    out.series.grid = grid;
    out.series.curves.reserve(spec.n);

    Vector z = innovation();  // Z_0
    const std::size_t total = spec.burn_in + spec.n;
    for (std::size_t k = 1; k <= total; ++k) {
        Vector next = innovation();
        const Vector carried = ops.psi * z;
        for (std::size_t i = 0; i < mp; ++i) next[i] += carried[i];
        z = std::move(next);
        if (k <= spec.burn_in) continue;
        const std::size_t row = k - spec.burn_in - 1;
        for (std::size_t i = 0; i < mp; ++i) {
            out.coeff_paths(row, i) = z[i] + (i < spec.mean_coeffs.size() ? spec.mean_coeffs[i] : 0.0);
        }
        Vector curve(grid.size(), 0.0);
        for (std::size_t i = 0; i < mp; ++i) {
            const double c = out.coeff_paths(row, i);
            for (std::size_t j = 0; j < grid.size(); ++j) curve[j] += c * fb.values(i, j);
        }
        out.series.curves.push_back(std::move(curve));
    }
    return out;
}

}  // namespace fpcb
