#pragma once

// Dense numerical primitives: a small row-major matrix type, cyclic Jacobi
// eigendecomposition for symmetric matrices, LU solves with a condition
// check, spectral pseudo-inverse and square root, and a 2D convex hull with
// membership and vertical-slice queries.

#include "fpcb/error.hpp"
#include "fpcb/numeric_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fpcb {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            throw Error(ErrorKind::dimension, "matrix dimensions must be >= 1");
        }
    }

    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0) {
            throw Error(ErrorKind::dimension, "matrix dimensions must be >= 1");
        }
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw Error(ErrorKind::dimension, "ragged matrix initializer");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> diag) {
        Matrix m(diag.size(), diag.size());
        for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
    [[nodiscard]] bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    [[nodiscard]] Vector col(std::size_t j) const {
        Vector out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
        return out;
    }

    [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

    [[nodiscard]] Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    [[nodiscard]] Vector diag() const {
        Vector out(std::min(rows_, cols_));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(i, i);
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::dimension, "matrix product shape mismatch");
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::dimension, "matrix sum shape mismatch");
    }
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
    return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::dimension, "matrix difference shape mismatch");
    }
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
    return c;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) *= s;
    return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw Error(ErrorKind::dimension, "matrix-vector shape mismatch");
    }
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

inline Vector operator*(const Matrix& a, const Vector& x) { return a * std::span<const double>(x); }

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::dimension, "dot product length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

inline bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

inline Matrix symmetrize(const Matrix& m) {
    Matrix s = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            s(i, j) = v;
            s(j, i) = v;
        }
    return s;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

struct EigenSystem {
    Vector values;   // descending
    Matrix vectors;  // column i pairs with values[i]

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }

    [[nodiscard]] Vector vector(std::size_t i) const { return vectors.col(i); }

    /// Number of eigenpairs with l_i >= rel_tol * l_1 (and l_i > 0).
    [[nodiscard]] std::size_t rank(double rel_tol) const {
        if (values.empty() || values.front() <= 0.0) return 0;
        const double cut = rel_tol * values.front();
        std::size_t r = 0;
        while (r < values.size() && values[r] > 0.0 && values[r] >= cut) ++r;
        return r;
    }

    [[nodiscard]] Matrix reconstruct() const {
        const std::size_t n = vectors.rows();
        Matrix out(n, n);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double l = values[k];
            for (std::size_t i = 0; i < n; ++i) {
                const double vik = vectors(i, k) * l;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * vectors(j, k);
            }
        }
        return out;
    }
};

/// Cyclic Jacobi. The input is symmetrized as (M + M^T)/2 first; vectors are
/// sign-normalized so their largest-magnitude component is positive, which
/// makes the output deterministic for a given input.
inline EigenSystem sym_eigen(const Matrix& m, const NumericPolicy& policy = default_policy()) {
    if (m.empty() || !m.square()) {
        throw Error(ErrorKind::dimension, "sym_eigen requires a non-empty square matrix");
    }
    if (!all_finite(m.data())) {
        throw Error(ErrorKind::numeric, "sym_eigen input contains non-finite entries");
    }
    const std::size_t n = m.rows();
    Matrix a = symmetrize(m);
    Matrix v = Matrix::identity(n);

    const double scale = frobenius_norm(a);
    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
        return std::sqrt(2.0 * s);
    };

    bool converged = scale == 0.0 || n == 1;
    for (int sweep = 0; !converged && sweep < policy.jacobi_max_sweeps; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Skip rotations that cannot change the diagonal in floating point.
                const double g = 100.0 * std::abs(apq);
                if (std::abs(app) + g == std::abs(app) && std::abs(aqq) + g == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    const double nkp = c * akp - s * akq;
                    const double nkq = s * akp + c * akq;
                    a(k, p) = nkp;
                    a(p, k) = nkp;
                    a(k, q) = nkq;
                    a(q, k) = nkq;
                }
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = off_norm() <= policy.jacobi_tol * scale;
    }
    if (!converged) {
        throw Error(ErrorKind::numeric, "Jacobi eigensolver did not converge within " +
                                            std::to_string(policy.jacobi_max_sweeps) + " sweeps");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenSystem out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.values[k] = a(src, src);
        std::size_t arg = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v(i, src)) > std::abs(v(arg, src))) arg = i;
        const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, src);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear solves

/// LU factorization with partial pivoting. Construction fails with a
/// singular-system error when the 1-norm condition number exceeds the policy
/// limit, so a successfully built solver can be reused for many right-hand
/// sides.
class LuSolver {
public:
    explicit LuSolver(const Matrix& a, const NumericPolicy& policy = default_policy())
        : lu_(a), pivots_(a.rows()) {
        if (a.empty() || !a.square()) {
            throw Error(ErrorKind::dimension, "linear solve requires a square matrix");
        }
        const std::size_t n = a.rows();
        double anorm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += std::abs(a(i, j));
            anorm = std::max(anorm, s);
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
            pivots_[k] = piv;
            if (lu_(piv, k) == 0.0) {
                throw Error(ErrorKind::singular_system, "matrix is exactly singular");
            }
            if (piv != k)
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(piv, j));
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = (lu_(i, k) *= inv);
                if (f == 0.0) continue;
                for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
        // ||A^-1||_1 from explicit columns of the inverse; n is small here.
        double inorm = 0.0;
        Vector e(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(e.begin(), e.end(), 0.0);
            e[j] = 1.0;
            const Vector col = solve(e);
            double s = 0.0;
            for (double x : col) s += std::abs(x);
            inorm = std::max(inorm, s);
        }
        condition_ = anorm * inorm;
        if (!std::isfinite(condition_) || condition_ > policy.condition_limit) {
            throw Error(ErrorKind::singular_system,
                        "condition number estimate " + std::to_string(condition_) +
                            " exceeds limit; use a pseudo-inverse or add regularization");
        }
    }

    [[nodiscard]] Vector solve(std::span<const double> b) const {
        const std::size_t n = lu_.rows();
        if (b.size() != n) throw Error(ErrorKind::dimension, "right-hand side length mismatch");
        Vector x(b.begin(), b.end());
        for (std::size_t k = 0; k < n; ++k) std::swap(x[k], x[pivots_[k]]);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = x[i];
            for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
            x[i] = acc;
        }
        for (std::size_t i = n; i-- > 0;) {
            double acc = x[i];
            for (std::size_t j = i + 1; j < n; ++j) acc -= lu_(i, j) * x[j];
            x[i] = acc / lu_(i, i);
        }
        return x;
    }

    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    Matrix lu_;
    std::vector<std::size_t> pivots_;
    double condition_ = 0.0;
};

inline Vector solve_linear(const Matrix& a, std::span<const double> b,
                           const NumericPolicy& policy = default_policy()) {
    if (a.empty() || !a.square()) throw Error(ErrorKind::dimension, "linear solve requires a square matrix");
    if (b.size() != a.rows()) throw Error(ErrorKind::dimension, "right-hand side length mismatch");
    return LuSolver(a, policy).solve(b);
}

// ---------------------------------------------------------------------------
// Spectral functions of symmetric matrices

inline void require_symmetric(const Matrix& a, double tol, const char* who) {
    if (a.empty() || !a.square()) {
        throw Error(ErrorKind::dimension, std::string(who) + " requires a square matrix");
    }
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j)
            if (std::abs(a(i, j) - a(j, i)) > tol * std::max(1.0, std::abs(a(i, j)))) {
                throw Error(ErrorKind::dimension, std::string(who) + " requires a symmetric matrix");
            }
}

/// Eigenvalues below rel_tol * lambda_max (including all non-positive ones)
/// are dropped before inversion.
inline Matrix pseudo_inverse(const Matrix& a, double rel_tol,
                             const NumericPolicy& policy = default_policy()) {
    require_symmetric(a, policy.symmetry_tol, "pseudo_inverse");
    const EigenSystem eig = sym_eigen(a, policy);
    const double lmax = eig.values.front();
    if (!(lmax > 0.0)) {
        throw Error(ErrorKind::rank_zero, "pseudo_inverse: no eigenvalue above threshold");
    }
    const std::size_t n = a.rows();
    Matrix out(n, n);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double l = eig.values[k];
        if (l <= 0.0 || l < rel_tol * lmax) continue;
        ++kept;
        const double inv = 1.0 / l;
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = eig.vectors(i, k) * inv;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
        }
    }
    if (kept == 0) throw Error(ErrorKind::rank_zero, "pseudo_inverse: no eigenvalue above threshold");
    return out;
}

inline Matrix psd_sqrt(const Matrix& a, const NumericPolicy& policy = default_policy()) {
    require_symmetric(a, policy.symmetry_tol, "psd_sqrt");
    const EigenSystem eig = sym_eigen(a, policy);
    const double lmin = eig.values.back();
    if (lmin < -policy.psd_reject) {
        throw Error(ErrorKind::not_psd,
                    "psd_sqrt: minimum eigenvalue " + std::to_string(lmin) + " is negative");
    }
    const std::size_t n = a.rows();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double r = std::sqrt(std::max(eig.values[k], 0.0));
        if (r == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = eig.vectors(i, k) * r;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * eig.vectors(j, k);
        }
    }
    return symmetrize(out);
}

// ---------------------------------------------------------------------------
// 2D convex hull

struct Point2 {
    double t = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Hull2D {
    std::vector<Point2> vertices;  // counter-clockwise, starting at the lowest leftmost point

    [[nodiscard]] double min_t() const {
        double m = vertices.front().t;
        for (const auto& p : vertices) m = std::min(m, p.t);
        return m;
    }
    [[nodiscard]] double max_t() const {
        double m = vertices.front().t;
        for (const auto& p : vertices) m = std::max(m, p.t);
        return m;
    }
};

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.t - o.t) * (b.y - o.y) - (a.y - o.y) * (b.t - o.t);
}

/// Andrew's monotone chain. Collinear boundary points are dropped.
inline Hull2D convex_hull(std::vector<Point2> points) {
    if (points.size() < 3) {
        throw Error(ErrorKind::degenerate_hull, "convex hull needs at least 3 points");
    }
    std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
        return a.t < b.t || (a.t == b.t && a.y < b.y);
    });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) {
        throw Error(ErrorKind::degenerate_hull, "convex hull needs at least 3 distinct points");
    }
    std::vector<Point2> h(2 * points.size());
    std::size_t k = 0;
    for (const auto& p : points) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
        h[k++] = p;
    }
    for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
        const auto& p = points[i];
        while (k >= lower && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
        h[k++] = p;
    }
    h.resize(k - 1);
    if (h.size() < 3) {
        throw Error(ErrorKind::degenerate_hull, "all points are collinear");
    }
    return Hull2D{std::move(h)};
}

/// True iff p is inside the hull or within `slack` (Euclidean distance) of
/// every edge's half-plane.
inline bool hull_contains(const Hull2D& h, const Point2& p, double slack) {
    const std::size_t n = h.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = h.vertices[i];
        const Point2& b = h.vertices[(i + 1) % n];
        const double len = std::hypot(b.t - a.t, b.y - a.y);
        if (len == 0.0) continue;
        if (cross(a, b, p) / len < -slack) return false;
    }
    return true;
}

struct VerticalSlice {
    double lower = 0.0;
    double upper = 0.0;
};

inline VerticalSlice hull_bounds_at(const Hull2D& h, double t) {
    if (h.vertices.empty()) throw Error(ErrorKind::domain, "empty hull");
    if (t < h.min_t() || t > h.max_t()) {
        throw Error(ErrorKind::domain, "abscissa " + std::to_string(t) + " outside hull t-range");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    const std::size_t n = h.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = h.vertices[i];
        const Point2& b = h.vertices[(i + 1) % n];
        const double t0 = std::min(a.t, b.t);
        const double t1 = std::max(a.t, b.t);
        if (t < t0 || t > t1) continue;
        if (a.t == b.t) {
            lo = std::min({lo, a.y, b.y});
            hi = std::max({hi, a.y, b.y});
            continue;
        }
        double y;
        if (t == a.t) {
            y = a.y;
        } else if (t == b.t) {
            y = b.y;
        } else {
            y = a.y + (b.y - a.y) * (t - a.t) / (b.t - a.t);
        }
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    return {lo, hi};
}

}  // namespace fpcb
