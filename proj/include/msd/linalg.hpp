#ifndef MSD_LINALG_HPP
#define MSD_LINALG_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "msd/error.hpp"

namespace msd {

using Vector = std::vector<double>;

// Small dense row-major matrix. Everything the solver needs is m x m with
// m <= ~40, or n x m with n = block_side^2; no sparse formats.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Vector matvec(const Matrix& a, const Vector& x) {
    if (x.size() != a.cols)
        throw std::invalid_argument("matvec: dimension mismatch");
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        const double* row = &a.data[i * a.cols];
        for (std::size_t j = 0; j < a.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

// y = A^T x
inline Vector matTvec(const Matrix& a, const Vector& x) {
    if (x.size() != a.rows)
        throw std::invalid_argument("matTvec: dimension mismatch");
    Vector y(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* row = &a.data[i * a.cols];
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

// P^T diag(weights)^2 P, streamed over pixels; the n x n diagonal is never
// materialized.
inline Matrix masked_gram(const Matrix& p, const Vector& weights) {
    if (weights.size() != p.rows)
        throw std::invalid_argument("masked_gram: weights length != matrix rows");
    const std::size_t m = p.cols;
    Matrix g(m, m);
    for (std::size_t r = 0; r < p.rows; ++r) {
        const double w2 = weights[r] * weights[r];
        if (w2 == 0.0) continue;
        const double* row = &p.data[r * m];
        for (std::size_t i = 0; i < m; ++i) {
            const double wi = w2 * row[i];
            for (std::size_t j = i; j < m; ++j)
                g(i, j) += wi * row[j];
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < i; ++j)
            g(i, j) = g(j, i);
    return g;
}

// P^T diag(weights) v, streamed.
inline Vector masked_proj(const Matrix& p, const Vector& weights, const Vector& v) {
    if (weights.size() != p.rows || v.size() != p.rows)
        throw std::invalid_argument("masked_proj: dimension mismatch");
    Vector y(p.cols, 0.0);
    for (std::size_t r = 0; r < p.rows; ++r) {
        const double wv = weights[r] * v[r];
        if (wv == 0.0) continue;
        const double* row = &p.data[r * p.cols];
        for (std::size_t j = 0; j < p.cols; ++j) y[j] += row[j] * wv;
    }
    return y;
}

// Relative ridge used when the caller does not pin one: 1e-8 * trace(A)/m.
// The gram matrix is singular whenever the mask support is smaller than m,
// which is common in early iterations.
inline double auto_ridge(const Matrix& a) {
    double tr = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) tr += a(i, i);
    // absolute floor keeps the factorization alive when the mask support
    // is empty (zero gram, zero right-hand side)
    return std::max(1e-12, 1e-8 * tr / static_cast<double>(a.rows == 0 ? 1 : a.rows));
}

// Solves (A + ridge*I) x = b by Cholesky. A must be symmetric with
// non-negative eigenvalues; a non-positive pivot raises NumericalError
// carrying the pivot index.
inline Vector solve_spd(const Matrix& a, const Vector& b, double ridge) {
    if (a.rows != a.cols || b.size() != a.rows)
        throw std::invalid_argument("solve_spd: dimension mismatch");
    if (ridge < 0.0)
        throw std::invalid_argument("solve_spd: negative ridge");
    const std::size_t n = a.rows;
    Matrix l = a;
    for (std::size_t i = 0; i < n; ++i) l(i, i) += ridge;

    // In-place lower Cholesky.
    for (std::size_t j = 0; j < n; ++j) {
        double d = l(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0))
            throw NumericalError("solve_spd: non-positive pivot at index " +
                                     std::to_string(j),
                                 j);
        d = std::sqrt(d);
        l(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = l(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / d;
        }
    }

    // Forward then back substitution.
    Vector x = b;
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
    return x;
}

} // namespace msd

#endif
