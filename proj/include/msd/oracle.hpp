#ifndef MSD_ORACLE_HPP
#define MSD_ORACLE_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "msd/basis.hpp"
#include "msd/linalg.hpp"
#include "msd/solver.hpp"

namespace msd {

// Exhaustive exact solver for the unrelaxed (binary-mask, l0-penalized)
// problem. Tractable only because n <= 16.
struct OracleResult {
    MaskVector best_mask;
    double best_objective = std::numeric_limits<double>::infinity();
    std::uint64_t evaluated = 0;
    bool approximate = false; // greedy support search was used somewhere
};

namespace detail {

inline std::uint64_t binomial(std::size_t m, std::size_t k) {
    if (k > m) return 0;
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < k; ++i) r = r * (m - i) / (i + 1);
    return r;
}

// Weighted least squares of f restricted to the given pixel support and
// column subset; returns the support residual sum of squares and fills
// alpha (full length, zeros off the subset).
inline double fit_subset(const Vector& f, const Matrix& p, const Vector& support,
                         const std::vector<std::size_t>& cols, Vector& alpha) {
    alpha.assign(p.cols, 0.0);
    const std::size_t k = cols.size();
    Matrix a(k, k);
    Vector b(k, 0.0);
    for (std::size_t r = 0; r < p.rows; ++r) {
        if (support[r] == 0.0) continue;
        for (std::size_t i = 0; i < k; ++i) {
            const double pi = p(r, cols[i]);
            b[i] += pi * f[r];
            for (std::size_t j = i; j < k; ++j) a(i, j) += pi * p(r, cols[j]);
        }
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    double tr = 0.0;
    for (std::size_t i = 0; i < k; ++i) tr += a(i, i);
    if (tr == 0.0) {
        double rss = 0.0;
        for (std::size_t r = 0; r < p.rows; ++r)
            if (support[r] != 0.0) rss += f[r] * f[r];
        return rss;
    }
    const Vector x = solve_spd(a, b, std::max(1e-12, 1e-10 * tr / k));
    for (std::size_t i = 0; i < k; ++i) alpha[cols[i]] = x[i];
    double rss = 0.0;
    for (std::size_t r = 0; r < p.rows; ++r) {
        if (support[r] == 0.0) continue;
        double fit = 0.0;
        for (std::size_t i = 0; i < k; ++i) fit += p(r, cols[i]) * x[i];
        const double e = f[r] - fit;
        rss += e * e;
    }
    return rss;
}

// Best k-sparse fit of f over the pixel support: exhaustive over column
// subsets when C(m,k) <= 100, greedy matching otherwise.
inline double fit_sparse(const Vector& f, const Matrix& p, const Vector& support,
                         std::size_t k, Vector& alpha, bool& approximate) {
    const std::size_t m = p.cols;
    k = std::min(k, m);
    alpha.assign(m, 0.0);
    bool any = false;
    for (std::size_t r = 0; r < p.rows; ++r)
        if (support[r] != 0.0) { any = true; break; }
    if (!any) return 0.0;

    if (binomial(m, k) <= 100) {
        std::vector<std::size_t> cols(k);
        for (std::size_t i = 0; i < k; ++i) cols[i] = i;
        double best = std::numeric_limits<double>::infinity();
        Vector cand;
        for (;;) {
            const double rss = fit_subset(f, p, support, cols, cand);
            if (rss < best) {
                best = rss;
                alpha = cand;
            }
            // next k-combination of {0..m-1}
            std::size_t i = k;
            while (i-- > 0) {
                if (cols[i] != i + m - k) {
                    ++cols[i];
                    for (std::size_t j = i + 1; j < k; ++j) cols[j] = cols[j - 1] + 1;
                    break;
                }
                if (i == 0) return best;
            }
        }
    }

    // Greedy orthogonal matching over the support.
    approximate = true;
    std::vector<std::size_t> chosen;
    Vector resid = f;
    double best = 0.0;
    for (std::size_t step = 0; step < k; ++step) {
        std::size_t pick = m;
        double pick_score = -1.0;
        for (std::size_t c = 0; c < m; ++c) {
            bool used = false;
            for (std::size_t ch : chosen)
                if (ch == c) { used = true; break; }
            if (used) continue;
            double corr = 0.0;
            for (std::size_t r = 0; r < p.rows; ++r)
                if (support[r] != 0.0) corr += p(r, c) * resid[r];
            if (std::abs(corr) > pick_score) {
                pick_score = std::abs(corr);
                pick = c;
            }
        }
        if (pick == m) break;
        chosen.push_back(pick);
        best = fit_subset(f, p, support, chosen, alpha);
        const Vector fit = matvec(p, alpha);
        for (std::size_t r = 0; r < p.rows; ++r)
            resid[r] = support[r] != 0.0 ? f[r] - fit[r] : 0.0;
    }
    return best;
}

} // namespace detail

// Objective of problem (binary mask, l0 mask penalty) for a given mask,
// with alphas refit optimally on each side's support.
inline double score_mask(const Vector& f, const Subspace& p1, const Subspace& p2,
                         std::size_t k1, std::size_t k2, double lambda,
                         const MaskVector& mask, bool* approximate = nullptr) {
    const std::size_t n = f.size();
    if (mask.w.size() != n)
        throw std::invalid_argument("score_mask: dimension mismatch");
    Vector bg_support(n), fg_support(n);
    double ones = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        fg_support[i] = mask.w[i];
        bg_support[i] = 1.0 - mask.w[i];
        ones += mask.w[i];
    }
    bool approx = false;
    Vector a1, a2;
    const double rss1 = detail::fit_sparse(f, p1.basis, bg_support, k1, a1, approx);
    const double rss2 = detail::fit_sparse(f, p2.basis, fg_support, k2, a2, approx);
    if (approximate) *approximate = approx;
    return 0.5 * (rss1 + rss2) + lambda * ones;
}

inline OracleResult exhaustive_solve(const Vector& f, const Subspace& p1,
                                     const Subspace& p2, std::size_t k1,
                                     std::size_t k2, double lambda) {
    const std::size_t n = f.size();
    if (n > 16)
        throw std::invalid_argument("exhaustive_solve: n > 16 refused");
    if (p1.basis.rows != n || p2.basis.rows != n)
        throw std::invalid_argument("exhaustive_solve: dimension mismatch");
    OracleResult res;
    res.evaluated = std::uint64_t{1} << n;
    MaskVector mask;
    mask.binary = true;
    mask.w.assign(n, 0.0);
    for (std::uint64_t code = 0; code < res.evaluated; ++code) {
        for (std::size_t i = 0; i < n; ++i)
            mask.w[i] = (code >> i) & 1u ? 1.0 : 0.0;
        bool approx = false;
        const double obj = score_mask(f, p1, p2, k1, k2, lambda, mask, &approx);
        res.approximate = res.approximate || approx;
        if (obj < res.best_objective) {
            res.best_objective = obj;
            res.best_mask = mask;
        }
    }
    return res;
}

} // namespace msd

#endif
