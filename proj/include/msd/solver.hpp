#ifndef MSD_SOLVER_HPP
#define MSD_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "msd/basis.hpp"
#include "msd/linalg.hpp"
#include "msd/rng.hpp"

namespace msd {

// Relaxed ([0,1]) or binary ({0,1}) selection mask over block pixels.
struct MaskVector {
    Vector w;
    bool binary = false;
};

struct Coefficients {
    Vector alpha1;
    Vector alpha2;
    std::size_t k1 = 0;
    std::size_t k2 = 0;
};

enum class BinarizeStrategy { AtEnd, PerIteration };

// Sparsity weight on the [0,1] intensity scale, calibrated by a lambda
// sweep over the synthetic corpus (the F1 plateau spans roughly 5e-3 to
// 6e-3; see the sweep subcommand).
inline constexpr double kDefaultLambda = 6e-3;

struct SolverConfig {
    double lambda = kDefaultLambda;
    std::size_t k_max = 10;
    std::size_t k1 = 5;
    std::size_t k2 = 5;
    BinarizeStrategy strategy = BinarizeStrategy::AtEnd;
    double threshold = 0.5;
    std::optional<double> ridge; // empty = relative auto ridge (see linalg)
    std::uint64_t seed = 0;

    void validate() const {
        if (lambda < 0.0) throw std::invalid_argument("config: lambda < 0");
        if (k_max < 1) throw std::invalid_argument("config: k_max < 1");
        if (k1 < 1 || k2 < 1) throw std::invalid_argument("config: k < 1");
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::invalid_argument("config: threshold outside (0,1)");
        if (ridge && *ridge < 0.0) throw std::invalid_argument("config: ridge < 0");
    }
};

struct SolveResult {
    MaskVector mask;         // binary
    MaskVector relaxed_mask; // last continuous w before final binarization
    Coefficients coeffs;
    Vector objective_trace;  // one entry per outer iteration
    Vector background;       // P1 * alpha1
    Vector foreground;       // P2 * alpha2
};

inline double soft_threshold(double x, double t) {
    const double m = std::abs(x) - t;
    return m > 0.0 ? (x < 0.0 ? -m : m) : 0.0;
}

// Keeps the k largest-magnitude entries, zeroing the rest. Ties at the
// k-th position keep the lower index.
inline Vector top_k(const Vector& v, std::size_t k) {
    if (k >= v.size()) return v;
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(v[a]) > std::abs(v[b]);
    });
    Vector out(v.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) out[idx[i]] = v[idx[i]];
    return out;
}

// Residual f - (1-w).*P1 a1 - w.*P2 a2 given precomputed reconstructions.
inline Vector overlay_residual(const Vector& f, const Vector& bg, const Vector& fg,
                               const Vector& w) {
    Vector r(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        r[i] = f[i] - (1.0 - w[i]) * bg[i] - w[i] * fg[i];
    return r;
}

// 1/2 ||f - (1-w).*P1 a1 - w.*P2 a2||^2 + lambda ||w||_1 with w in [0,1]^n.
inline double objective(const Vector& f, const Subspace& p1, const Subspace& p2,
                        const Coefficients& coeffs, const MaskVector& w,
                        double lambda) {
    if (f.size() != p1.basis.rows || f.size() != p2.basis.rows ||
        w.w.size() != f.size())
        throw std::invalid_argument("objective: dimension mismatch");
    const Vector bg = matvec(p1.basis, coeffs.alpha1);
    const Vector fg = matvec(p2.basis, coeffs.alpha2);
    const Vector r = overlay_residual(f, bg, fg, w.w);
    double l1 = 0.0;
    for (double wi : w.w) l1 += wi;
    return 0.5 * dot(r, r) + lambda * l1;
}

// Gradient of the smooth (quadratic) part with respect to (a1, a2, w).
struct SmoothGradient {
    Vector d_alpha1;
    Vector d_alpha2;
    Vector d_w;
};

inline SmoothGradient smooth_gradient(const Vector& f, const Subspace& p1,
                                      const Subspace& p2, const Coefficients& coeffs,
                                      const Vector& w) {
    const Vector bg = matvec(p1.basis, coeffs.alpha1);
    const Vector fg = matvec(p2.basis, coeffs.alpha2);
    const Vector r = overlay_residual(f, bg, fg, w);
    SmoothGradient g;
    Vector wbar_r(r.size()), w_r(r.size());
    g.d_w.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        wbar_r[i] = (1.0 - w[i]) * r[i];
        w_r[i] = w[i] * r[i];
        g.d_w[i] = -(fg[i] - bg[i]) * r[i];
    }
    g.d_alpha1 = matTvec(p1.basis, wbar_r);
    for (double& v : g.d_alpha1) v = -v;
    g.d_alpha2 = matTvec(p2.basis, w_r);
    for (double& v : g.d_alpha2) v = -v;
    return g;
}

// Closed-form coefficient update for one component: ridge-stabilized
// weighted least squares followed by top-k truncation. weights_own is the
// masking vector of the component being updated; the other component is
// masked by (1 - weights_own).
inline Vector update_alpha(const Vector& f, const Subspace& p_own,
                           const Subspace& p_other, const Vector& alpha_other,
                           const Vector& weights_own, std::size_t k,
                           std::optional<double> ridge = std::nullopt) {
    const std::size_t n = f.size();
    if (p_own.basis.rows != n || p_other.basis.rows != n || weights_own.size() != n)
        throw std::invalid_argument("update_alpha: dimension mismatch");
    if (k < 1 || k > p_own.basis.cols)
        throw std::invalid_argument("update_alpha: k out of range");

    const Vector other = matvec(p_other.basis, alpha_other);
    Vector target(n);
    for (std::size_t i = 0; i < n; ++i)
        target[i] = f[i] - (1.0 - weights_own[i]) * other[i];

    const Matrix a = masked_gram(p_own.basis, weights_own);
    const Vector b = masked_proj(p_own.basis, weights_own, target);
    const double eps = ridge ? *ridge : auto_ridge(a);
    const Vector alpha = solve_spd(a, b, eps);
    return top_k(alpha, k);
}

// Decoupled per-pixel w update: w_i = clip01(soft(h_i/C_ii, lambda/C_ii^2))
// with C = fg - bg, h = f - bg. When |C_ii| is negligible the quadratic is
// flat in w_i and the l1 penalty forces w_i = 0.
inline MaskVector update_mask(const Vector& f, const Vector& bg, const Vector& fg,
                              double lambda) {
    constexpr double kCMin = 1e-9;
    if (bg.size() != f.size() || fg.size() != f.size())
        throw std::invalid_argument("update_mask: dimension mismatch");
    MaskVector m;
    m.binary = false;
    m.w.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double c = fg[i] - bg[i];
        if (std::abs(c) <= kCMin) {
            m.w[i] = 0.0;
            continue;
        }
        const double h = f[i] - bg[i];
        const double wi = soft_threshold(h / c, lambda / (c * c));
        m.w[i] = std::clamp(wi, 0.0, 1.0);
    }
    return m;
}

inline MaskVector binarize(const MaskVector& m, double threshold) {
    MaskVector out;
    out.binary = true;
    out.w.resize(m.w.size());
    for (std::size_t i = 0; i < m.w.size(); ++i)
        out.w[i] = m.w[i] >= threshold ? 1.0 : 0.0;
    return out;
}

// Alternating minimization over (alpha1, alpha2, w): w starts uniform
// random in [0,1] from the seeded generator, alphas start at zero, each
// outer iteration runs the alpha1 / alpha2 / w updates in that order.
inline SolveResult solve_block(const Vector& f, const Subspace& p1,
                               const Subspace& p2, const SolverConfig& config) {
    config.validate();
    const std::size_t n = f.size();
    if (p1.basis.rows != n || p2.basis.rows != n)
        throw std::invalid_argument("solve_block: dimension mismatch");
    if (config.k1 > p1.basis.cols || config.k2 > p2.basis.cols)
        throw std::invalid_argument("solve_block: sparsity budget exceeds subspace size");

    Pcg32 rng(config.seed);
    MaskVector w;
    w.w.resize(n);
    for (double& wi : w.w) wi = rng.uniform();

    Coefficients coeffs;
    coeffs.alpha1.assign(p1.basis.cols, 0.0);
    coeffs.alpha2.assign(p2.basis.cols, 0.0);
    coeffs.k1 = config.k1;
    coeffs.k2 = config.k2;

    SolveResult res;
    res.objective_trace.reserve(config.k_max);
    MaskVector relaxed = w;

    Vector wbar(n);
    for (std::size_t it = 0; it < config.k_max; ++it) {
        for (std::size_t i = 0; i < n; ++i) wbar[i] = 1.0 - w.w[i];
        coeffs.alpha1 = update_alpha(f, p1, p2, coeffs.alpha2, wbar, config.k1,
                                     config.ridge);
        coeffs.alpha2 = update_alpha(f, p2, p1, coeffs.alpha1, w.w, config.k2,
                                     config.ridge);
        const Vector bg = matvec(p1.basis, coeffs.alpha1);
        const Vector fg = matvec(p2.basis, coeffs.alpha2);
        relaxed = update_mask(f, bg, fg, config.lambda);
        w = config.strategy == BinarizeStrategy::PerIteration
                ? binarize(relaxed, config.threshold)
                : relaxed;
        res.objective_trace.push_back(objective(f, p1, p2, coeffs, w, config.lambda));
    }

    res.relaxed_mask = relaxed;
    res.mask = w.binary ? w : binarize(w, config.threshold);
    res.coeffs = coeffs;
    res.background = matvec(p1.basis, coeffs.alpha1);
    res.foreground = matvec(p2.basis, coeffs.alpha2);
    return res;
}

} // namespace msd

#endif
