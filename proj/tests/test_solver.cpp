#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msd/basis.hpp"
#include "msd/eval.hpp"
#include "msd/rng.hpp"
#include "msd/solver.hpp"
#include "msd/synth.hpp"

using namespace msd;

namespace {

Vector random_vector(std::size_t n, Pcg32& rng, double lo = 0.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// independent scalar-loop evaluation of the relaxed objective
double objective_by_hand(const Vector& f, const Subspace& p1, const Subspace& p2,
                         const Vector& a1, const Vector& a2, const Vector& w,
                         double lambda) {
    double quad = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        double bg = 0.0, fg = 0.0;
        for (std::size_t j = 0; j < a1.size(); ++j) bg += p1.basis(i, j) * a1[j];
        for (std::size_t j = 0; j < a2.size(); ++j) fg += p2.basis(i, j) * a2[j];
        const double r = f[i] - (1.0 - w[i]) * bg - w[i] * fg;
        quad += r * r;
        l1 += std::abs(w[i]);
    }
    return 0.5 * quad + lambda * l1;
}

} // namespace

TEST_CASE("soft threshold") {
    CHECK(soft_threshold(0.5, 0.2) == doctest::Approx(0.3));
    CHECK(soft_threshold(-1.0, 0.4) == doctest::Approx(-0.6));
    CHECK(soft_threshold(0.1, 0.2) == 0.0);
    CHECK(soft_threshold(-0.1, 0.2) == 0.0);
}

TEST_CASE("top_k keeps the largest magnitudes, lower index on ties") {
    CHECK(top_k({3.0, -4.0, 1.0}, 2) == Vector{3.0, -4.0, 0.0});
    CHECK(top_k({1.0, -1.0, 1.0}, 2) == Vector{1.0, -1.0, 0.0});
    CHECK(top_k({1.0, 2.0}, 5) == Vector{1.0, 2.0});
}

TEST_CASE("objective zero cases") {
    const Subspace p1 = make_dct_subspace(2, 2);
    const Subspace p2 = make_hadamard_subspace(2, 2);
    Coefficients c;
    c.alpha1 = {0.0, 0.0};
    c.alpha2 = {0.0, 0.0};
    MaskVector w;
    w.w.assign(4, 0.0);
    CHECK(objective(Vector(4, 0.0), p1, p2, c, w, 5.0) == 0.0);

    // f fits the background exactly with zero mask
    c.alpha1 = {0.7, -0.3};
    const Vector f = matvec(p1.basis, c.alpha1);
    c.alpha2 = {9.0, 9.0}; // irrelevant under w = 0
    CHECK(objective(f, p1, p2, c, w, 5.0) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("objective matches a term-by-term hand expansion on a toy instance") {
    const Subspace p1 = make_dct_subspace(2, 2);
    const Subspace p2 = make_hadamard_subspace(2, 3);
    Coefficients c;
    c.alpha1 = {0.4, -1.2};
    c.alpha2 = {0.3, 0.9, -0.5};
    MaskVector w;
    w.w = {0.0, 0.25, 0.75, 1.0};
    const Vector f = {0.1, 0.9, 0.4, 0.6};
    const double expect = objective_by_hand(f, p1, p2, c.alpha1, c.alpha2, w.w, 0.3);
    CHECK(objective(f, p1, p2, c, w, 0.3) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("update_alpha with unit weights collapses to truncated projection") {
    const Subspace p1 = make_dct_subspace(4, 6);
    const Subspace p2 = make_hadamard_subspace(4, 2);
    Pcg32 rng(9);
    const Vector f = random_vector(16, rng);
    const Vector ones(16, 1.0);
    const Vector a = update_alpha(f, p1, p2, {0.0, 0.0}, ones, 3, 0.0);
    const Vector expect = top_k(matTvec(p1.basis, f), 3);
    std::size_t nonzeros = 0;
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(a[i] == doctest::Approx(expect[i]).epsilon(1e-9));
        if (a[i] != 0.0) ++nonzeros;
    }
    CHECK(nonzeros <= 3);
}

TEST_CASE("update_alpha with all-zero weights and positive ridge returns zero") {
    const Subspace p1 = make_dct_subspace(3, 2);
    const Subspace p2 = make_dct_subspace(3, 2);
    const Vector a =
        update_alpha(Vector(9, 0.5), p1, p2, {1.0, 1.0}, Vector(9, 0.0), 2, 0.5);
    CHECK(a == Vector{0.0, 0.0});
}

TEST_CASE("update_alpha matches a dense materialized computation") {
    // oracle: explicitly build diag(weights), assemble the normal equations
    // densely, solve, then truncate by sorting
    const Subspace p_own = make_dct_subspace(4, 4);
    const Subspace p_other = make_hadamard_subspace(4, 3);
    Pcg32 rng(21);
    const Vector f = random_vector(16, rng);
    const Vector other = random_vector(3, rng, -1.0, 1.0);
    const Vector wt = random_vector(16, rng, 0.05, 1.0);
    const double ridge = 1e-10;

    const std::size_t n = 16, m = 4;
    Matrix wp(n, m);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) wp(r, c) = wt[r] * p_own.basis(r, c);
    Matrix a(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += wp(r, i) * wp(r, j);
            a(i, j) = s + (i == j ? ridge : 0.0);
        }
    const Vector ov = matvec(p_other.basis, other);
    Vector rhs(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const double t = wt[r] * (f[r] - (1.0 - wt[r]) * ov[r]);
        for (std::size_t j = 0; j < m; ++j) rhs[j] += p_own.basis(r, j) * t;
    }
    const Vector full = solve_spd(a, rhs, 0.0);
    const Vector expect = top_k(full, 2);

    const Vector got = update_alpha(f, p_own, p_other, other, wt, 2, ridge);
    for (std::size_t i = 0; i < m; ++i)
        CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-9));
}

TEST_CASE("update_alpha stationarity at k=m, ridge=0, positive weights") {
    const Subspace p_own = make_dct_subspace(4, 5);
    const Subspace p_other = make_hadamard_subspace(4, 3);
    Pcg32 rng(33);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector f = random_vector(16, rng);
        const Vector other = random_vector(3, rng, -1.0, 1.0);
        const Vector wt = random_vector(16, rng, 0.1, 1.0);
        const Vector a = update_alpha(f, p_own, p_other, other, wt, 5, 0.0);
        const Vector ov = matvec(p_other.basis, other);
        const Vector own = matvec(p_own.basis, a);
        Vector resid(16);
        for (std::size_t i = 0; i < 16; ++i)
            resid[i] = wt[i] * (wt[i] * own[i] + (1.0 - wt[i]) * ov[i] - f[i]);
        const Vector grad = matTvec(p_own.basis, resid);
        for (double g : grad) CHECK(std::abs(g) < 1e-6);
    }
}

TEST_CASE("update_mask direct formula cases") {
    // one-pixel instances: bg = 0 so h = f, C = fg
    MaskVector m = update_mask({0.8}, {0.0}, {1.0}, 0.1);
    CHECK(m.w[0] == doctest::Approx(0.7));
    m = update_mask({5.0}, {0.0}, {1.0}, 0.1);
    CHECK(m.w[0] == 1.0); // soft gives 4.9, clipped
    m = update_mask({0.3}, {0.0}, {0.0}, 0.1);
    CHECK(m.w[0] == 0.0); // degenerate C = 0
    m = update_mask({-3.0}, {0.0}, {1.0}, 0.1);
    CHECK(m.w[0] == 0.0); // negative soft output, clipped at 0
}

TEST_CASE("update_mask beats a per-pixel grid search") {
    // the cost decouples per pixel, so grid search each coordinate
    Pcg32 rng(17);
    const std::size_t n = 64;
    const Vector f = random_vector(n, rng);
    const Vector bg = random_vector(n, rng, -1.0, 1.0);
    const Vector fg = random_vector(n, rng, -1.0, 1.0);
    const double lambda = 0.05;
    const MaskVector m = update_mask(f, bg, fg, lambda);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = fg[i] - bg[i];
        const double h = f[i] - bg[i];
        auto g = [&](double w) {
            const double e = h - c * w;
            return 0.5 * e * e + lambda * std::abs(w);
        };
        const double mine = g(m.w[i]);
        for (int k = 0; k <= 1000; ++k)
            CHECK(mine <= g(k / 1000.0) + 1e-9);
    }
}

TEST_CASE("binarize thresholds with >= at the boundary") {
    MaskVector m;
    m.w = {0.2, 0.5, 0.9};
    const MaskVector b = binarize(m, 0.5);
    CHECK(b.binary);
    CHECK(b.w == Vector{0.0, 1.0, 1.0});
    m.w = {0.0, 0.0};
    CHECK(binarize(m, 0.5).w == Vector{0.0, 0.0});
    m.w = {1.0, 1.0};
    CHECK(binarize(m, 0.5).w == Vector{1.0, 1.0});
}

TEST_CASE("solve_block on a pure background atom returns an empty mask") {
    const Subspace p1 = make_dct_subspace(8, 6);
    const Subspace p2 = make_hadamard_subspace(8, 4);
    Vector e1(6, 0.0);
    e1[0] = 8.0 * 0.5; // mid-gray block via the DC atom
    const Vector f = matvec(p1.basis, e1);
    SolverConfig cfg;
    cfg.k1 = 3;
    cfg.k2 = 2;
    cfg.lambda = 10.0; // heavy penalty: any foreground use must pay for itself
    const SolveResult res = solve_block(f, p1, p2, cfg);
    for (double w : res.mask.w) CHECK(w == 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        err = std::max(err, std::abs(res.background[i] - f[i]));
    CHECK(err < 1e-6);
}

TEST_CASE("solve_block recovers a synthetic glyph mask with F1 >= 0.9") {
    SynthSpec spec;
    spec.block_side = 64;
    spec.glyph_text = "AB";
    spec.glyph_scale = 3;
    spec.seed = 12;
    const LabeledBlock block = generate(spec);
    const Subspace p1 = make_dct_subspace(64, 40);
    const Subspace p2 = make_hadamard_subspace(64, 10);
    SolverConfig cfg; // defaults
    const SolveResult res = solve_block(block.image, p1, p2, cfg);
    const SegMetrics m = metrics(confusion(res.mask, block.truth_mask));
    CHECK(m.f1 >= 0.9);
}

TEST_CASE("solve_block is deterministic") {
    const Subspace p1 = make_dct_subspace(4, 6);
    const Subspace p2 = make_hadamard_subspace(4, 4);
    Pcg32 rng(2);
    const Vector f = random_vector(16, rng);
    SolverConfig cfg;
    cfg.k1 = 3;
    cfg.k2 = 2;
    cfg.lambda = 0.01;
    cfg.seed = 99;
    const SolveResult a = solve_block(f, p1, p2, cfg);
    const SolveResult b = solve_block(f, p1, p2, cfg);
    CHECK(a.mask.w == b.mask.w);
    CHECK(a.relaxed_mask.w == b.relaxed_mask.w);
    CHECK(a.coeffs.alpha1 == b.coeffs.alpha1);
    CHECK(a.coeffs.alpha2 == b.coeffs.alpha2);
    CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("solve_block keeps every continuous mask in [0,1] and traces finite") {
    const Subspace p1 = make_dct_subspace(4, 6);
    const Subspace p2 = make_hadamard_subspace(4, 4);
    Pcg32 rng(14);
    const Vector f = random_vector(16, rng);
    SolverConfig cfg;
    cfg.k1 = 2;
    cfg.k2 = 2;
    cfg.lambda = 0.02;
    const SolveResult res = solve_block(f, p1, p2, cfg);
    CHECK(res.objective_trace.size() == cfg.k_max);
    for (double o : res.objective_trace) CHECK(std::isfinite(o));
    for (double w : res.relaxed_mask.w) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
}

TEST_CASE("monotone descent without truncation (k=m, ridge=0, at-end)") {
    const Subspace p1 = make_dct_subspace(4, 4);
    const Subspace p2 = make_hadamard_subspace(4, 3);
    Pcg32 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector f = random_vector(16, rng);
        SolverConfig cfg;
        cfg.k1 = 4;
        cfg.k2 = 3;
        cfg.ridge = 0.0;
        cfg.lambda = 0.02;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const SolveResult res = solve_block(f, p1, p2, cfg);
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-10);
    }
}

TEST_CASE("smooth gradient matches central finite differences") {
    const Subspace p1 = make_dct_subspace(3, 3);
    const Subspace p2b = make_dct_subspace(3, 2);
    Pcg32 rng(8);
    const std::size_t n = 9;
    const double step = 1e-5;
    for (int point = 0; point < 10; ++point) {
        const Vector f = random_vector(n, rng);
        Coefficients c;
        c.alpha1 = random_vector(3, rng, -1.0, 1.0);
        c.alpha2 = random_vector(2, rng, -1.0, 1.0);
        Vector w = random_vector(n, rng, 0.05, 0.95);

        const SmoothGradient g = smooth_gradient(f, p1, p2b, c, w);
        auto smooth = [&](const Coefficients& cc, const Vector& ww) {
            MaskVector m;
            m.w = ww;
            return objective(f, p1, p2b, cc, m, 0.0);
        };
        double num = 0.0, den = 0.0;
        auto accum = [&](double analytic, double plus, double minus) {
            const double fd = (plus - minus) / (2.0 * step);
            num += (fd - analytic) * (fd - analytic);
            den += fd * fd;
        };
        for (std::size_t i = 0; i < 3; ++i) {
            Coefficients cp = c, cm = c;
            cp.alpha1[i] += step;
            cm.alpha1[i] -= step;
            accum(g.d_alpha1[i], smooth(cp, w), smooth(cm, w));
        }
        for (std::size_t i = 0; i < 2; ++i) {
            Coefficients cp = c, cm = c;
            cp.alpha2[i] += step;
            cm.alpha2[i] -= step;
            accum(g.d_alpha2[i], smooth(cp, w), smooth(cm, w));
        }
        for (std::size_t i = 0; i < n; ++i) {
            Vector wp = w, wm = w;
            wp[i] += step;
            wm[i] -= step;
            accum(g.d_w[i], smooth(c, wp), smooth(c, wm));
        }
        CHECK(std::sqrt(num) / std::max(1.0, std::sqrt(den)) < 1e-5);
    }
}

TEST_CASE("at-end binarization is the identity on an already binary mask") {
    MaskVector m;
    m.w = {0.0, 1.0, 1.0, 0.0};
    const MaskVector b = binarize(m, 0.5);
    CHECK(b.w == m.w);
}

TEST_CASE("per-iteration strategy produces a binary mask directly") {
    const Subspace p1 = make_dct_subspace(4, 4);
    const Subspace p2 = make_hadamard_subspace(4, 3);
    Pcg32 rng(6);
    Vector f(16);
    for (double& v : f) v = rng.uniform();
    SolverConfig cfg;
    cfg.k1 = 2;
    cfg.k2 = 2;
    cfg.lambda = 0.02;
    cfg.strategy = BinarizeStrategy::PerIteration;
    const SolveResult res = solve_block(f, p1, p2, cfg);
    CHECK(res.mask.binary);
    for (double w : res.mask.w) CHECK((w == 0.0 || w == 1.0));
    // the relaxed mask is the pre-binarization continuous state
    for (double w : res.relaxed_mask.w) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
}

TEST_CASE("solver config validation") {
    SolverConfig cfg;
    cfg.threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.lambda = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SolverConfig{};
    cfg.k_max = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
