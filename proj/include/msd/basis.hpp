#ifndef MSD_BASIS_HPP
#define MSD_BASIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msd/error.hpp"
#include "msd/linalg.hpp"

namespace msd {

enum class SubspaceKind { DctLowFreq, HadamardLowSeq, Custom };

// An n x m basis whose columns are atoms for one signal component.
// n = block_side^2; each atom is a block image flattened row-major.
struct Subspace {
    Matrix basis;
    std::size_t block_side = 0;
    SubspaceKind kind = SubspaceKind::Custom;
    bool normalized_on_load = false; // custom load rescaled columns to unit norm
};

namespace detail {

// Index pairs (u,v) over an s x s grid in zigzag order:
// (0,0),(0,1),(1,0),(2,0),(1,1),(0,2),(0,3),...
// Odd anti-diagonals walk u upward, even ones downward.
inline std::vector<std::pair<std::size_t, std::size_t>>
zigzag_pairs(std::size_t side, std::size_t count) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(count);
    for (std::size_t d = 0; d <= 2 * (side - 1) && out.size() < count; ++d) {
        const std::size_t lo = d >= side ? d - side + 1 : 0;
        const std::size_t hi = std::min(d, side - 1);
        if (d % 2 == 1) {
            for (std::size_t u = lo; u <= hi && out.size() < count; ++u)
                out.emplace_back(u, d - u);
        } else {
            for (std::size_t u = hi + 1; u-- > lo && out.size() < count;)
                out.emplace_back(u, d - u);
        }
    }
    return out;
}

// Orthonormal 1D DCT-II entry: value of frequency-k atom at sample i.
inline double dct1(std::size_t n, std::size_t k, std::size_t i) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return scale * std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
}

// Rows of the natural-order Hadamard matrix sorted by sequency (number of
// sign changes). Sequencies 0..n-1 occur exactly once, so the sort gives
// the Walsh ordering directly.
inline std::vector<std::vector<int>> walsh_rows(std::size_t n) {
    std::vector<std::vector<int>> rows(n, std::vector<int>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            int pop = 0;
            for (std::size_t b = i & j; b; b &= b - 1) ++pop;
            rows[i][j] = (pop & 1) ? -1 : 1;
        }
    auto sequency = [n](const std::vector<int>& r) {
        std::size_t s = 0;
        for (std::size_t j = 1; j < n; ++j)
            if (r[j] != r[j - 1]) ++s;
        return s;
    };
    std::sort(rows.begin(), rows.end(),
              [&](const auto& a, const auto& b) { return sequency(a) < sequency(b); });
    return rows;
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

} // namespace detail

// The m lowest-frequency 2D DCT-II basis images under zigzag (u,v) ordering.
inline Subspace make_dct_subspace(std::size_t block_side, std::size_t m) {
    const std::size_t n = block_side * block_side;
    if (block_side == 0 || m == 0 || m > n)
        throw std::invalid_argument("make_dct_subspace: m out of range");
    Subspace s;
    s.block_side = block_side;
    s.kind = SubspaceKind::DctLowFreq;
    s.basis = Matrix(n, m);
    const auto pairs = detail::zigzag_pairs(block_side, m);
    for (std::size_t c = 0; c < m; ++c) {
        const auto [u, v] = pairs[c];
        for (std::size_t r = 0; r < block_side; ++r)
            for (std::size_t cc = 0; cc < block_side; ++cc)
                s.basis(r * block_side + cc, c) =
                    detail::dct1(block_side, u, r) * detail::dct1(block_side, v, cc);
    }
    return s;
}

// The m lowest-sequency 2D Walsh-Hadamard basis images, zigzag over the
// sequency pair; entries are exactly +-1/block_side.
inline Subspace make_hadamard_subspace(std::size_t block_side, std::size_t m) {
    if (!detail::is_pow2(block_side))
        throw std::invalid_argument(
            "make_hadamard_subspace: block_side must be a power of two");
    const std::size_t n = block_side * block_side;
    if (m == 0 || m > n)
        throw std::invalid_argument("make_hadamard_subspace: m out of range");
    Subspace s;
    s.block_side = block_side;
    s.kind = SubspaceKind::HadamardLowSeq;
    s.basis = Matrix(n, m);
    const auto rows = detail::walsh_rows(block_side);
    const auto pairs = detail::zigzag_pairs(block_side, m);
    const double scale = 1.0 / static_cast<double>(block_side);
    for (std::size_t c = 0; c < m; ++c) {
        const auto [u, v] = pairs[c];
        for (std::size_t r = 0; r < block_side; ++r)
            for (std::size_t cc = 0; cc < block_side; ++cc)
                s.basis(r * block_side + cc, c) = rows[u][r] * rows[v][cc] * scale;
    }
    return s;
}

// File format: header line "rows cols block_side", then rows*cols decimal
// values row-major. Columns are rescaled to unit norm when needed;
// orthonormality is not enforced for custom bases.
inline Subspace load_custom_subspace(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("load_custom_subspace: cannot open " + path);
    std::size_t rows = 0, cols = 0, side = 0;
    if (!(in >> rows >> cols >> side))
        throw ParseError("load_custom_subspace: malformed header in " + path);
    if (rows != side * side)
        throw ParseError("load_custom_subspace: rows != block_side^2 in " + path);
    if (cols == 0 || cols > rows)
        throw ParseError("load_custom_subspace: bad column count in " + path);
    Subspace s;
    s.block_side = side;
    s.kind = SubspaceKind::Custom;
    s.basis = Matrix(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i)
        if (!(in >> s.basis.data[i]))
            throw ParseError("load_custom_subspace: truncated data in " + path);
    for (std::size_t c = 0; c < cols; ++c) {
        double nrm2 = 0.0;
        for (std::size_t r = 0; r < rows; ++r) nrm2 += s.basis(r, c) * s.basis(r, c);
        const double nrm = std::sqrt(nrm2);
        if (nrm == 0.0)
            throw ParseError("load_custom_subspace: zero column " + std::to_string(c));
        if (std::abs(nrm - 1.0) > 1e-12) {
            s.normalized_on_load = true;
            for (std::size_t r = 0; r < rows; ++r) s.basis(r, c) /= nrm;
        }
    }
    return s;
}

} // namespace msd

#endif
