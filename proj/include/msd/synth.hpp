#ifndef MSD_SYNTH_HPP
#define MSD_SYNTH_HPP

#include <array>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msd/basis.hpp"
#include "msd/linalg.hpp"
#include "msd/rng.hpp"
#include "msd/solver.hpp"

namespace msd {

// Parameters for one synthetic text-on-texture block. The background is a
// random combination of low-frequency DCT atoms around mid-gray; the text
// is a constant-intensity bitmap-font rendering overlaid per the exact
// selection-mask model.
struct SynthSpec {
    std::size_t block_side = 64;
    std::size_t texture_atoms = 4;   // number of random DCT atoms
    std::size_t atom_start = 1;      // first zigzag atom used (1 skips DC)
    double texture_amplitude = 0.15; // peak per-atom pixel deviation
    std::string glyph_text = "EXT";
    double glyph_intensity = 0.05;
    std::size_t glyph_scale = 3;
    std::uint64_t seed = 0;
};

struct LabeledBlock {
    Vector image;          // block_side^2, [0,1]
    MaskVector truth_mask; // binary glyph support
    Vector background;     // the pre-overlay texture component
};

namespace detail {

// 5x7 bitmap font, uppercase letters and digits. '#' marks an on pixel.
using Glyph = std::array<const char*, 7>;

inline const Glyph* font_glyph(char c) {
    static const std::array<std::pair<char, Glyph>, 37> table = {{
        {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
        {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
        {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
        {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
        {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
        {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
        {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."}},
        {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
        {'I', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"}},
        {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
        {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
        {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
        {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
        {'N', {"#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"}},
        {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
        {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
        {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
        {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
        {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
        {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
        {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
        {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
        {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
        {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
        {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
        {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
        {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
        {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", "#####"}},
        {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
        {'3', {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."}},
        {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
        {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
        {'6', {".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."}},
        {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
        {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
        {'9', {".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."}},
        {' ', {".....", ".....", ".....", ".....", ".....", ".....", "....."}},
    }};
    for (const auto& [ch, g] : table)
        if (ch == c) return &g;
    return nullptr;
}

constexpr std::size_t kGlyphW = 5;
constexpr std::size_t kGlyphH = 7;
constexpr std::size_t kGlyphGap = 1;

// Unscaled pixel footprint of a text string.
inline std::pair<std::size_t, std::size_t> text_extent(const std::string& text) {
    const std::size_t w =
        text.empty() ? 0 : text.size() * kGlyphW + (text.size() - 1) * kGlyphGap;
    return {w, kGlyphH};
}

} // namespace detail

// One synthetic block. Per-seed deterministic: texture coefficients and
// glyph placement come from the same PCG stream.
inline LabeledBlock generate(const SynthSpec& spec) {
    const std::size_t side = spec.block_side;
    const std::size_t n = side * side;
    if (spec.glyph_text.empty())
        throw std::invalid_argument("generate: empty glyph text");
    if (spec.glyph_scale < 1)
        throw std::invalid_argument("generate: glyph scale < 1");
    if (!(spec.glyph_intensity >= 0.0 && spec.glyph_intensity <= 1.0))
        throw std::invalid_argument("generate: glyph intensity outside [0,1]");

    const auto [tw, th] = detail::text_extent(spec.glyph_text);
    const std::size_t gw = tw * spec.glyph_scale;
    const std::size_t gh = th * spec.glyph_scale;
    if (gw > side || gh > side)
        throw std::invalid_argument("generate: text too large for block");

    Pcg32 rng(spec.seed);

    // Texture coefficients are scaled so each atom contributes at most
    // ~texture_amplitude in pixel space (peak DCT atom entry is 2/side).
    Vector background(n, 0.5);
    if (spec.texture_atoms > 0) {
        const Subspace dct =
            make_dct_subspace(side, spec.atom_start + spec.texture_atoms);
        const double coeff_amp =
            spec.texture_amplitude * static_cast<double>(side) / 2.0;
        for (std::size_t a = 0; a < spec.texture_atoms; ++a) {
            const double c = rng.uniform(-coeff_amp, coeff_amp);
            const std::size_t col = spec.atom_start + a;
            for (std::size_t i = 0; i < n; ++i)
                background[i] += c * dct.basis(i, col);
        }
        for (double& v : background) v = std::clamp(v, 0.0, 1.0);
    }

    // Random placement within the block.
    const std::size_t x0 = rng.below(static_cast<std::uint32_t>(side - gw + 1));
    const std::size_t y0 = rng.below(static_cast<std::uint32_t>(side - gh + 1));

    MaskVector truth;
    truth.binary = true;
    truth.w.assign(n, 0.0);
    std::size_t on = 0;
    for (std::size_t ci = 0; ci < spec.glyph_text.size(); ++ci) {
        const detail::Glyph* g = detail::font_glyph(spec.glyph_text[ci]);
        if (!g)
            throw std::invalid_argument(std::string("generate: no glyph for '") +
                                        spec.glyph_text[ci] + "'");
        const std::size_t cx =
            x0 + ci * (detail::kGlyphW + detail::kGlyphGap) * spec.glyph_scale;
        for (std::size_t r = 0; r < detail::kGlyphH; ++r)
            for (std::size_t c = 0; c < detail::kGlyphW; ++c) {
                if ((*g)[r][c] != '#') continue;
                for (std::size_t sy = 0; sy < spec.glyph_scale; ++sy)
                    for (std::size_t sx = 0; sx < spec.glyph_scale; ++sx) {
                        const std::size_t y = y0 + r * spec.glyph_scale + sy;
                        const std::size_t x = cx + c * spec.glyph_scale + sx;
                        if (truth.w[y * side + x] == 0.0) ++on;
                        truth.w[y * side + x] = 1.0;
                    }
            }
    }
    const double coverage = static_cast<double>(on) / static_cast<double>(n);
    if (!(coverage > 0.0 && coverage <= 0.5))
        throw std::invalid_argument("generate: glyph coverage outside (0, 0.5]");

    LabeledBlock block;
    block.background = background;
    block.truth_mask = truth;
    block.image.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        block.image[i] = truth.w[i] == 1.0 ? spec.glyph_intensity : background[i];
    return block;
}

// count blocks from one template; per-block seeds derive from the corpus
// seed so position and texture vary deterministically.
inline std::vector<LabeledBlock> generate_corpus(const SynthSpec& spec_template,
                                                 std::size_t count,
                                                 std::uint64_t seed,
                                                 std::vector<SynthSpec>* specs_out = nullptr) {
    if (count < 1) throw std::invalid_argument("generate_corpus: count < 1");
    Pcg32 rng(seed, 1);
    std::vector<LabeledBlock> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SynthSpec s = spec_template;
        s.seed = (static_cast<std::uint64_t>(rng.next_u32()) << 32) | rng.next_u32();
        out.push_back(generate(s));
        if (specs_out) specs_out->push_back(s);
    }
    return out;
}

} // namespace msd

#endif
