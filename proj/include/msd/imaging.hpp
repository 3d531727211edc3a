#ifndef MSD_IMAGING_HPP
#define MSD_IMAGING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "msd/error.hpp"
#include "msd/linalg.hpp"
#include "msd/solver.hpp"

namespace msd {

// Grayscale image with intensities in [0,1], row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    Vector pixels;

    GrayImage() = default;
    GrayImage(std::size_t w, std::size_t h, double fill = 0.0)
        : width(w), height(h), pixels(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

struct BlockGrid {
    std::size_t block_side = 0;
    std::size_t blocks_x = 0;
    std::size_t blocks_y = 0;
    std::vector<Vector> blocks;
    std::size_t pad_right = 0;
    std::size_t pad_bottom = 0;
    std::size_t orig_width = 0;
    std::size_t orig_height = 0;
};

namespace detail {

inline std::uint8_t quantize8(double v) {
    // round-half-up onto 0..255
    const double q = std::floor(v * 255.0 + 0.5);
    return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return tail == suf;
}

// Skips PGM whitespace and '#' comment lines.
inline int pgm_token(std::istream& in) {
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = in.get();
        c = in.get();
    }
    if (c == EOF) throw ParseError("pgm: unexpected end of file");
    in.unget();
    int v = 0;
    if (!(in >> v)) throw ParseError("pgm: bad integer token");
    return v;
}

inline GrayImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw ParseError("pgm: unsupported magic in " + path);
    const bool binary = m1 == '5';
    const int w = pgm_token(in);
    const int h = pgm_token(in);
    const int maxval = pgm_token(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError("pgm: bad header in " + path);
    GrayImage img(static_cast<std::size_t>(w), static_cast<std::size_t>(h));
    if (binary) {
        in.get(); // single whitespace after maxval
        std::vector<std::uint8_t> raw(img.pixels.size());
        in.read(reinterpret_cast<char*>(raw.data()),
                static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size()))
            throw ParseError("pgm: truncated pixel data in " + path);
        for (std::size_t i = 0; i < raw.size(); ++i)
            img.pixels[i] = raw[i] / static_cast<double>(maxval);
    } else {
        for (double& p : img.pixels) p = pgm_token(in) / static_cast<double>(maxval);
    }
    return img;
}

inline void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.pixels.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize8(img.pixels[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failure on " + path);
}

inline GrayImage load_png(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open " + path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("png: allocation failure");
    }
    std::vector<std::uint8_t> buf;
    std::vector<png_bytep> rowptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("png: decode failure in " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    const std::size_t w = png_get_image_width(png, info);
    const std::size_t h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const std::size_t channels = color == PNG_COLOR_TYPE_RGB ? 3 : 1;
    if (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw ParseError("png: unsupported color type in " + path);
    }
    buf.resize(w * h * channels);
    rowptrs.resize(h);
    for (std::size_t y = 0; y < h; ++y) rowptrs[y] = &buf[y * w * channels];
    png_read_image(png, rowptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);

    GrayImage img(w, h);
    for (std::size_t i = 0; i < w * h; ++i) {
        if (channels == 1) {
            img.pixels[i] = buf[i] / 255.0;
        } else {
            // Rec. 601 luma
            img.pixels[i] = (0.299 * buf[3 * i] + 0.587 * buf[3 * i + 1] +
                             0.114 * buf[3 * i + 2]) /
                            255.0;
        }
    }
    return img;
}

inline void save_png(const GrayImage& img, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write " + path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png: allocation failure");
    }
    std::vector<std::uint8_t> raw(img.pixels.size());
    std::vector<png_bytep> rowptrs(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("png: encode failure on " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize8(img.pixels[i]);
    for (std::size_t y = 0; y < img.height; ++y)
        rowptrs[y] = &raw[y * img.width];
    png_set_rows(png, info, rowptrs.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace detail

// Loads PGM (P2/P5) or PNG (8-bit grayscale / RGB), dispatching on the
// file's magic bytes. Color converts via Rec. 601 luma.
inline GrayImage load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path);
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    probe.close();
    if (magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5'))
        return detail::load_pgm(path);
    if (magic[0] == 0x89 && magic[1] == 'P')
        return detail::load_png(path);
    throw ParseError("unsupported image format: " + path);
}

// Writes the image; format chosen by extension (.png -> PNG, else PGM P5).
// Binary masks map 1 -> 255; relaxed values quantize round-half-up.
inline void save_mask(const GrayImage& img, const std::string& path) {
    if (detail::has_suffix(path, ".png"))
        detail::save_png(img, path);
    else
        detail::save_pgm(img, path);
}

// Pads right/bottom by edge replication up to multiples of block_side, then
// cuts row-major blocks, each flattened row-major.
inline BlockGrid tile(const GrayImage& img, std::size_t block_side) {
    if (block_side < 2) throw std::invalid_argument("tile: block_side < 2");
    BlockGrid g;
    g.block_side = block_side;
    g.orig_width = img.width;
    g.orig_height = img.height;
    g.blocks_x = (img.width + block_side - 1) / block_side;
    g.blocks_y = (img.height + block_side - 1) / block_side;
    g.pad_right = g.blocks_x * block_side - img.width;
    g.pad_bottom = g.blocks_y * block_side - img.height;
    g.blocks.reserve(g.blocks_x * g.blocks_y);
    for (std::size_t by = 0; by < g.blocks_y; ++by)
        for (std::size_t bx = 0; bx < g.blocks_x; ++bx) {
            Vector block(block_side * block_side);
            for (std::size_t r = 0; r < block_side; ++r)
                for (std::size_t c = 0; c < block_side; ++c) {
                    const std::size_t y =
                        std::min(by * block_side + r, img.height - 1);
                    const std::size_t x =
                        std::min(bx * block_side + c, img.width - 1);
                    block[r * block_side + c] = img.at(x, y);
                }
            g.blocks.push_back(std::move(block));
        }
    return g;
}

// Stitches per-block masks back into a full-size image, cropping padding.
inline GrayImage reassemble(const BlockGrid& grid, const std::vector<MaskVector>& masks) {
    if (masks.size() != grid.blocks.size())
        throw std::invalid_argument("reassemble: mask count mismatch");
    GrayImage img(grid.orig_width, grid.orig_height);
    const std::size_t s = grid.block_side;
    for (std::size_t by = 0; by < grid.blocks_y; ++by)
        for (std::size_t bx = 0; bx < grid.blocks_x; ++bx) {
            const auto& m = masks[by * grid.blocks_x + bx];
            if (m.w.size() != s * s)
                throw std::invalid_argument("reassemble: mask length mismatch");
            for (std::size_t r = 0; r < s; ++r) {
                const std::size_t y = by * s + r;
                if (y >= img.height) break;
                for (std::size_t c = 0; c < s; ++c) {
                    const std::size_t x = bx * s + c;
                    if (x >= img.width) break;
                    img.at(x, y) = m.w[r * s + c];
                }
            }
        }
    return img;
}

} // namespace msd

#endif
