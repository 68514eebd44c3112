#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wpad/errors.hpp"
#include "wpad/tensor.hpp"

namespace wpad {

// Minimal binary PGM (P5) reader/writer, 8-bit samples only.

namespace detail {

// Reads the next header token, skipping whitespace and '#' comment lines.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            if (!tok.empty()) {
                in.unget();
                return tok;
            }
        } else {
            tok.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    return tok;
}

}  // namespace detail

struct PgmImage {
    std::size_t width = 0, height = 0;
    unsigned maxval = 255;
    std::vector<std::uint8_t> pixels;  // row-major
};

inline PgmImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') {
        throw DataError(path.string() + ": not a binary PGM (P5) file");
    }
    const std::string ws = detail::pgm_token(in);
    const std::string hs = detail::pgm_token(in);
    const std::string ms = detail::pgm_token(in);
    std::size_t w = 0, h = 0;
    unsigned long mv = 0;
    try {
        w = std::stoul(ws);
        h = std::stoul(hs);
        mv = std::stoul(ms);
    } catch (const std::exception&) {
        throw DataError(path.string() + ": malformed PGM header");
    }
    if (w == 0 || h == 0) throw DataError(path.string() + ": zero PGM dimensions");
    if (mv == 0 || mv > 255) {
        throw DataError(path.string() + ": unsupported maxval " + std::to_string(mv));
    }
    in.get();  // single whitespace byte after maxval

    PgmImage img;
    img.width = w;
    img.height = h;
    img.maxval = static_cast<unsigned>(mv);
    img.pixels.resize(w * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
    if (static_cast<std::size_t>(in.gcount()) != w * h) {
        throw DataError(path.string() + ": truncated PGM payload");
    }
    return img;
}

// Decodes to a rank-2 tensor scaled to [0,1].
template <typename T>
Tensor<T> pgm_to_tensor(const PgmImage& img) {
    Tensor<T> t({img.height, img.width});
    const T inv = T(1) / static_cast<T>(img.maxval);
    auto dst = t.data();
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        dst[i] = static_cast<T>(img.pixels[i]) * inv;
    }
    return t;
}

// Writes a rank-2 tensor as an 8-bit PGM; values are clamped to [0,1].
template <typename T>
void write_pgm(const std::filesystem::path& path, const Tensor<T>& img) {
    if (img.rank() != 2) {
        throw ShapeError("write_pgm: expected rank-2 image, got " + shape_str(img.shape()));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << img.dim(1) << " " << img.dim(0) << "\n255\n";
    std::vector<std::uint8_t> bytes(img.size());
    auto src = img.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        double v = static_cast<double>(src[i]);
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        bytes[i] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace wpad
