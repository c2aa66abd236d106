// Minimal PNG writer: 8-bit RGB, zlib stream with stored (uncompressed)
// deflate blocks. Output bytes are a deterministic function of the pixels.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "sslab/common.hpp"
#include "sslab/image.hpp"

namespace sslab {
namespace detail {

inline std::uint32_t crc32_png(const unsigned char* data, size_t len, std::uint32_t crc = 0xffffffffu) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t n = 0; n < 256; ++n) {
            std::uint32_t c = n;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[n] = c;
        }
        return t;
    }();
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

inline void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void png_chunk(std::vector<unsigned char>& out, const char type[4],
                      const std::vector<unsigned char>& payload) {
    put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
    const size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32_be(out, crc32_png(out.data() + crc_start, out.size() - crc_start) ^ 0xffffffffu);
}

// zlib wrapper around stored deflate blocks (max 65535 bytes each).
inline std::vector<unsigned char> zlib_stored(const std::vector<unsigned char>& raw) {
    std::vector<unsigned char> z;
    z.push_back(0x78);  // CMF: deflate, 32K window
    z.push_back(0x01);  // FLG: no dict, fastest
    size_t pos = 0;
    do {
        const size_t n = std::min<size_t>(raw.size() - pos, 65535);
        const bool last = pos + n == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<unsigned char>(n & 0xff));
        z.push_back(static_cast<unsigned char>(n >> 8));
        z.push_back(static_cast<unsigned char>(~n & 0xff));
        z.push_back(static_cast<unsigned char>((~n >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + pos, raw.begin() + pos + n);
        pos += n;
    } while (pos < raw.size());
    std::uint32_t a = 1, b = 0;
    for (const unsigned char c : raw) {
        a = (a + c) % 65521;
        b = (b + a) % 65521;
    }
    put_u32_be(z, (b << 16) | a);
    return z;
}

}  // namespace detail

// Encodes an RGB byte buffer (row-major, 3 bytes per pixel) as PNG.
inline std::vector<unsigned char> encode_png_rgb(const std::vector<unsigned char>& rgb, int w, int h) {
    if (static_cast<size_t>(w) * h * 3 != rgb.size()) throw ContractViolation("encode_png_rgb: size mismatch");
    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<unsigned char> ihdr;
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(w));
    detail::put_u32_be(ihdr, static_cast<std::uint32_t>(h));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolor RGB
    detail::png_chunk(out, "IHDR", ihdr);

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * 3));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), rgb.begin() + static_cast<size_t>(y) * w * 3,
                   rgb.begin() + static_cast<size_t>(y + 1) * w * 3);
    }
    detail::png_chunk(out, "IDAT", detail::zlib_stored(raw));
    detail::png_chunk(out, "IEND", {});
    return out;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
    std::vector<unsigned char> rgb(static_cast<size_t>(img.w) * img.h * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                const float v = img.c == 3 ? img.at(y, x, ch) : img.at(y, x, 0);
                rgb[(static_cast<size_t>(y) * img.w + x) * 3 + ch] =
                    static_cast<unsigned char>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
            }
    const auto bytes = encode_png_rgb(rgb, img.w, img.h);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace sslab
