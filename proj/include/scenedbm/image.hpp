#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenedbm/linalg.hpp"

namespace scenedbm {

// 8-bit raster image, 1 (gray) or 3 (RGB) channels, row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> data;

    std::uint8_t at(int x, int y, int c = 0) const {
        return data[static_cast<std::size_t>(y * width + x) * channels + c];
    }
};

struct LabPixel {
    double l = 0.0, a = 0.0, b = 0.0;
};

// CIELAB image, one triple per pixel, row-major.
struct LabImage {
    int width = 0;
    int height = 0;
    std::vector<LabPixel> data;

    const LabPixel& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    LabPixel& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline double srgb_to_linear(double u) {
    return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace detail

// sRGB (D65) -> CIELAB for one 8-bit triple.
inline LabPixel rgb_to_lab_pixel(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = detail::srgb_to_linear(r8 / 255.0);
    const double g = detail::srgb_to_linear(g8 / 255.0);
    const double b = detail::srgb_to_linear(b8 / 255.0);

    // sRGB D65 matrix
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    // D65 reference white
    const double fx = detail::lab_f(x / 0.95047);
    const double fy = detail::lab_f(y / 1.0);
    const double fz = detail::lab_f(z / 1.08883);

    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Single-channel input is replicated to gray before conversion.
inline LabImage rgb_to_lab(const Image& img) {
    require(img.channels == 1 || img.channels == 3, "rgb_to_lab: 1 or 3 channels expected");
    LabImage out;
    out.width = img.width;
    out.height = img.height;
    out.data.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::uint8_t r, g, b;
            if (img.channels == 3) {
                r = img.at(x, y, 0);
                g = img.at(x, y, 1);
                b = img.at(x, y, 2);
            } else {
                r = g = b = img.at(x, y, 0);
            }
            out.at(x, y) = rgb_to_lab_pixel(r, g, b);
        }
    }
    return out;
}

// Bilinear resize, channel-wise.
inline Image resize_bilinear(const Image& img, int new_w, int new_h) {
    require(new_w >= 1 && new_h >= 1, "resize: target dims must be positive");
    Image out;
    out.width = new_w;
    out.height = new_h;
    out.channels = img.channels;
    out.data.resize(static_cast<std::size_t>(new_w) * new_h * img.channels);
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const double fy = std::min((y + 0.5) * sy - 0.5, img.height - 1.0);
        const int y0 = std::max(0, static_cast<int>(std::floor(fy)));
        const int y1 = std::min(img.height - 1, y0 + 1);
        const double wy = std::max(0.0, fy - y0);
        for (int x = 0; x < new_w; ++x) {
            const double fx = std::min((x + 0.5) * sx - 0.5, img.width - 1.0);
            const int x0 = std::max(0, static_cast<int>(std::floor(fx)));
            const int x1 = std::min(img.width - 1, x0 + 1);
            const double wx = std::max(0.0, fx - x0);
            for (int c = 0; c < img.channels; ++c) {
                const double v00 = img.at(x0, y0, c), v10 = img.at(x1, y0, c);
                const double v01 = img.at(x0, y1, c), v11 = img.at(x1, y1, c);
                const double v = (1 - wy) * ((1 - wx) * v00 + wx * v10) +
                                 wy * ((1 - wx) * v01 + wx * v11);
                out.data[(static_cast<std::size_t>(y) * new_w + x) * img.channels + c] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

namespace pnm {

inline int read_pnm_int(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("pnm: unexpected end of header");
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("pnm: malformed header");
    return v;
}

}  // namespace pnm

// Binary PGM (P5) / PPM (P6), 8-bit, maxval 255.
inline Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path);
    char p, n;
    in.get(p);
    in.get(n);
    if (p != 'P' || (n != '5' && n != '6'))
        throw std::runtime_error("unsupported image format (want P5/P6): " + path);
    Image img;
    img.channels = (n == '6') ? 3 : 1;
    img.width = pnm::read_pnm_int(in);
    img.height = pnm::read_pnm_int(in);
    const int maxval = pnm::read_pnm_int(in);
    if (maxval != 255) throw std::runtime_error("pnm: maxval must be 255: " + path);
    if (img.width <= 0 || img.height <= 0) throw std::runtime_error("pnm: bad dimensions: " + path);
    const std::size_t count = static_cast<std::size_t>(img.width) * img.height * img.channels;
    img.data.resize(count);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw std::runtime_error("pnm: truncated pixel data: " + path);
    return img;
}

inline void write_pnm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << (img.channels == 3 ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw std::runtime_error("pnm: write failed: " + path);
}

}  // namespace scenedbm
