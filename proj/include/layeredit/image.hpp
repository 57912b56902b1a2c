#ifndef LAYEREDIT_IMAGE_HPP
#define LAYEREDIT_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "mask.hpp"
#include "mask_io.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace layeredit {

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0) {
        require(w > 0 && h > 0, ErrorCode::InvalidArgument, "image dims must be positive");
    }

    std::uint8_t& at(int x, int y, int c) {
        return rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                   static_cast<std::size_t>(c)];
    }
    std::uint8_t at(int x, int y, int c) const {
        return rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                   static_cast<std::size_t>(c)];
    }

    bool operator==(const RgbImage&) const = default;
};

/// Maps a latent value in [-1, 1] to 0..255, rounding half up.
inline std::uint8_t latent_to_byte(float v) {
    double u = std::clamp((static_cast<double>(v) + 1.0) / 2.0, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(u * 255.0 + 0.5));
}

/// Fixed affine decode: channels 0-2 to RGB, nearest-neighbour upscale.
inline RgbImage decode_latent(const LatentTensor& z, int scale = 8) {
    require(z.channels() >= 3, ErrorCode::InvalidArgument, "decode needs at least 3 latent channels");
    require(scale >= 1, ErrorCode::InvalidArgument, "decode scale must be >= 1");
    RgbImage img(z.width() * scale, z.height() * scale);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = latent_to_byte(z.at(c, y / scale, x / scale));
    return img;
}

/// Binary PPM (P6).
inline std::string encode_ppm(const RgbImage& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    return out;
}

inline RgbImage decode_ppm(std::string_view data) {
    require(data.size() >= 2 && data[0] == 'P' && data[1] == '6', ErrorCode::Format, "not a binary PPM image");
    std::size_t pos = 2;
    int w = detail::read_pnm_int(data, pos);
    int h = detail::read_pnm_int(data, pos);
    int maxval = detail::read_pnm_int(data, pos);
    require(maxval == 255, ErrorCode::Format, "only 8-bit PPM is supported");
    ++pos;
    RgbImage img(w, h);
    require(data.size() >= pos + img.rgb.size(), ErrorCode::Format, "truncated PPM");
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(pos), img.rgb.size(), img.rgb.begin());
    return img;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Content id of an image: FNV-1a over dims and pixels.
inline std::string image_checksum(const RgbImage& img) {
    std::uint64_t h = fnv1a(std::to_string(img.width) + "x" + std::to_string(img.height));
    return hex64(fnv1a(std::span(img.rgb.data(), img.rgb.size()), h));
}

/// Bilinear resize with half-pixel centers; results rounded half up.
inline RgbImage resize_bilinear(const RgbImage& src, int out_w, int out_h) {
    RgbImage out(out_w, out_h);
    double sx = static_cast<double>(src.width) / out_w;
    double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        int y0 = static_cast<int>(std::floor(fy));
        int y1 = std::min(y0 + 1, src.height - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            int x0 = static_cast<int>(std::floor(fx));
            int x1 = std::min(x0 + 1, src.width - 1);
            double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
                double bot = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
                double v = top * (1 - wy) + bot * wy;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

inline RgbImage crop(const RgbImage& src, const Rect& r) {
    require(!r.empty() && r.x0 >= 0 && r.y0 >= 0 && r.x1 < src.width && r.y1 < src.height, ErrorCode::OutOfRange,
            "crop rectangle outside image");
    RgbImage out(r.width(), r.height());
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = src.at(r.x0 + x, r.y0 + y, c);
    return out;
}

}  // namespace layeredit

#endif
