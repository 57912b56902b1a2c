#ifndef LAYEREDIT_MASK_IO_HPP
#define LAYEREDIT_MASK_IO_HPP

#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "mask.hpp"

namespace layeredit {

/// Run lengths over the row-major raster, alternating unset/set and always
/// starting with an unset run (possibly zero-length).
inline std::vector<std::uint32_t> encode_rle(const Mask& m) {
    std::vector<std::uint32_t> runs;
    bool cur = false;
    std::uint32_t len = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.test(i) != cur) {
            runs.push_back(len);
            cur = !cur;
            len = 0;
        }
        ++len;
    }
    runs.push_back(len);
    return runs;
}

inline Mask decode_rle(int width, int height, const std::vector<std::uint32_t>& runs) {
    Mask m(width, height);
    std::size_t pos = 0;
    bool cur = false;
    for (auto r : runs) {
        require(pos + r <= m.size(), ErrorCode::Format, "RLE runs exceed mask size");
        if (cur)
            for (std::size_t i = pos; i < pos + r; ++i) m.set(i);
        pos += r;
        cur = !cur;
    }
    require(pos == m.size(), ErrorCode::Format,
            "RLE runs cover " + std::to_string(pos) + " cells, expected " + std::to_string(m.size()));
    return m;
}

inline nlohmann::json mask_to_json(const Mask& m) {
    return {{"width", m.width()}, {"height", m.height()}, {"rle", encode_rle(m)}};
}

inline Mask mask_from_json(const nlohmann::json& j) {
    try {
        return decode_rle(j.at("width").get<int>(), j.at("height").get<int>(),
                          j.at("rle").get<std::vector<std::uint32_t>>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("mask json: ") + e.what());
    }
}

/// Binary PBM (P4); set cells are written as 1 (black).
inline std::string encode_pbm(const Mask& m) {
    std::string out = "P4\n" + std::to_string(m.width()) + " " + std::to_string(m.height()) + "\n";
    std::size_t row_bytes = (static_cast<std::size_t>(m.width()) + 7) / 8;
    for (int y = 0; y < m.height(); ++y) {
        std::string row(row_bytes, '\0');
        for (int x = 0; x < m.width(); ++x)
            if (m.test(x, y)) row[static_cast<std::size_t>(x / 8)] |= static_cast<char>(0x80 >> (x % 8));
        out += row;
    }
    return out;
}

namespace detail {
inline void skip_pnm_space(std::string_view s, std::size_t& pos) {
    while (pos < s.size()) {
        if (s[pos] == '#') {
            while (pos < s.size() && s[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(s[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
}

inline int read_pnm_int(std::string_view s, std::size_t& pos) {
    skip_pnm_space(s, pos);
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    require(pos > start, ErrorCode::Format, "expected integer in PNM header");
    return std::stoi(std::string(s.substr(start, pos - start)));
}
}  // namespace detail

/// Decodes P4 (binary) or P1 (ascii) PBM.
inline Mask decode_pbm(std::string_view data) {
    require(data.size() >= 2 && data[0] == 'P' && (data[1] == '4' || data[1] == '1'), ErrorCode::Format,
            "not a PBM image");
    bool binary = data[1] == '4';
    std::size_t pos = 2;
    int w = detail::read_pnm_int(data, pos);
    int h = detail::read_pnm_int(data, pos);
    Mask m(w, h);
    if (binary) {
        ++pos;  // single whitespace after header
        std::size_t row_bytes = (static_cast<std::size_t>(w) + 7) / 8;
        require(data.size() >= pos + row_bytes * static_cast<std::size_t>(h), ErrorCode::Format, "truncated PBM");
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto byte = static_cast<unsigned char>(data[pos + static_cast<std::size_t>(y) * row_bytes +
                                                            static_cast<std::size_t>(x / 8)]);
                if (byte & (0x80 >> (x % 8))) m.set(x, y);
            }
    } else {
        for (std::size_t i = 0; i < m.size(); ++i) {
            detail::skip_pnm_space(data, pos);
            require(pos < data.size() && (data[pos] == '0' || data[pos] == '1'), ErrorCode::Format, "bad P1 pixel");
            if (data[pos] == '1') m.set(i);
            ++pos;
        }
    }
    return m;
}

inline std::string base64_decode(std::string_view in) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+' || c == '-') return 62;
        if (c == '/' || c == '_') return 63;
        return -1;
    };
    std::string out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : in) {
        if (c == '=' || std::isspace(static_cast<unsigned char>(c))) continue;
        int v = value(c);
        require(v >= 0, ErrorCode::Format, "invalid base64 character");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

inline std::string base64_encode(std::string_view in) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        std::uint32_t n = (static_cast<unsigned char>(in[i]) << 16) | (static_cast<unsigned char>(in[i + 1]) << 8) |
                          static_cast<unsigned char>(in[i + 2]);
        for (int k = 18; k >= 0; k -= 6) out.push_back(kAlphabet[(n >> k) & 63]);
    }
    if (i < in.size()) {
        std::uint32_t n = static_cast<unsigned char>(in[i]) << 16;
        if (i + 1 < in.size()) n |= static_cast<unsigned char>(in[i + 1]) << 8;
        out.push_back(kAlphabet[(n >> 18) & 63]);
        out.push_back(kAlphabet[(n >> 12) & 63]);
        out.push_back(i + 1 < in.size() ? kAlphabet[(n >> 6) & 63] : '=');
        out.push_back('=');
    }
    return out;
}

}  // namespace layeredit

#endif
