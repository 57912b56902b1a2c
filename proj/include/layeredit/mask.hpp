#ifndef LAYEREDIT_MASK_HPP
#define LAYEREDIT_MASK_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"

namespace layeredit {

/// Inclusive cell rectangle: cells x0..x1, y0..y1.
struct Rect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
    bool empty() const { return x1 < x0 || y1 < y0; }
    bool operator==(const Rect&) const = default;
};

struct Point {
    double x = 0, y = 0;
};

/// Closed polygon in continuous canvas coordinates (cell (x, y) spans [x, x+1) x [y, y+1)).
struct Polygon {
    std::vector<Point> vertices;
};

/// Axis-aligned ellipse in continuous canvas coordinates.
struct Ellipse {
    double cx = 0, cy = 0, rx = 0, ry = 0;
};

using Shape = std::variant<Rect, Polygon, Ellipse>;

/// Binary raster, row-major, packed 64 cells per word. Padding bits past
/// width*height are always zero so word-wise equality and popcount are exact.
class Mask {
public:
    Mask() = default;

    Mask(int width, int height, bool value = false) : width_(width), height_(height) {
        require(width > 0 && height > 0, ErrorCode::InvalidArgument, "mask dimensions must be positive");
        words_.assign((size() + 63) / 64, value ? ~std::uint64_t{0} : 0);
        clear_padding();
    }

    static Mask full(int width, int height) { return Mask(width, height, true); }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }
    bool same_dims(const Mask& o) const { return width_ == o.width_ && height_ == o.height_; }

    bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    bool test(int x, int y) const { return test(index(x, y)); }

    void set(std::size_t i, bool v = true) {
        auto bit = std::uint64_t{1} << (i & 63);
        if (v)
            words_[i >> 6] |= bit;
        else
            words_[i >> 6] &= ~bit;
    }
    void set(int x, int y, bool v = true) { set(index(x, y), v); }

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    bool none() const {
        return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
    }
    bool any() const { return !none(); }
    bool all() const { return count() == size(); }

    Mask& operator|=(const Mask& o) { return combine(o, [](auto a, auto b) { return a | b; }); }
    Mask& operator&=(const Mask& o) { return combine(o, [](auto a, auto b) { return a & b; }); }
    Mask& operator^=(const Mask& o) { return combine(o, [](auto a, auto b) { return a ^ b; }); }
    /// Set difference: clears every cell set in `o`.
    Mask& subtract(const Mask& o) { return combine(o, [](auto a, auto b) { return a & ~b; }); }

    friend Mask operator|(Mask a, const Mask& b) { return a |= b; }
    friend Mask operator&(Mask a, const Mask& b) { return a &= b; }
    friend Mask operator^(Mask a, const Mask& b) { return a ^= b; }
    friend Mask operator-(Mask a, const Mask& b) { return a.subtract(b); }

    Mask operator~() const {
        Mask r = *this;
        for (auto& w : r.words_) w = ~w;
        r.clear_padding();
        return r;
    }

    bool intersects(const Mask& o) const {
        check_dims(o);
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i] & o.words_[i]) return true;
        return false;
    }

    /// Tight bounding box of set cells, or nullopt for an empty mask.
    std::optional<Rect> bounding_box() const {
        Rect r{width_, height_, -1, -1};
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                if (test(x, y)) {
                    r.x0 = std::min(r.x0, x);
                    r.y0 = std::min(r.y0, y);
                    r.x1 = std::max(r.x1, x);
                    r.y1 = std::max(r.y1, y);
                }
        if (r.x1 < 0) return std::nullopt;
        return r;
    }

    /// Mean cell center of set cells; nullopt when empty.
    std::optional<Point> centroid() const {
        double sx = 0, sy = 0;
        std::size_t n = 0;
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                if (test(x, y)) {
                    sx += x + 0.5;
                    sy += y + 0.5;
                    ++n;
                }
        if (n == 0) return std::nullopt;
        return Point{sx / static_cast<double>(n), sy / static_cast<double>(n)};
    }

    std::span<const std::uint64_t> words() const { return words_; }

    bool operator==(const Mask& o) const = default;

    void check_dims(const Mask& o) const {
        if (!same_dims(o))
            fail(ErrorCode::DimensionMismatch, "mask " + std::to_string(width_) + "x" + std::to_string(height_) +
                                                   " vs " + std::to_string(o.width_) + "x" + std::to_string(o.height_));
    }

private:
    template <typename Op>
    Mask& combine(const Mask& o, Op op) {
        check_dims(o);
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] = op(words_[i], o.words_[i]);
        clear_padding();
        return *this;
    }

    void clear_padding() {
        auto tail = size() & 63;
        if (tail != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << tail) - 1;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint64_t> words_;
};

namespace detail {

inline bool point_in_polygon(const std::vector<Point>& poly, double px, double py) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > py) != (b.y > py)) {
            double xcross = (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x;
            if (px < xcross) inside = !inside;
        }
    }
    return inside;
}

inline double polygon_area(const std::vector<Point>& poly) {
    double a = 0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        a += (poly[j].x + poly[i].x) * (poly[j].y - poly[i].y);
    return std::abs(a) / 2;
}

}  // namespace detail

/// Rasterizes a shape onto a width x height canvas. Rectangles are clamped to
/// the canvas; polygons and ellipses set every cell whose center lies inside.
inline Mask rasterize_mask(const Shape& shape, int width, int height) {
    Mask m(width, height);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Rect>) {
                Rect c{std::max(s.x0, 0), std::max(s.y0, 0), std::min(s.x1, width - 1), std::min(s.y1, height - 1)};
                require(!c.empty(), ErrorCode::DegenerateMask, "rectangle has zero area on the canvas");
                for (int y = c.y0; y <= c.y1; ++y)
                    for (int x = c.x0; x <= c.x1; ++x) m.set(x, y);
            } else if constexpr (std::is_same_v<T, Polygon>) {
                require(s.vertices.size() >= 3 && detail::polygon_area(s.vertices) > 0, ErrorCode::DegenerateMask,
                        "polygon has zero area");
                for (int y = 0; y < height; ++y)
                    for (int x = 0; x < width; ++x)
                        if (detail::point_in_polygon(s.vertices, x + 0.5, y + 0.5)) m.set(x, y);
            } else {
                require(s.rx > 0 && s.ry > 0, ErrorCode::DegenerateMask, "ellipse has zero area");
                for (int y = 0; y < height; ++y)
                    for (int x = 0; x < width; ++x) {
                        double dx = (x + 0.5 - s.cx) / s.rx;
                        double dy = (y + 0.5 - s.cy) / s.ry;
                        if (dx * dx + dy * dy < 1.0) m.set(x, y);
                    }
            }
        },
        shape);
    require(m.any(), ErrorCode::DegenerateMask, "shape covers no cell centers");
    return m;
}

/// Maps an image-resolution mask to latent resolution: a latent cell is set
/// when at least half of the image cells it covers are set.
inline Mask downsample_mask(const Mask& m, int target_width, int target_height) {
    require(target_width > 0 && target_height > 0, ErrorCode::InvalidArgument, "target dims must be positive");
    if (m.width() % target_width != 0 || m.height() % target_height != 0)
        fail(ErrorCode::DimensionMismatch, "image dims " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                                               " are not an integer multiple of " + std::to_string(target_width) + "x" +
                                               std::to_string(target_height));
    int sx = m.width() / target_width;
    int sy = m.height() / target_height;
    std::size_t block = static_cast<std::size_t>(sx) * static_cast<std::size_t>(sy);
    Mask out(target_width, target_height);
    for (int ty = 0; ty < target_height; ++ty)
        for (int tx = 0; tx < target_width; ++tx) {
            std::size_t n = 0;
            for (int y = ty * sy; y < (ty + 1) * sy; ++y)
                for (int x = tx * sx; x < (tx + 1) * sx; ++x) n += m.test(x, y);
            if (2 * n >= block) out.set(tx, ty);
        }
    return out;
}

/// Nearest-neighbour upscale by an integer factor (latent -> image resolution).
inline Mask upsample_mask(const Mask& m, int scale) {
    require(scale >= 1, ErrorCode::InvalidArgument, "scale must be >= 1");
    Mask out(m.width() * scale, m.height() * scale);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (m.test(x / scale, y / scale)) out.set(x, y);
    return out;
}

namespace detail {
inline void check_stack(std::span<const Mask> masks) {
    for (const auto& m : masks) masks.front().check_dims(m);
}
}  // namespace detail

/// Visible part of layer j in the stack m_0..m_i: m_j with every cell owned by
/// a later mask cleared.
inline Mask exclusive_region(std::span<const Mask> masks, std::size_t j) {
    require(!masks.empty() && j < masks.size(), ErrorCode::OutOfRange, "layer index out of range");
    detail::check_stack(masks);
    Mask r = masks[j];
    for (std::size_t l = j + 1; l < masks.size(); ++l) r.subtract(masks[l]);
    return r;
}

/// Complement of the union of all object masks; all-ones when there are none.
inline Mask background_region(int width, int height, std::span<const Mask> objects) {
    Mask covered(width, height);
    for (const auto& m : objects) covered |= m;
    return ~covered;
}

/// Disjoint cover of the grid: one region per layer, each owned by the
/// highest-index mask covering it, background (owner 0) taking the rest.
struct RegionPartition {
    struct Entry {
        std::size_t owner = 0;
        Mask region;
        bool operator==(const Entry&) const = default;
    };

    std::vector<Entry> entries;
    std::size_t current_index = 0;

    int width() const { return entries.front().region.width(); }
    int height() const { return entries.front().region.height(); }

    /// Owner per cell (row-major). Throws if a cell is uncovered or covered twice.
    std::vector<std::size_t> owner_map() const {
        const auto& first = entries.front().region;
        std::vector<std::size_t> owner(first.size(), SIZE_MAX);
        for (const auto& e : entries) {
            first.check_dims(e.region);
            for (std::size_t c = 0; c < owner.size(); ++c)
                if (e.region.test(c)) {
                    require(owner[c] == SIZE_MAX, ErrorCode::InvalidArgument, "partition regions overlap");
                    owner[c] = e.owner;
                }
        }
        for (auto o : owner) require(o != SIZE_MAX, ErrorCode::InvalidArgument, "partition leaves a cell uncovered");
        return owner;
    }

    const Entry* find(std::size_t owner) const {
        for (const auto& e : entries)
            if (e.owner == owner) return &e;
        return nullptr;
    }

    /// Checks disjointness, full cover and owner uniqueness.
    void validate() const {
        require(!entries.empty(), ErrorCode::InvalidArgument, "empty partition");
        std::vector<bool> seen(current_index + 1, false);
        for (const auto& e : entries) {
            require(e.owner <= current_index && !seen[e.owner], ErrorCode::InvalidArgument,
                    "partition owner indices must be unique and <= current index");
            seen[e.owner] = true;
        }
        (void)owner_map();
    }

    bool operator==(const RegionPartition&) const = default;
};

/// Builds the partition for a stack m_0..m_i (m_0 all-ones). Entry order:
/// current layer i, then i-1 down to 1, background last.
inline RegionPartition partition(std::span<const Mask> masks) {
    require(!masks.empty(), ErrorCode::InvalidArgument, "partition needs at least the background mask");
    require(masks.front().all(), ErrorCode::InvalidArgument, "background mask m_0 must be all ones");
    detail::check_stack(masks);
    RegionPartition p;
    std::size_t i = masks.size() - 1;
    p.current_index = i;
    if (i == 0) {
        p.entries.push_back({0, masks[0]});
        return p;
    }
    Mask covered = masks[i];
    p.entries.push_back({i, masks[i]});
    for (std::size_t j = i - 1; j >= 1; --j) {
        p.entries.push_back({j, masks[j] - covered});
        covered |= masks[j];
    }
    p.entries.push_back({0, ~covered});
    return p;
}

/// Single-region partition: every cell routed to owner 0.
inline RegionPartition single_region_partition(int width, int height) {
    RegionPartition p;
    p.entries.push_back({0, Mask::full(width, height)});
    return p;
}

/// Fraction of covered cells that belong to two or more object masks.
inline double occlusion_ratio(std::span<const Mask> objects) {
    require(objects.size() >= 2, ErrorCode::InvalidArgument, "occlusion ratio needs at least two masks");
    detail::check_stack(objects);
    Mask once(objects[0].width(), objects[0].height());
    Mask twice = once;
    for (const auto& m : objects) {
        twice |= once & m;
        once |= m;
    }
    std::size_t covered = once.count();
    require(covered > 0, ErrorCode::UndefinedRatio, "all masks are empty");
    return static_cast<double>(twice.count()) / static_cast<double>(covered);
}

}  // namespace layeredit

#endif
