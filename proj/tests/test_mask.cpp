#include <gtest/gtest.h>

#include <vector>

#include "layeredit/mask.hpp"
#include "layeredit/mask_io.hpp"
#include "layeredit/rng.hpp"

using namespace layeredit;

namespace {

// Same-side test against each directed edge of a counter-clockwise triangle.
bool in_triangle(Point a, Point b, Point c, double px, double py) {
    auto side = [&](Point p, Point q) { return (q.x - p.x) * (py - p.y) - (q.y - p.y) * (px - p.x); };
    double s0 = side(a, b), s1 = side(b, c), s2 = side(c, a);
    return (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
}

Mask random_mask(CounterRng& rng, int w, int h) {
    for (;;) {
        int x0 = static_cast<int>(rng.uniform_int(0, w - 1)), x1 = static_cast<int>(rng.uniform_int(0, w - 1));
        int y0 = static_cast<int>(rng.uniform_int(0, h - 1)), y1 = static_cast<int>(rng.uniform_int(0, h - 1));
        Rect r{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
        if (rng.uniform() < 0.5) return rasterize_mask(r, w, h);
        double cx = (r.x0 + r.x1 + 1) / 2.0, cy = (r.y0 + r.y1 + 1) / 2.0;
        try {
            return rasterize_mask(Ellipse{cx, cy, (r.x1 - r.x0 + 1) / 2.0, (r.y1 - r.y0 + 1) / 2.0}, w, h);
        } catch (const Error&) {
        }
    }
}

}  // namespace

TEST(Mask, PaddingStaysClear) {
    Mask m(5, 3);
    Mask inv = ~m;
    EXPECT_EQ(inv.count(), 15u);
    EXPECT_TRUE(inv.all());
    EXPECT_EQ(inv.words()[0] >> 15, 0u);
}

TEST(Mask, SetOperations) {
    Mask a = rasterize_mask(Rect{0, 0, 3, 3}, 8, 8);
    Mask b = rasterize_mask(Rect{2, 2, 5, 5}, 8, 8);
    EXPECT_EQ((a & b).count(), 4u);
    EXPECT_EQ((a | b).count(), 28u);
    EXPECT_EQ((a - b).count(), 12u);
    EXPECT_EQ((a ^ b).count(), 24u);
    EXPECT_TRUE(a.intersects(b));
    EXPECT_THROW(a |= Mask(4, 4), Error);
}

TEST(Mask, RectIsInclusiveAndClamped) {
    Mask m = rasterize_mask(Rect{-3, 2, 20, 2}, 8, 6);
    EXPECT_EQ(m.count(), 8u);
    auto bb = m.bounding_box();
    ASSERT_TRUE(bb);
    EXPECT_EQ(bb->x0, 0);
    EXPECT_EQ(bb->x1, 7);
    EXPECT_EQ(bb->y0, 2);
    EXPECT_EQ(bb->y1, 2);
}

TEST(Mask, DegenerateShapesThrow) {
    auto code = [](const Shape& s) {
        try {
            rasterize_mask(s, 16, 16);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    EXPECT_EQ(code(Rect{20, 20, 30, 30}), ErrorCode::DegenerateMask);
    EXPECT_EQ(code(Polygon{{{0, 0}, {4, 4}, {8, 8}}}), ErrorCode::DegenerateMask);
    EXPECT_EQ(code(Ellipse{4, 4, 0, 3}), ErrorCode::DegenerateMask);
    EXPECT_EQ(code(Polygon{{{1.1, 1.1}, {1.4, 1.1}, {1.1, 1.4}}}), ErrorCode::DegenerateMask);
}

TEST(Mask, TriangleMatchesBruteForce) {
    Point a{1.2, 0.7}, b{14.3, 3.1}, c{6.6, 15.2};
    Mask m = rasterize_mask(Polygon{{a, b, c}}, 16, 16);
    std::size_t n = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            bool want = in_triangle(a, b, c, x + 0.5, y + 0.5);
            EXPECT_EQ(m.test(x, y), want) << x << "," << y;
            n += want;
        }
    EXPECT_EQ(m.count(), n);
}

TEST(Mask, EllipseUsesCellCenters) {
    Mask m = rasterize_mask(Ellipse{8, 8, 4, 2}, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double dx = (x + 0.5 - 8) / 4, dy = (y + 0.5 - 8) / 2;
            EXPECT_EQ(m.test(x, y), dx * dx + dy * dy < 1);
        }
}

TEST(Mask, DownsampleHalfCoverageSets) {
    Mask m(4, 2);
    m.set(0, 0);
    m.set(1, 0);  // 2 of 4 cells in the left block
    m.set(2, 0);  // 1 of 4 in the right block
    Mask d = downsample_mask(m, 2, 1);
    EXPECT_TRUE(d.test(0, 0));
    EXPECT_FALSE(d.test(1, 0));
    EXPECT_THROW(downsample_mask(m, 3, 1), Error);
    EXPECT_EQ(upsample_mask(d, 2), rasterize_mask(Rect{0, 0, 1, 1}, 4, 2));
}

TEST(Partition, SingleLayerIsBackgroundOnly) {
    std::vector<Mask> stack{Mask::full(6, 4)};
    auto p = partition(stack);
    ASSERT_EQ(p.entries.size(), 1u);
    EXPECT_EQ(p.entries[0].owner, 0u);
    EXPECT_TRUE(p.entries[0].region.all());
}

TEST(Partition, RejectsPartialBackground) {
    std::vector<Mask> stack{Mask(4, 4), Mask::full(4, 4)};
    EXPECT_THROW(partition(stack), Error);
}

TEST(Partition, OrderAndOwnership) {
    std::vector<Mask> stack{Mask::full(8, 8), rasterize_mask(Rect{0, 0, 5, 5}, 8, 8),
                            rasterize_mask(Rect{3, 3, 7, 7}, 8, 8)};
    auto p = partition(stack);
    ASSERT_EQ(p.entries.size(), 3u);
    EXPECT_EQ(p.entries[0].owner, 2u);
    EXPECT_EQ(p.entries[1].owner, 1u);
    EXPECT_EQ(p.entries[2].owner, 0u);
    EXPECT_EQ(p.entries[1].region.count(), 36u - 9u);
    EXPECT_EQ(exclusive_region(stack, 1), p.entries[1].region);
    EXPECT_EQ(exclusive_region(stack, 0), p.entries[2].region);
    EXPECT_NO_THROW(p.validate());
}

TEST(Partition, RandomStacksMatchOwnerOracle) {
    CounterRng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        int w = static_cast<int>(rng.uniform_int(8, 64)), h = static_cast<int>(rng.uniform_int(8, 64));
        int layers = static_cast<int>(rng.uniform_int(1, 6));
        std::vector<Mask> stack{Mask::full(w, h)};
        for (int k = 1; k < layers; ++k) stack.push_back(random_mask(rng, w, h));
        auto p = partition(stack);
        Mask uni(w, h);
        for (std::size_t a = 0; a < p.entries.size(); ++a) {
            for (std::size_t b = a + 1; b < p.entries.size(); ++b)
                ASSERT_FALSE(p.entries[a].region.intersects(p.entries[b].region));
            uni |= p.entries[a].region;
        }
        ASSERT_TRUE(uni.all());
        auto owners = p.owner_map();
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                std::size_t want = 0;
                for (std::size_t k = 0; k < stack.size(); ++k)
                    if (stack[k].test(x, y)) want = k;
                ASSERT_EQ(owners[stack[0].index(x, y)], want);
            }
    }
}

TEST(Occlusion, RatioOfSharedCells) {
    std::vector<Mask> objs{rasterize_mask(Rect{0, 0, 3, 3}, 8, 8), rasterize_mask(Rect{2, 0, 5, 3}, 8, 8)};
    EXPECT_DOUBLE_EQ(occlusion_ratio(objs), 8.0 / 24.0);
    std::vector<Mask> empty{Mask(4, 4), Mask(4, 4)};
    try {
        occlusion_ratio(empty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UndefinedRatio);
    }
}

TEST(Background, ComplementOfObjects) {
    std::vector<Mask> objs{rasterize_mask(Rect{0, 0, 1, 1}, 4, 4)};
    EXPECT_EQ(background_region(4, 4, objs).count(), 12u);
    EXPECT_TRUE(background_region(4, 4, {}).all());
}

TEST(MaskIo, RleRoundTrip) {
    Mask m = rasterize_mask(Ellipse{10, 6, 7, 4}, 21, 13);
    auto runs = encode_rle(m);
    EXPECT_EQ(decode_rle(21, 13, runs), m);
    EXPECT_EQ(mask_from_json(mask_to_json(m)), m);
    EXPECT_EQ(encode_rle(Mask::full(3, 1)), (std::vector<std::uint32_t>{0, 3}));
    EXPECT_THROW(decode_rle(3, 1, {1, 1}), Error);
}

TEST(MaskIo, PbmRoundTrip) {
    Mask m = rasterize_mask(Polygon{{{0.5, 0.5}, {10.2, 1.0}, {3.0, 9.7}}}, 11, 10);
    EXPECT_EQ(decode_pbm(encode_pbm(m)), m);
    Mask ascii = decode_pbm("P1\n# comment\n3 2\n1 0 1\n0 1 0\n");
    EXPECT_TRUE(ascii.test(0, 0));
    EXPECT_FALSE(ascii.test(1, 0));
    EXPECT_TRUE(ascii.test(1, 1));
    EXPECT_THROW(decode_pbm("P5\n1 1\n"), Error);
}

TEST(MaskIo, Base64) {
    EXPECT_EQ(base64_encode("hello!?"), "aGVsbG8hPw==");
    EXPECT_EQ(base64_decode("aGVsbG8hPw=="), "hello!?");
}
