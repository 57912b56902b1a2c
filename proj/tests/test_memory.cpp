#include <gtest/gtest.h>

#include "layeredit/memory.hpp"
#include "layeredit/denoiser.hpp"

using namespace layeredit;

namespace {

LayerRecord make_record(const std::string& label, const Mask& mask, int steps, std::uint64_t seed) {
    LayerRecord r;
    r.label = label;
    r.prompt = embed_prompt(label, 8);
    r.mask = mask;
    for (int t = 0; t <= steps; ++t)
        r.trajectory.push_back(sample_normal_latent(seed, static_cast<std::uint64_t>(t), 4, 6, 6));
    return r;
}

}  // namespace

TEST(LayerMemory, AppendAndRead) {
    LayerMemory mem(5, 4, 6, 6);
    EXPECT_TRUE(mem.empty());
    EXPECT_EQ(mem.append_layer(make_record("sky", Mask::full(6, 6), 5, 1)), 0u);
    EXPECT_EQ(mem.append_layer(make_record("kite", rasterize_mask(Rect{1, 1, 3, 3}, 6, 6), 5, 2)), 1u);
    EXPECT_EQ(mem.latent_at(1, 3), sample_normal_latent(2, 3, 4, 6, 6));
    EXPECT_EQ(mem.record(0).final_latent(), sample_normal_latent(1, 0, 4, 6, 6));
    EXPECT_EQ(mem.masks().size(), 2u);
    EXPECT_EQ(mem.prompts()[1].text, "kite");
}

TEST(LayerMemory, BackgroundMustCoverCanvas) {
    LayerMemory mem(5, 4, 6, 6);
    EXPECT_THROW(mem.append_layer(make_record("sky", rasterize_mask(Rect{0, 0, 2, 2}, 6, 6), 5, 1)), Error);
}

TEST(LayerMemory, ShapeChecks) {
    LayerMemory mem(5, 4, 6, 6);
    EXPECT_THROW(mem.append_layer(make_record("sky", Mask::full(6, 6), 4, 1)), Error);
    mem.append_layer(make_record("sky", Mask::full(6, 6), 5, 1));
    EXPECT_THROW(mem.append_layer(make_record("kite", Mask::full(5, 6), 5, 2)), Error);
    EXPECT_THROW(mem.latent_at(0, 6), Error);
    EXPECT_THROW(mem.latent_at(0, -1), Error);
    EXPECT_THROW(mem.record(1), Error);
}

TEST(LayerMemory, RemoveShiftsDown) {
    LayerMemory mem(3, 4, 6, 6);
    mem.append_layer(make_record("sky", Mask::full(6, 6), 3, 1));
    mem.append_layer(make_record("kite", Mask::full(6, 6), 3, 2));
    mem.append_layer(make_record("bird", Mask::full(6, 6), 3, 3));
    EXPECT_THROW(mem.remove_layer(0), Error);
    mem.remove_layer(1);
    EXPECT_EQ(mem.size(), 2u);
    EXPECT_EQ(mem.record(1).label, "bird");
}

TEST(LayerMemory, SnapshotsAreIndependent) {
    LayerMemory mem(3, 4, 6, 6);
    mem.append_layer(make_record("sky", Mask::full(6, 6), 3, 1));
    LayerMemory snap = mem;
    mem.replace_layer(0, make_record("sea", Mask::full(6, 6), 3, 9));
    EXPECT_EQ(snap.record(0).label, "sky");
    EXPECT_EQ(mem.record(0).label, "sea");
}

TEST(LayerMemory, FootprintGrowsPerRecord) {
    LayerMemory mem(4, 4, 6, 6);
    std::size_t before = mem.memory_footprint();
    auto r = make_record("sky", Mask::full(6, 6), 4, 1);
    std::size_t expected = 5 * 4 * 36 * sizeof(float) + 8 * sizeof(float) + sizeof(std::uint64_t) + sizeof(std::uint64_t);
    EXPECT_EQ(r.size_bytes(), expected);
    mem.append_layer(r);
    EXPECT_EQ(mem.memory_footprint() - before, expected);
}

TEST(LayerRecord, ChecksumSeesEveryField) {
    auto a = make_record("sky", Mask::full(6, 6), 3, 1);
    auto b = a;
    EXPECT_EQ(a.checksum(), b.checksum());
    b.trajectory[2].at(3, 5, 5) += 1.0f;
    EXPECT_NE(a.checksum(), b.checksum());
    b = a;
    b.mask.set(std::size_t{0}, false);
    EXPECT_NE(a.checksum(), b.checksum());
}
