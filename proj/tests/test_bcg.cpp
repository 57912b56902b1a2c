#include <gtest/gtest.h>

#include "layeredit/bcg.hpp"

using namespace layeredit;

namespace {

constexpr int kSide = 6;

DenoiserConfig config(int steps = 6) {
    DenoiserConfig c;
    c.blocks = 2;
    c.d_model = 8;
    c.heads = 2;
    c.steps = steps;
    return c;
}

LayerMemory background(const Denoiser& den) {
    int steps = den.config().steps;
    LayerMemory mem(steps, 4, kSide, kSide);
    LayerRecord r;
    r.label = "a sandy beach";
    r.prompt = embed_prompt(r.label, 8);
    r.mask = Mask::full(kSide, kSide);
    r.trajectory.resize(static_cast<std::size_t>(steps) + 1);
    r.trajectory[static_cast<std::size_t>(steps)] = sample_init_latent(0, 0, 4, kSide, kSide);
    auto part = single_region_partition(kSide, kSide);
    for (int t = steps; t >= 1; --t)
        r.trajectory[static_cast<std::size_t>(t - 1)] = scheduler_step(
            r.trajectory[static_cast<std::size_t>(t)],
            den.predict(r.trajectory[static_cast<std::size_t>(t)], t, part, std::span(&r.prompt, 1)), t, steps);
    mem.append_layer(std::move(r));
    return mem;
}

}  // namespace

TEST(Blend, InsideFreshOutsidePrevious) {
    auto a = sample_normal_latent(1, 0, 4, 4, 4);
    auto b = sample_normal_latent(1, 1, 4, 4, 4);
    Mask m = rasterize_mask(Rect{1, 1, 2, 2}, 4, 4);
    auto z = bcg_blend(a, b, m);
    for (int c = 0; c < 4; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) EXPECT_EQ(z.at(c, y, x), m.test(x, y) ? a.at(c, y, x) : b.at(c, y, x));
    EXPECT_THROW(bcg_blend(a, b, Mask(3, 4)), Error);
}

TEST(Edit, OutsideMaskMatchesMemoryAtEveryLevel) {
    ToyDit dit(config(), 4);
    auto mem = background(dit);
    Mask m = rasterize_mask(Rect{1, 2, 4, 5}, kSide, kSide);
    EditTrace trace;
    auto res = run_edit_denoise(mem, embed_prompt("a red bucket", 8), "a red bucket", m, dit, BlendMode::Bcg, 0, 1,
                                &trace);
    for (int t = 0; t <= 6; ++t) {
        const auto& z = res.record.trajectory[static_cast<std::size_t>(t)];
        const auto& prev = mem.latent_at(0, t);
        EXPECT_EQ(trace.blend_targets[static_cast<std::size_t>(t)], prev);
        for (std::size_t cell = 0; cell < z.cells(); ++cell)
            if (!m.test(cell)) {
                for (int c = 0; c < 4; ++c) ASSERT_EQ(z.at(c, cell), prev.at(c, cell)) << "t=" << t;
            }
    }
}

TEST(Edit, BcgCounters) {
    ToyDit dit(config(), 4);
    auto mem = background(dit);
    Mask m = rasterize_mask(Rect{0, 0, 2, 2}, kSide, kSide);
    auto res = run_edit_denoise(mem, embed_prompt("a kite", 8), "a kite", m, dit, BlendMode::Bcg, 0, 1);
    EXPECT_EQ(res.cost.denoiser_calls, 6u);
    EXPECT_EQ(res.cost.omega, 6u * 2u * 2u);
    EXPECT_EQ(res.cost.forward_cost, 0u);
    EXPECT_EQ(res.cost.efficiency_gain(), 1.0);
}

TEST(Edit, LatentBlendingPaysForwardPasses) {
    ToyDit dit(config(), 4);
    auto mem = background(dit);
    Mask m = rasterize_mask(Rect{0, 0, 2, 2}, kSide, kSide);
    auto res = run_edit_denoise(mem, embed_prompt("a kite", 8), "a kite", m, dit, BlendMode::LatentBlending, 0, 1);
    EXPECT_EQ(res.cost.denoiser_calls, 6u);
    EXPECT_EQ(res.cost.forward_cost, 6u);
    EXPECT_DOUBLE_EQ(res.cost.efficiency_gain(), 1.0 + res.cost.r());
    EXPECT_DOUBLE_EQ(res.cost.r(), 1.0 / 4.0);
    // Level 0 is blended against the stored result in both modes.
    const auto& z0 = res.record.final_latent();
    for (std::size_t cell = 0; cell < z0.cells(); ++cell)
        if (!m.test(cell)) {
            EXPECT_EQ(z0.at(0, cell), mem.latent_at(0, 0).at(0, cell));
        }
}

TEST(Edit, ProceduralModesAgreeInsideMask) {
    ProceduralDenoiser den(config());
    auto mem = background(den);
    Mask m = rasterize_mask(Rect{1, 1, 4, 3}, kSide, kSide);
    auto p = embed_prompt("a blue towel", 8);
    auto bcg = run_edit_denoise(mem, p, p.text, m, den, BlendMode::Bcg, 0, 1);
    auto lb = run_edit_denoise(mem, p, p.text, m, den, BlendMode::LatentBlending, 0, 1);
    for (int t = 0; t <= 6; ++t)
        for (std::size_t cell = 0; cell < m.size(); ++cell)
            if (m.test(cell)) {
                for (int c = 0; c < 4; ++c)
                    EXPECT_EQ(bcg.record.trajectory[static_cast<std::size_t>(t)].at(c, cell),
                              lb.record.trajectory[static_cast<std::size_t>(t)].at(c, cell));
            }
}

TEST(Edit, RejectsBadMasks) {
    ProceduralDenoiser den(config());
    auto mem = background(den);
    auto p = embed_prompt("a cup", 8);
    try {
        run_edit_denoise(mem, p, p.text, Mask(kSide, kSide), den, BlendMode::Bcg, 0, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
    }
    EXPECT_THROW(run_edit_denoise(mem, p, p.text, Mask::full(4, 4), den, BlendMode::Bcg, 0, 1), Error);
    LayerMemory empty(6, 4, kSide, kSide);
    EXPECT_THROW(run_edit_denoise(empty, p, p.text, Mask::full(kSide, kSide), den, BlendMode::Bcg, 0, 1), Error);
}

TEST(CostModel, GainIsOnePlusR) {
    auto c = cost_model(20, 5, 32, 32, 0.125);
    EXPECT_EQ(c.omega, 100.0);
    EXPECT_EQ(c.cost_bcg, 100.0);
    EXPECT_EQ(c.cost_lb, 112.5);
    EXPECT_EQ(c.efficiency_gain, 1.125);
    EXPECT_EQ(cost_model(20, 5, 32, 32, 0.0).efficiency_gain, 1.0);
    EXPECT_THROW(cost_model(20, 5, 32, 32, 1.0), Error);
    EXPECT_THROW(cost_model(20, 5, 32, 32, -0.1), Error);
    EXPECT_THROW(cost_model(0, 5, 32, 32, 0.1), Error);
}

TEST(CostReport, Accumulates) {
    CostReport a{"bcg", 1, 20, 160, 0, 1.0};
    CostReport total;
    total += a;
    total += a;
    EXPECT_EQ(total.mode, "bcg");
    EXPECT_EQ(total.omega, 320u);
    EXPECT_EQ(total.edits, 2u);
}
