#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "layeredit/session.hpp"

using namespace layeredit;
namespace fs = std::filesystem;

namespace {

SessionConfig small(const std::string& backend, int steps = 6) {
    SessionConfig c;
    c.backend = backend;
    c.denoiser.blocks = 2;
    c.denoiser.d_model = 16;
    c.denoiser.heads = 2;
    c.denoiser.steps = steps;
    c.latent_width = 8;
    c.latent_height = 8;
    c.seed = 17;
    return c;
}

Mask rect(int x0, int y0, int x1, int y1) { return rasterize_mask(Rect{x0, y0, x1, y1}, 8, 8); }

fs::path temp_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("layeredit_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string run(const std::string& cmd) {
    std::array<char, 256> buf{};
    std::string out;
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    if (!pipe) return out;
    while (fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
    return out;
}

std::string final_line(const std::string& out) {
    auto p = out.rfind("final ");
    return p == std::string::npos ? "" : out.substr(p + 6, 16);
}

// Owner of every cell under the remaining stack, and the pattern it must show.
float expected_cell(const LayerMemory& mem, int x, int y, int c) {
    std::size_t owner = 0;
    for (std::size_t k = 0; k < mem.size(); ++k)
        if (mem.record(k).mask.test(x, y)) owner = k;
    return procedural_pattern(mem.record(owner).label, x, y, c);
}

}  // namespace

TEST(DeletionSchedule, Values) {
    auto s = deletion_schedule(20);
    EXPECT_EQ(s.tau, 8);
    EXPECT_EQ(s.phase_end, 4);
    EXPECT_EQ(s.blended_steps(), 4);
    EXPECT_EQ(s.plain_steps(), 4);
    EXPECT_EQ(deletion_schedule(10).tau, 4);
    EXPECT_EQ(deletion_schedule(6).tau, 3);
    EXPECT_EQ(deletion_schedule(6).phase_end, 2);
    EXPECT_EQ(deletion_schedule(50).tau, 20);
}

TEST(Session, CreateAndEdit) {
    auto s = EditSession::create("a grassy hill", small("toy-dit"));
    EXPECT_EQ(s.memory().size(), 1u);
    EXPECT_EQ(s.stats().back().denoiser_calls, 6u);
    auto img = s.add_edit("a yellow tent", rect(1, 1, 4, 4));
    EXPECT_EQ(img.width, 64);
    EXPECT_EQ(s.memory().size(), 2u);
    EXPECT_EQ(s.edit_log().size(), 2u);
    EXPECT_EQ(s.stats().back().mode, "bcg");
}

TEST(Session, FailedCommandIsNotLogged) {
    auto s = EditSession::create("a grassy hill", small("procedural"));
    EXPECT_THROW(s.add_edit("nothing", Mask(8, 8)), Error);
    EXPECT_THROW(s.delete_edit(0), Error);
    EXPECT_THROW(s.delete_edit(3), Error);
    EXPECT_EQ(s.edit_log().size(), 1u);
}

TEST(Session, DeletingLatestRestoresPriorState) {
    auto s = EditSession::create("a grassy hill", small("toy-dit"));
    s.add_edit("a yellow tent", rect(1, 1, 4, 4));
    auto before = s.render();
    auto sum = s.memory().record(1).checksum();
    s.add_edit("a campfire", rect(3, 3, 6, 6));
    auto after = s.delete_edit(2);
    EXPECT_EQ(after.rgb, before.rgb);
    EXPECT_EQ(s.memory().size(), 2u);
    EXPECT_EQ(s.memory().record(1).checksum(), sum);
    EXPECT_EQ(s.stats().back().denoiser_calls, 0u);
}

TEST(Session, DeletingOccludedLayerFollowsRemainingOwners) {
    auto s = EditSession::create("a grassy hill", small("procedural", 20));
    s.add_edit("a yellow tent", rect(1, 1, 5, 5));
    s.add_edit("a campfire", rect(4, 4, 7, 7));
    Mask front = s.memory().record(2).mask;
    auto before = s.memory().record(2).final_latent();
    s.delete_edit(1);

    EXPECT_EQ(s.stats().back().denoiser_calls, 8u);
    ASSERT_EQ(s.memory().size(), 2u);
    const auto& z = s.memory().record(1).final_latent();
    for (int c = 0; c < 4; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                EXPECT_EQ(z.at(c, y, x), expected_cell(s.memory(), x, y, c)) << x << "," << y;
                if (front.test(x, y)) {
                    EXPECT_EQ(z.at(c, y, x), before.at(c, y, x));
                }
            }
}

TEST(Session, DeletionSwitchesPhaseAfterFourSteps) {
    auto s = EditSession::create("a grassy hill", small("toy-dit", 20));
    s.add_edit("a yellow tent", rect(1, 1, 5, 5));
    s.add_edit("a campfire", rect(4, 4, 7, 7));
    Mask front = s.memory().record(2).mask;
    const auto prior = s.memory();
    s.delete_edit(1);
    EXPECT_EQ(s.stats().back().denoiser_calls, 8u);
    auto outside_matches = [&](int t) {
        for (std::size_t cell = 0; cell < 64; ++cell)
            if (!front.test(cell))
                for (int c = 0; c < 4; ++c)
                    if (s.memory().latent_at(1, t).at(c, cell) != prior.latent_at(0, t).at(c, cell)) return false;
        return true;
    };
    for (int t = 4; t <= 8; ++t) EXPECT_TRUE(outside_matches(t)) << t;
    for (int t = 0; t <= 3; ++t) EXPECT_FALSE(outside_matches(t)) << t;
    // Levels above tau keep the old trajectory composited onto the background.
    for (int t = 9; t <= 20; ++t) {
        EXPECT_TRUE(outside_matches(t)) << t;
        for (std::size_t cell = 0; cell < 64; ++cell)
            if (front.test(cell)) {
                EXPECT_EQ(s.memory().latent_at(1, t).at(0, cell), prior.latent_at(2, t).at(0, cell));
            }
    }
}

TEST(Session, DeletingMiddleOfFourRebuildsUpperLayers) {
    auto s = EditSession::create("a grassy hill", small("procedural", 10));
    s.add_edit("a yellow tent", rect(0, 0, 3, 3));
    s.add_edit("a red flag", rect(2, 2, 5, 5));
    s.add_edit("a campfire", rect(4, 4, 7, 7));
    s.delete_edit(1);
    ASSERT_EQ(s.memory().size(), 3u);
    const auto& mid = s.memory().record(1);
    const auto& bg = s.memory().record(0);
    for (int t = 0; t <= 10; ++t)
        for (std::size_t cell = 0; cell < 64; ++cell)
            if (!mid.mask.test(cell)) {
                EXPECT_EQ(mid.trajectory[static_cast<std::size_t>(t)].at(1, cell),
                          bg.trajectory[static_cast<std::size_t>(t)].at(1, cell));
            }
    const auto& z = s.memory().record(2).final_latent();
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) EXPECT_EQ(z.at(0, y, x), expected_cell(s.memory(), x, y, 0));
}

TEST(Session, ReplayIsBitExact) {
    auto s = EditSession::create("a snowy street", small("toy-dit"));
    s.add_edit("a lamp post", rect(0, 1, 2, 7));
    s.add_edit("a red car", rect(3, 4, 7, 7), BlendMode::LatentBlending);
    s.add_edit("a dog", rect(2, 3, 4, 5));
    s.delete_edit(2);
    auto r = EditSession::replay(s.manifest());
    ASSERT_EQ(r.memory().size(), s.memory().size());
    for (std::size_t i = 0; i < s.memory().size(); ++i)
        EXPECT_EQ(r.memory().record(i).checksum(), s.memory().record(i).checksum());
    EXPECT_EQ(encode_ppm(r.render()), encode_ppm(s.render()));
}

TEST(Session, SaveLoadRoundTrip) {
    auto dir = temp_dir("saveload");
    auto s = EditSession::create("a snowy street", small("toy-dit"));
    s.add_edit("a lamp post", rect(0, 1, 2, 7));
    s.save(dir);
    auto l = EditSession::load(dir);
    EXPECT_EQ(l.render().rgb, s.render().rgb);
    EXPECT_EQ(l.edit_log().size(), 2u);
    EXPECT_EQ(l.stats().size(), 2u);
    l.add_edit("a mailbox", rect(5, 5, 7, 7));
    s.add_edit("a mailbox", rect(5, 5, 7, 7));
    EXPECT_EQ(l.render().rgb, s.render().rgb);

    {
        std::fstream f(dir / "layers" / detail::blob_name(1, 0), std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(5);
        f.put('\x7f');
    }
    EXPECT_THROW(EditSession::load(dir), Error);
    fs::remove_all(dir);
}

TEST(Session, ManifestRejectsForeignFormat) {
    EXPECT_THROW(EditSession::replay(nlohmann::json{{"format", "other"}}), Error);
    auto m = EditSession::create("a hill", small("procedural")).manifest();
    m["edit_log"] = nlohmann::json::array();
    EXPECT_THROW(EditSession::replay(m), Error);
}

TEST(Session, CommandJsonRoundTrip) {
    EditCommand c;
    c.kind = EditCommand::Kind::Add;
    c.prompt = "a cup";
    c.mask = rect(1, 2, 3, 4);
    c.mode = BlendMode::LatentBlending;
    auto back = edit_command_from_json(to_json(c));
    EXPECT_EQ(back.mask, c.mask);
    EXPECT_EQ(back.mode, BlendMode::LatentBlending);
    EXPECT_THROW(edit_command_from_json({{"op", "paint"}}), Error);
}

TEST(Session, ConfigValidation) {
    auto c = small("toy-dit");
    c.backend = "gan";
    EXPECT_THROW(EditSession::create("a hill", c), Error);
    EXPECT_EQ(session_config_from_json(to_json(small("toy-dit"))), small("toy-dit"));
    EXPECT_THROW(session_config_from_json({{"channels", 2}}), Error);
    EXPECT_THROW(session_config_from_json({{"steps", "many"}}), Error);
}

#ifdef LAYEREDIT_CLI
TEST(Session, ReplayAcrossProcesses) {
    auto dir = temp_dir("cli");
    std::string cli = LAYEREDIT_CLI;
    std::string g = cli + " --size 64 --steps 6 --blocks 2 --d-model 16 --seed 5 ";
    run(g + "session new --dir " + dir.string() + " --prompt 'a quiet harbor'");
    run(g + "session edit --dir " + dir.string() + " --prompt 'a fishing boat' --mask rect:8,8,40,30");
    auto edited = run(g + "session edit --dir " + dir.string() + " --prompt 'a gull' --mask ellipse:40,40,12,10");
    std::string first = run(cli + " session replay " + dir.string() + " --verify");
    std::string second = run(cli + " session replay " + (dir / "session.json").string());
    EXPECT_FALSE(final_line(edited).empty());
    EXPECT_EQ(final_line(first), final_line(edited));
    EXPECT_EQ(final_line(second), final_line(edited));
    EXPECT_NE(first.find("verify ok"), std::string::npos);
    fs::remove_all(dir);
}
#endif
