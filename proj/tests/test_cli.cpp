#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "layeredit/session.hpp"

using namespace layeredit;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string out;
};

RunResult run(const std::string& args) {
    std::string cmd = std::string(LAYEREDIT_CLI) + " " + args + " 2>&1";
    std::array<char, 256> buf{};
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    int st = pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("layeredit_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
};

}  // namespace

TEST_F(CliTest, PerfGainMatchesCounters) {
    auto json_path = (dir / "perf.json").string();
    auto r = run("--backend procedural --size 64 --steps 8 perf compare --edits 3 --json " + json_path);
    ASSERT_EQ(r.status, 0) << r.out;
    auto report = nlohmann::json::parse(detail::read_file(json_path));
    ASSERT_EQ(report.size(), 2u);
    for (const auto& row : report) {
        double omega = row.at("omega").get<double>();
        double fwd = row.at("forward_cost").get<double>();
        EXPECT_EQ(row.at("edits"), 3);
        char expect[32];
        std::snprintf(expect, sizeof expect, "%10.6f", (omega + fwd) / omega);
        EXPECT_NE(r.out.find(expect), std::string::npos) << r.out;
        if (row.at("mode") == "bcg") {
            EXPECT_EQ(fwd, 0);
        }
        if (row.at("mode") == "lb") {
            EXPECT_EQ(fwd, 3 * 8);
        }
    }
}

TEST_F(CliTest, BenchGenIsDeterministic) {
    auto a = (dir / "a.json").string(), b = (dir / "b.json").string();
    ASSERT_EQ(run("bench gen --seed 7 --count 20 --out " + a).status, 0);
    ASSERT_EQ(run("bench gen --seed 7 --count 20 --out " + b).status, 0);
    EXPECT_EQ(detail::read_file(a), detail::read_file(b));
    EXPECT_EQ(nlohmann::json::parse(detail::read_file(a)).at("seed"), 7);
}

TEST_F(CliTest, BenchRunAndEval) {
    auto suite = (dir / "suite.json").string();
    ASSERT_EQ(run("bench gen --seed 3 --count 2 --out " + suite).status, 0);
    auto res = run("--backend procedural --steps 4 bench run --suite " + suite + " --out " + (dir / "out").string());
    ASSERT_EQ(res.status, 0) << res.out;
    auto eval = run("bench eval --suite " + suite + " --results " + (dir / "out" / "results.json").string() +
                    " --json " + (dir / "report.json").string());
    ASSERT_EQ(eval.status, 0) << eval.out;
    auto rep = nlohmann::json::parse(detail::read_file(dir / "report.json"));
    EXPECT_EQ(rep.at("scenarios"), 2);
    EXPECT_EQ(rep.at("failed"), 0);
    // Captions are the layer templates themselves, so BLEU-2 is 1.
    EXPECT_DOUBLE_EQ(rep.at("suite_mean").at("bleu2").get<double>(), 1.0);
}

TEST_F(CliTest, SessionLifecycle) {
    std::string g = "--backend procedural --size 64 --steps 6 ";
    std::string d = " --dir " + dir.string();
    ASSERT_EQ(run(g + "session new" + d + " --prompt 'a tiled floor'").status, 0);
    ASSERT_EQ(run(g + "session edit" + d + " --prompt 'a rug' --mask rect:8,8,40,40").status, 0);
    auto mask = dir / "m.json";
    detail::write_file(mask, mask_to_json(rasterize_mask(Rect{2, 2, 6, 6}, 8, 8)).dump());
    ASSERT_EQ(run(g + "session edit" + d + " --prompt 'a cat' --mask " + mask.string()).status, 0);
    auto del = run("session delete" + d + " --layer 1");
    ASSERT_EQ(del.status, 0) << del.out;
    EXPECT_NE(del.out.find("calls=3"), std::string::npos) << del.out;
    auto render = run("session render" + d + " --out " + (dir / "img.ppm").string());
    ASSERT_EQ(render.status, 0);
    auto img = decode_ppm(detail::read_file(dir / "img.ppm"));
    EXPECT_EQ(img.width, 64);
    auto replay = run("session replay " + dir.string() + " --verify");
    EXPECT_EQ(replay.status, 0);
    EXPECT_NE(replay.out.find("verify ok"), std::string::npos);
}

TEST_F(CliTest, ErrorsExitNonzero) {
    std::string d = " --dir " + dir.string();
    auto missing = run("session render" + d + " --out x.ppm");
    EXPECT_NE(missing.status, 0);
    EXPECT_NE(missing.out.find("error"), std::string::npos);
    ASSERT_EQ(run("--backend procedural --size 64 --steps 4 session new" + d + " --prompt 'a wall'").status, 0);
    EXPECT_NE(run("session edit" + d + " --prompt 'x' --mask rect:500,500,600,600").status, 0);
    EXPECT_NE(run("session edit" + d + " --prompt 'x' --mask blob:1").status, 0);
    EXPECT_NE(run("session delete" + d + " --layer 0").status, 0);
    EXPECT_NE(run("--backend unet session new" + d + " --prompt 'x'").status, 0);
    EXPECT_NE(run("--size 60 session new --dir " + (dir / "b").string() + " --prompt 'x'").status, 0);
}
