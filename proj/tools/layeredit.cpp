// Command-line front end: sessions, replay, benchmark suites, the LB vs BCG
// cost comparison, and the HTTP service.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "layeredit/layeredit.hpp"
#include "layeredit/service.hpp"

namespace fs = std::filesystem;
using namespace layeredit;

namespace {

struct GlobalOptions {
    std::string backend = "toy-dit";
    std::uint64_t seed = 0;
    int size = 256;
    int steps = 20;
    int blocks = 4;
    int d_model = 64;
};

SessionConfig make_config(const GlobalOptions& g) {
    SessionConfig c;
    c.backend = g.backend;
    c.seed = g.seed;
    c.denoiser.steps = g.steps;
    c.denoiser.blocks = g.blocks;
    c.denoiser.d_model = g.d_model;
    require(g.size % c.decode_scale == 0, ErrorCode::InvalidConfig,
            "--size must be a multiple of " + std::to_string(c.decode_scale));
    c.latent_width = c.latent_height = g.size / c.decode_scale;
    c.validate();
    return c;
}

std::vector<double> parse_numbers(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) out.push_back(std::stod(item));
    return out;
}

/// rect:x0,y0,x1,y1 | ellipse:cx,cy,rx,ry | poly:x,y;x,y;... (image pixels), or a .pbm / .json mask file.
Mask parse_mask_spec(const std::string& spec, const SessionConfig& cfg) {
    Mask m;
    auto colon = spec.find(':');
    std::string kind = colon == std::string::npos ? "" : spec.substr(0, colon);
    std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "rect") {
        auto v = parse_numbers(args, ',');
        require(v.size() == 4, ErrorCode::InvalidArgument, "rect needs x0,y0,x1,y1");
        m = rasterize_mask(Rect{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                                static_cast<int>(v[3])},
                           cfg.image_width(), cfg.image_height());
    } else if (kind == "ellipse") {
        auto v = parse_numbers(args, ',');
        require(v.size() == 4, ErrorCode::InvalidArgument, "ellipse needs cx,cy,rx,ry");
        m = rasterize_mask(Ellipse{v[0], v[1], v[2], v[3]}, cfg.image_width(), cfg.image_height());
    } else if (kind == "poly") {
        Polygon poly;
        std::stringstream ss(args);
        for (std::string pt; std::getline(ss, pt, ';');) {
            auto v = parse_numbers(pt, ',');
            require(v.size() == 2, ErrorCode::InvalidArgument, "poly points are x,y pairs separated by ';'");
            poly.vertices.push_back({v[0], v[1]});
        }
        m = rasterize_mask(poly, cfg.image_width(), cfg.image_height());
    } else {
        fs::path p(spec);
        require(fs::exists(p), ErrorCode::InvalidArgument, "mask spec '" + spec + "' is neither a shape nor a file");
        auto data = detail::read_file(p);
        m = p.extension() == ".json" ? mask_from_json(nlohmann::json::parse(data)) : decode_pbm(data);
    }
    if (m.width() == cfg.image_width() && m.height() == cfg.image_height() && cfg.decode_scale != 1)
        m = downsample_mask(m, cfg.latent_width, cfg.latent_height);
    require(m.width() == cfg.latent_width && m.height() == cfg.latent_height, ErrorCode::DimensionMismatch,
            "mask must be at image or latent resolution");
    return m;
}

void write_image(const fs::path& out, const RgbImage& img) {
    detail::write_file(out, encode_ppm(img));
    std::cout << "image " << out.string() << " " << image_checksum(img) << "\n";
}

void print_cost(const CostReport& c) {
    std::printf("%-7s calls=%llu omega=%llu forward_cost=%llu gain=%.6f wall_ms=%.2f\n", c.mode.c_str(),
                static_cast<unsigned long long>(c.denoiser_calls), static_cast<unsigned long long>(c.omega),
                static_cast<unsigned long long>(c.forward_cost), c.efficiency_gain(), c.wall_ms);
}

fs::path session_dir_from(const std::string& arg) {
    fs::path p(arg);
    return fs::is_directory(p) ? p : p.parent_path();
}

/// Runs N edits on a fresh session in the given blend mode with seeded rectangles.
CostReport run_perf(const SessionConfig& cfg, BlendMode mode, int edits) {
    auto session = EditSession::create("a wooden floor", cfg);
    CounterRng rng(hash_combine(cfg.seed, 0x9e7fULL));
    CostReport total;
    total.mode = to_string(mode);
    for (int e = 0; e < edits; ++e) {
        int w = static_cast<int>(rng.uniform_int(cfg.latent_width / 4, cfg.latent_width / 2));
        int h = static_cast<int>(rng.uniform_int(cfg.latent_height / 4, cfg.latent_height / 2));
        int x = static_cast<int>(rng.uniform_int(0, cfg.latent_width - w));
        int y = static_cast<int>(rng.uniform_int(0, cfg.latent_height - h));
        Mask m = rasterize_mask(Rect{x, y, x + w - 1, y + h - 1}, cfg.latent_width, cfg.latent_height);
        session.add_edit("object number " + std::to_string(e + 1), m, mode);
        total += session.stats().back();
    }
    return total;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"layeredit: mask-ordered iterative image editing with layer-wise memory"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    if (const char* b = std::getenv("LAYEREDIT_BACKEND")) g.backend = b;
    app.add_option("--backend", g.backend, "Denoiser backend")->check(CLI::IsMember({"toy-dit", "procedural"}));
    app.add_option("--seed", g.seed, "Session / suite seed");
    app.add_option("--size", g.size, "Image side in pixels (latent side = size / 8)");
    app.add_option("--steps", g.steps, "Denoising steps T");
    app.add_option("--blocks", g.blocks, "Transformer blocks K (toy-dit)");
    app.add_option("--d-model", g.d_model, "Model width (toy-dit)");

    // session ---------------------------------------------------------------
    auto* session = app.add_subcommand("session", "Create, edit and replay sessions");
    session->require_subcommand(1);
    std::string dir, prompt, mask_spec, out, mode = "bcg", replay_path;
    std::size_t layer = 0;
    bool verify = false;

    auto* s_new = session->add_subcommand("new", "Generate a background and save the session");
    s_new->add_option("--dir", dir, "Session directory")->required();
    s_new->add_option("--prompt", prompt, "Background prompt")->required();
    s_new->add_option("--out", out, "Also write the render here");

    auto* s_edit = session->add_subcommand("edit", "Add an object in front of all layers");
    s_edit->add_option("--dir", dir, "Session directory")->required();
    s_edit->add_option("--prompt", prompt, "Object prompt")->required();
    s_edit->add_option("--mask", mask_spec, "rect:x0,y0,x1,y1 | ellipse:cx,cy,rx,ry | poly:x,y;... | file")->required();
    s_edit->add_option("--mode", mode, "Blend mode")->check(CLI::IsMember({"bcg", "lb"}));
    s_edit->add_option("--out", out, "Also write the render here");

    auto* s_delete = session->add_subcommand("delete", "Delete a layer");
    s_delete->add_option("--dir", dir, "Session directory")->required();
    s_delete->add_option("--layer", layer, "Layer index (>= 1)")->required();
    s_delete->add_option("--out", out, "Also write the render here");

    auto* s_render = session->add_subcommand("render", "Write the current image");
    s_render->add_option("--dir", dir, "Session directory")->required();
    s_render->add_option("--out", out, "Output PPM")->required();

    auto* s_replay = session->add_subcommand("replay", "Replay a saved edit log from scratch");
    s_replay->add_option("file", replay_path, "session.json or its directory")->required();
    s_replay->add_option("--out", out, "Write the replayed render here");
    s_replay->add_flag("--verify", verify, "Compare replayed tensors with the saved blobs");

    // bench -----------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Multi-edit benchmark suites");
    bench->require_subcommand(1);
    std::size_t count = 100;
    std::string suite_path, results_path, json_out;
    auto* b_gen = bench->add_subcommand("gen", "Generate a scenario suite");
    b_gen->add_option("--count", count, "Scenario count");
    b_gen->add_option("--out", out, "Suite file")->required();
    auto* b_run = bench->add_subcommand("run", "Run every scenario through an editing session");
    b_run->add_option("--suite", suite_path, "Suite file")->required();
    b_run->add_option("--out", out, "Results directory")->required();
    auto* b_eval = bench->add_subcommand("eval", "Score results against a suite");
    b_eval->add_option("--suite", suite_path, "Suite file")->required();
    b_eval->add_option("--results", results_path, "results.json from `bench run`")->required();
    b_eval->add_option("--json", json_out, "Write the structured report here");

    // perf ------------------------------------------------------------------
    auto* perf = app.add_subcommand("perf", "Cost comparisons");
    perf->require_subcommand(1);
    int edits = 1, runs = 1;
    auto* p_cmp = perf->add_subcommand("compare", "Latent blending vs memory-backed blending");
    p_cmp->add_option("--edits", edits, "Edits per run")->check(CLI::PositiveNumber);
    p_cmp->add_option("--runs", runs, "Repetitions averaged for wall time")->check(CLI::PositiveNumber);
    p_cmp->add_option("--json", json_out, "Write the structured report here");

    // serve -----------------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    int port = 8080;
    if (const char* p = std::getenv("LAYEREDIT_PORT")) port = std::atoi(p);
    std::string host = "127.0.0.1";
    serve->add_option("--port", port, "Listen port");
    serve->add_option("--host", host, "Listen address");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*s_new) {
            auto s = EditSession::create(prompt, make_config(g));
            s.save(dir);
            print_cost(s.stats().back());
            if (!out.empty()) write_image(out, s.render());
            std::cout << "final " << image_checksum(s.render()) << "\n";
        } else if (*s_edit) {
            auto s = EditSession::load(dir);
            auto img = s.add_edit(prompt, parse_mask_spec(mask_spec, s.config()),
                                  mode == "lb" ? BlendMode::LatentBlending : BlendMode::Bcg);
            s.save(dir);
            print_cost(s.stats().back());
            std::cout << "layer " << s.memory().size() - 1 << "\n";
            if (!out.empty()) write_image(out, img);
            std::cout << "final " << image_checksum(img) << "\n";
        } else if (*s_delete) {
            auto s = EditSession::load(dir);
            auto img = s.delete_edit(layer);
            s.save(dir);
            print_cost(s.stats().back());
            if (!out.empty()) write_image(out, img);
            std::cout << "final " << image_checksum(img) << "\n";
        } else if (*s_render) {
            write_image(out, EditSession::load(dir).render());
        } else if (*s_replay) {
            fs::path sdir = session_dir_from(replay_path);
            auto manifest = nlohmann::json::parse(detail::read_file(sdir / "session.json"));
            auto s = EditSession::replay(manifest);
            auto img = s.render();
            if (!out.empty()) write_image(out, img);
            std::cout << "final " << image_checksum(img) << "\n";
            if (verify) {
                auto saved = EditSession::load(sdir);
                bool same = saved.memory().size() == s.memory().size();
                for (std::size_t i = 0; same && i < s.memory().size(); ++i)
                    same = saved.memory().record(i).checksum() == s.memory().record(i).checksum();
                same = same && image_checksum(saved.render()) == image_checksum(img);
                std::cout << "verify " << (same ? "ok" : "MISMATCH") << "\n";
                if (!same) return 2;
            }
        } else if (*b_gen) {
            auto suite = generate_scenarios(g.seed, count);
            detail::write_file(out, to_json(suite).dump(1) + "\n");
            std::cout << "scenarios " << suite.scenarios.size() << " avg_occlusion " << suite.average_occlusion() << "\n";
        } else if (*b_run) {
            auto suite = suite_from_json(nlohmann::json::parse(detail::read_file(suite_path)));
            SessionConfig cfg = make_config(g);
            cfg.latent_width = suite.constraints.canvas_width / cfg.decode_scale;
            cfg.latent_height = suite.constraints.canvas_height / cfg.decode_scale;
            fs::create_directories(out);
            nlohmann::json results = {{"format", "layeredit-results/1"}, {"results", nlohmann::json::array()}};
            for (const auto& sc : suite.scenarios) {
                nlohmann::json entry = {{"scenario", sc.index}};
                try {
                    auto r = run_scenario(sc, cfg);
                    std::string name = "scenario_" + std::to_string(sc.index) + ".ppm";
                    detail::write_file(fs::path(out) / name, encode_ppm(*r.render));
                    entry["image"] = name;
                    entry["captions"] = r.captions;
                } catch (const Error& e) {
                    entry["image"] = nullptr;
                    entry["error"] = e.what();
                    std::cerr << "scenario " << sc.index << ": " << e.what() << "\n";
                }
                results["results"].push_back(entry);
            }
            detail::write_file(fs::path(out) / "results.json", results.dump(1) + "\n");
            std::cout << "results " << (fs::path(out) / "results.json").string() << "\n";
        } else if (*b_eval) {
            auto suite = suite_from_json(nlohmann::json::parse(detail::read_file(suite_path)));
            auto rj = nlohmann::json::parse(detail::read_file(results_path));
            fs::path base = fs::path(results_path).parent_path();
            std::vector<SessionResult> results;
            for (const auto& e : rj.at("results")) {
                SessionResult r;
                r.scenario = e.at("scenario").get<std::size_t>();
                if (e.contains("image") && e["image"].is_string())
                    r.render = decode_ppm(detail::read_file(base / e["image"].get<std::string>()));
                if (e.contains("captions")) r.captions = e["captions"].get<std::vector<std::string>>();
                results.push_back(std::move(r));
            }
            auto report = evaluate_suite(results, suite, Scorers{});
            std::cout << format_report_table(report);
            if (!json_out.empty()) detail::write_file(json_out, to_json(report).dump(2) + "\n");
        } else if (*p_cmp) {
            SessionConfig cfg = make_config(g);
            CostReport lb, bcg;
            for (int r = 0; r < runs; ++r) {
                bcg += run_perf(cfg, BlendMode::Bcg, edits);
                lb += run_perf(cfg, BlendMode::LatentBlending, edits);
            }
            std::printf("%-6s %6s %10s %13s %10s %12s\n", "mode", "edits", "omega", "forward_cost", "gain", "wall_ms");
            nlohmann::json report = nlohmann::json::array();
            for (CostReport* c : {&lb, &bcg}) {
                double wall = c->wall_ms / runs;
                std::printf("%-6s %6d %10llu %13llu %10.6f %12.2f\n", c->mode.c_str(), edits,
                            static_cast<unsigned long long>(c->omega / static_cast<std::uint64_t>(runs)),
                            static_cast<unsigned long long>(c->forward_cost / static_cast<std::uint64_t>(runs)),
                            c->efficiency_gain(), wall);
                report.push_back({{"mode", c->mode},
                                  {"edits", edits},
                                  {"omega", c->omega / static_cast<std::uint64_t>(runs)},
                                  {"forward_cost", c->forward_cost / static_cast<std::uint64_t>(runs)},
                                  {"wall_ms", wall}});
            }
            if (!json_out.empty()) detail::write_file(json_out, report.dump(2) + "\n");
        } else if (*serve) {
            ServiceConfig scfg;
            scfg.defaults = make_config(g);
            SessionService service(scfg);
            httplib::Server server;
            service.bind(server);
            std::cout << "listening on " << host << ":" << port << std::endl;
            if (!server.listen(host, port)) {
                std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
