#ifndef LAYEREDIT_BENCH_HPP
#define LAYEREDIT_BENCH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "mask_io.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "session.hpp"

namespace layeredit {

// ---------------------------------------------------------------------------
// Class table

/// A background and the object classes that compose naturally with it.
struct Theme {
    std::string background;
    std::vector<std::string> objects;
};

inline const std::vector<Theme>& class_table() {
    static const std::vector<Theme> table = {
        {"a wooden floor",
         {"a cupcake", "a mug cup", "a dish", "a teapot", "a banana", "an orange", "a croissant", "a candle"}},
        {"a grassy savanna",
         {"a lion", "a tiger", "an elephant", "a zebra", "a giraffe", "a cheetah", "an ostrich", "a hippopotamus"}},
        {"a sandy beach",
         {"a beach ball", "an umbrella", "a sea turtle", "a crab", "a surfboard", "a seagull", "a sandcastle",
          "a lifeguard tower"}},
        {"a night city street",
         {"a taxi", "a bus", "a street lamp", "a fire hydrant", "a bicycle", "a mailbox", "a traffic light",
          "a police van"}},
        {"a snowy forest", {"a fox", "a wolf", "a deer", "a snowman", "a pine tree", "a sled", "an owl", "a rabbit"}},
        {"a living room",
         {"a sofa", "a lamp", "a cat", "a golden retriever", "a guitar", "a television", "an armchair",
          "a houseplant"}},
    };
    return table;
}

// ---------------------------------------------------------------------------
// Layout

struct LayoutConstraints {
    int canvas_width = 256;
    int canvas_height = 256;
    int margin = 16;
    int min_size = 64;
    int max_size = 128;
    double max_overlap = 0.6;  // pairwise |a & b| / min(|a|, |b|)
    bool ellipses = false;
    int max_retries = 200;
    std::map<int, double> step_weights = {{2, 0.19}, {3, 0.18}, {4, 0.26}, {5, 0.37}};

    void validate() const {
        require(canvas_width > 0 && canvas_height > 0, ErrorCode::InvalidArgument, "canvas dims must be positive");
        require(margin >= 0 && min_size >= 1 && min_size <= max_size, ErrorCode::InvalidArgument,
                "invalid margin or size range");
        require(max_overlap >= 0 && max_overlap <= 1, ErrorCode::InvalidArgument, "max_overlap must be in [0, 1]");
        require(max_retries >= 1, ErrorCode::InvalidArgument, "max_retries must be >= 1");
        require(!step_weights.empty(), ErrorCode::InvalidArgument, "step distribution is empty");
        double total = 0;
        for (auto [steps, w] : step_weights) {
            require(steps >= 2 && steps <= 5, ErrorCode::InvalidArgument, "edit steps must lie in [2, 5]");
            require(w >= 0, ErrorCode::InvalidArgument, "step weights must be non-negative");
            total += w;
        }
        require(total > 0, ErrorCode::InvalidArgument, "step weights sum to zero");
    }
};

inline nlohmann::json to_json(const LayoutConstraints& c) {
    nlohmann::json steps = nlohmann::json::object();
    for (auto [s, w] : c.step_weights) steps[std::to_string(s)] = w;
    return {{"canvas_width", c.canvas_width}, {"canvas_height", c.canvas_height}, {"margin", c.margin},
            {"min_size", c.min_size},         {"max_size", c.max_size},           {"max_overlap", c.max_overlap},
            {"ellipses", c.ellipses},         {"max_retries", c.max_retries},     {"step_weights", steps}};
}

inline LayoutConstraints layout_constraints_from_json(const nlohmann::json& j) {
    LayoutConstraints c;
    c.canvas_width = j.value("canvas_width", c.canvas_width);
    c.canvas_height = j.value("canvas_height", c.canvas_height);
    c.margin = j.value("margin", c.margin);
    c.min_size = j.value("min_size", c.min_size);
    c.max_size = j.value("max_size", c.max_size);
    c.max_overlap = j.value("max_overlap", c.max_overlap);
    c.ellipses = j.value("ellipses", c.ellipses);
    c.max_retries = j.value("max_retries", c.max_retries);
    if (j.contains("step_weights")) {
        c.step_weights.clear();
        for (const auto& [k, v] : j["step_weights"].items()) c.step_weights[std::stoi(k)] = v.get<double>();
    }
    c.validate();
    return c;
}

/// Samples n rectangles (or inscribed ellipses) inside the margins with sides
/// in [min_size, max_size]. Overlap is allowed up to `max_overlap` per pair.
inline std::vector<Mask> layout_sample(int n, const LayoutConstraints& c, CounterRng& rng) {
    c.validate();
    require(n >= 1, ErrorCode::InvalidArgument, "layout needs at least one mask");
    require(c.max_size + 2 * c.margin <= std::min(c.canvas_width, c.canvas_height), ErrorCode::GenerationFailure,
            "size range does not fit inside the margins");
    std::vector<Mask> out;
    for (int k = 0; k < n; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < c.max_retries && !placed; ++attempt) {
            auto w = static_cast<int>(rng.uniform_int(c.min_size, c.max_size));
            auto h = static_cast<int>(rng.uniform_int(c.min_size, c.max_size));
            auto x0 = static_cast<int>(rng.uniform_int(c.margin, c.canvas_width - c.margin - w));
            auto y0 = static_cast<int>(rng.uniform_int(c.margin, c.canvas_height - c.margin - h));
            Shape shape = Rect{x0, y0, x0 + w - 1, y0 + h - 1};
            if (c.ellipses) shape = Ellipse{x0 + w / 2.0, y0 + h / 2.0, w / 2.0, h / 2.0};
            Mask m = rasterize_mask(shape, c.canvas_width, c.canvas_height);
            placed = std::all_of(out.begin(), out.end(), [&](const Mask& o) {
                auto inter = static_cast<double>((o & m).count());
                return inter <= c.max_overlap * static_cast<double>(std::min(o.count(), m.count()));
            });
            if (placed) out.push_back(std::move(m));
        }
        if (!placed)
            fail(ErrorCode::GenerationFailure, "could not place mask " + std::to_string(k) + " after " +
                                                   std::to_string(c.max_retries) + " attempts");
    }
    return out;
}

/// Smallest distance between cell margins and the canvas edge over all set cells.
inline int mask_margin(const Mask& m) {
    auto bb = m.bounding_box();
    if (!bb) return std::min(m.width(), m.height());
    return std::min({bb->x0, bb->y0, m.width() - 1 - bb->x1, m.height() - 1 - bb->y1});
}

// ---------------------------------------------------------------------------
// Captions

enum class CaptionKind { Global, Layer, Crop };

namespace detail {
/// Phrase relating consecutive objects a (earlier) and b (later), centers in
/// normalized canvas coordinates. Near-coincident centers read as occlusion.
inline std::string relation_clause(const std::string& a, Point ca, const std::string& b, Point cb) {
    double dx = ca.x - cb.x;
    double dy = ca.y - cb.y;
    constexpr double kNear = 0.1;
    if (std::abs(dx) < kNear && std::abs(dy) < kNear) return b + " in front of " + a;
    if (std::abs(dx) >= std::abs(dy)) return a + (dx < 0 ? " to the left of " : " to the right of ") + b;
    return a + (dy < 0 ? " above " : " below ") + b;
}
}  // namespace detail

/// Template captions. labels[0] is the background; centers[k] (normalized to
/// [0, 1]) belongs to labels[k], centers[0] is ignored. Global describes the
/// whole scene; Layer describes the last object relative to the one before it
/// without background words; Crop is the per-object scoring template.
inline std::string caption_from_template(const std::vector<std::string>& labels, const std::vector<Point>& centers,
                                         CaptionKind kind) {
    require(!labels.empty() && labels.size() == centers.size(), ErrorCode::InvalidArgument,
            "labels and centers must be non-empty and aligned");
    const std::string& bg = labels[0];
    std::size_t last = labels.size() - 1;
    switch (kind) {
        case CaptionKind::Global: {
            if (last == 0) return "an image of " + bg;
            std::string body = labels[1];
            if (last >= 2) {
                body.clear();
                for (std::size_t k = 2; k <= last; ++k) {
                    if (k > 2) body += " and ";
                    body += detail::relation_clause(labels[k - 1], centers[k - 1], labels[k], centers[k]);
                }
            }
            return "an image of " + body + " in " + bg;
        }
        case CaptionKind::Layer:
            if (last <= 1) return "an image of " + labels[last];
            return "an image of " +
                   detail::relation_clause(labels[last - 1], centers[last - 1], labels[last], centers[last]);
        case CaptionKind::Crop: return "an image of " + labels[last] + " in " + bg;
    }
    return {};
}

// ---------------------------------------------------------------------------
// Scenarios

struct Scenario {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    int n_layers = 0;                         // including background
    std::vector<std::string> labels;          // [0] background
    std::vector<Mask> masks;                  // image resolution, [0] full canvas
    std::string global_caption;
    std::vector<std::string> layer_captions;  // [0] background label
    std::vector<std::string> crop_captions;   // [0] unused
    double occlusion = 0;                     // over object masks

    std::vector<Mask> object_masks() const { return {masks.begin() + 1, masks.end()}; }
};

struct Suite {
    std::uint64_t seed = 0;
    LayoutConstraints constraints;
    std::vector<Scenario> scenarios;

    double average_occlusion() const {
        if (scenarios.empty()) return 0;
        double s = 0;
        for (const auto& sc : scenarios) s += sc.occlusion;
        return s / static_cast<double>(scenarios.size());
    }

    /// Fraction of scenarios per edit-step count (n_layers - 1).
    std::map<int, double> step_distribution() const {
        std::map<int, double> d;
        for (const auto& sc : scenarios) d[sc.n_layers - 1] += 1;
        for (auto& [k, v] : d) v /= static_cast<double>(scenarios.size());
        return d;
    }
};

namespace detail {
/// Largest-remainder apportionment of `count` items over the weights.
inline std::vector<int> apportion_steps(const std::map<int, double>& weights, std::size_t count) {
    double total = 0;
    for (auto [s, w] : weights) total += w;
    std::vector<std::pair<int, double>> rem;
    std::map<int, std::size_t> quota;
    std::size_t assigned = 0;
    for (auto [s, w] : weights) {
        double exact = w / total * static_cast<double>(count);
        auto q = static_cast<std::size_t>(std::floor(exact));
        quota[s] = q;
        assigned += q;
        rem.emplace_back(s, exact - static_cast<double>(q));
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; assigned < count; ++i, ++assigned) ++quota[rem[i % rem.size()].first];
    std::vector<int> steps;
    for (auto [s, q] : quota) steps.insert(steps.end(), q, s);
    return steps;
}
}  // namespace detail

inline Scenario make_scenario(std::size_t index, std::uint64_t seed, int edit_steps, const LayoutConstraints& c) {
    Scenario sc;
    sc.index = index;
    sc.seed = seed;
    sc.n_layers = edit_steps + 1;
    CounterRng rng(seed);
    const auto& table = class_table();

    // Reference class first, then compatible classes from the same theme.
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t t = 0; t < table.size(); ++t)
        for (std::size_t o = 0; o < table[t].objects.size(); ++o) all.emplace_back(t, o);
    auto [theme_idx, ref_idx] = all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(all.size()) - 1))];
    const Theme& theme = table[theme_idx];
    std::vector<std::string> pool;
    for (std::size_t o = 0; o < theme.objects.size(); ++o)
        if (o != ref_idx) pool.push_back(theme.objects[o]);
    for (std::size_t i = pool.size(); i > 1; --i)
        std::swap(pool[i - 1], pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    require(static_cast<std::size_t>(edit_steps) <= pool.size() + 1, ErrorCode::GenerationFailure,
            "class table too small for scenario " + std::to_string(index));
    sc.labels.push_back(theme.background);
    sc.labels.push_back(theme.objects[ref_idx]);
    for (int k = 1; k < edit_steps; ++k) sc.labels.push_back(pool[static_cast<std::size_t>(k - 1)]);

    try {
        auto objects = layout_sample(edit_steps, c, rng);
        sc.masks.push_back(Mask::full(c.canvas_width, c.canvas_height));
        for (auto& m : objects) sc.masks.push_back(std::move(m));
    } catch (const Error& e) {
        fail(ErrorCode::GenerationFailure, "scenario " + std::to_string(index) + ": " + e.what());
    }

    std::vector<Point> centers{{0.5, 0.5}};
    for (std::size_t k = 1; k < sc.masks.size(); ++k) {
        auto p = *sc.masks[k].centroid();
        centers.push_back({p.x / c.canvas_width, p.y / c.canvas_height});
    }
    sc.global_caption = caption_from_template(sc.labels, centers, CaptionKind::Global);
    sc.layer_captions.push_back(sc.labels[0]);
    sc.crop_captions.push_back("");
    for (std::size_t k = 1; k < sc.labels.size(); ++k) {
        std::vector<std::string> l(sc.labels.begin(), sc.labels.begin() + static_cast<std::ptrdiff_t>(k + 1));
        std::vector<Point> p(centers.begin(), centers.begin() + static_cast<std::ptrdiff_t>(k + 1));
        sc.layer_captions.push_back(caption_from_template(l, p, CaptionKind::Layer));
        sc.crop_captions.push_back(caption_from_template(l, p, CaptionKind::Crop));
    }
    sc.occlusion = occlusion_ratio(sc.object_masks());
    return sc;
}

/// Deterministic suite: step counts apportioned to the configured distribution
/// and shuffled, each scenario seeded from (seed, index).
inline Suite generate_scenarios(std::uint64_t seed, std::size_t count, const LayoutConstraints& c = {}) {
    require(count >= 1, ErrorCode::InvalidArgument, "scenario count must be >= 1");
    c.validate();
    Suite suite;
    suite.seed = seed;
    suite.constraints = c;
    auto steps = detail::apportion_steps(c.step_weights, count);
    CounterRng order(hash_combine(seed, 0x5157'0000ULL));
    for (std::size_t i = steps.size(); i > 1; --i)
        std::swap(steps[i - 1], steps[static_cast<std::size_t>(order.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    for (std::size_t i = 0; i < count; ++i) suite.scenarios.push_back(make_scenario(i, hash_combine(seed, i), steps[i], c));
    return suite;
}

inline constexpr std::string_view kSuiteFormat = "layeredit-suite/1";

inline nlohmann::json to_json(const Suite& s) {
    nlohmann::json j;
    j["format"] = kSuiteFormat;
    j["seed"] = s.seed;
    j["constraints"] = to_json(s.constraints);
    nlohmann::json dist = nlohmann::json::object();
    for (auto [k, v] : s.step_distribution()) dist[std::to_string(k)] = v;
    j["stats"] = {{"count", s.scenarios.size()}, {"average_occlusion", s.average_occlusion()}, {"step_distribution", dist}};
    j["scenarios"] = nlohmann::json::array();
    for (const auto& sc : s.scenarios) {
        nlohmann::json masks = nlohmann::json::array();
        for (const auto& m : sc.masks) masks.push_back(mask_to_json(m));
        j["scenarios"].push_back({{"index", sc.index},
                                  {"seed", sc.seed},
                                  {"n_layers", sc.n_layers},
                                  {"labels", sc.labels},
                                  {"masks", masks},
                                  {"global_caption", sc.global_caption},
                                  {"layer_captions", sc.layer_captions},
                                  {"crop_captions", sc.crop_captions},
                                  {"occlusion_ratio", sc.occlusion}});
    }
    return j;
}

inline Suite suite_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.value("format", "") == kSuiteFormat, ErrorCode::Format, "not a layeredit suite file");
    Suite s;
    try {
        s.seed = j.at("seed").get<std::uint64_t>();
        s.constraints = layout_constraints_from_json(j.at("constraints"));
        for (const auto& js : j.at("scenarios")) {
            Scenario sc;
            sc.index = js.at("index").get<std::size_t>();
            sc.seed = js.at("seed").get<std::uint64_t>();
            sc.n_layers = js.at("n_layers").get<int>();
            sc.labels = js.at("labels").get<std::vector<std::string>>();
            for (const auto& m : js.at("masks")) sc.masks.push_back(mask_from_json(m));
            sc.global_caption = js.at("global_caption").get<std::string>();
            sc.layer_captions = js.at("layer_captions").get<std::vector<std::string>>();
            sc.crop_captions = js.at("crop_captions").get<std::vector<std::string>>();
            sc.occlusion = js.at("occlusion_ratio").get<double>();
            s.scenarios.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("suite file: ") + e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr int kCropSize = 224;

struct CropResult {
    std::vector<std::optional<RgbImage>> crops;  // one per mask
    std::vector<std::string> notices;
};

/// Tight bounding-box crop of each mask, bilinear-resized to 224 x 224. Empty
/// masks are skipped with a notice.
inline CropResult crop_layers(const RgbImage& image, const std::vector<Mask>& masks) {
    CropResult out;
    for (std::size_t k = 0; k < masks.size(); ++k) {
        require(masks[k].width() == image.width && masks[k].height() == image.height, ErrorCode::DimensionMismatch,
                "crop mask does not match image resolution");
        auto bb = masks[k].bounding_box();
        if (!bb) {
            out.crops.emplace_back();
            out.notices.push_back("mask " + std::to_string(k) + " is empty; crop skipped");
            continue;
        }
        out.crops.push_back(resize_bilinear(crop(image, *bb), kCropSize, kCropSize));
    }
    return out;
}

/// One scenario's outcome from an editing run: the final render and the text
/// generated for each layer ([0] background). `captions` stands in for a
/// captioning model's output on each crop.
struct SessionResult {
    std::size_t scenario = 0;
    std::optional<RgbImage> render;
    std::vector<std::string> captions;
};

/// (crop image, caption) -> score in [0, 1].
using ExternalScorer = std::function<double(const RgbImage&, std::string_view)>;

struct Scorers {
    bool bleu = true;
    bool meteor = true;
    std::map<std::string, ExternalScorer> external;

    bool empty() const { return !bleu && !meteor && external.empty(); }
    static Scorers none() { return {false, false, {}}; }
};

struct LayerScore {
    std::size_t layer = 0;
    double bleu2 = 0, bleu3 = 0, bleu4 = 0, meteor = 0;
    std::map<std::string, double> external;
};

struct ImageScore {
    std::size_t scenario = 0;
    bool failed = false;
    std::string notice;
    std::vector<LayerScore> layers;
    LayerScore mean;
};

struct ScoreReport {
    bool scored = false;
    std::size_t scenarios = 0;
    std::size_t failed = 0;
    double average_occlusion = 0;
    std::map<int, double> step_distribution;
    std::vector<ImageScore> images;
    LayerScore suite_mean;
    std::vector<std::string> notices;
};

namespace detail {
inline LayerScore mean_of(const std::vector<LayerScore>& v) {
    LayerScore m;
    if (v.empty()) return m;
    auto n = static_cast<double>(v.size());
    for (const auto& s : v) {
        m.bleu2 += s.bleu2 / n;
        m.bleu3 += s.bleu3 / n;
        m.bleu4 += s.bleu4 / n;
        m.meteor += s.meteor / n;
        for (const auto& [k, x] : s.external) m.external[k] += x / n;
    }
    return m;
}
}  // namespace detail

/// Scores every object layer of every scenario, averages per image over its
/// layers, then over images. Scenarios without a render are excluded.
inline ScoreReport evaluate_suite(const std::vector<SessionResult>& results, const Suite& suite,
                                  const Scorers& scorers) {
    ScoreReport rep;
    rep.scored = !scorers.empty();
    rep.scenarios = suite.scenarios.size();
    rep.average_occlusion = suite.average_occlusion();
    rep.step_distribution = suite.step_distribution();

    std::map<std::size_t, const SessionResult*> by_scenario;
    for (const auto& r : results) by_scenario[r.scenario] = &r;

    std::vector<LayerScore> image_means;
    for (const auto& sc : suite.scenarios) {
        ImageScore img;
        img.scenario = sc.index;
        auto it = by_scenario.find(sc.index);
        if (it == by_scenario.end() || !it->second->render) {
            img.failed = true;
            img.notice = "scenario " + std::to_string(sc.index) + ": missing render; excluded";
            rep.notices.push_back(img.notice);
            ++rep.failed;
            rep.images.push_back(std::move(img));
            continue;
        }
        const SessionResult& res = *it->second;
        if (rep.scored) {
            auto crops = crop_layers(*res.render, sc.masks);
            for (const auto& n : crops.notices) rep.notices.push_back("scenario " + std::to_string(sc.index) + ": " + n);
            for (std::size_t k = 1; k < sc.masks.size(); ++k) {
                if (!crops.crops[k]) continue;
                LayerScore ls;
                ls.layer = k;
                const std::string& generated = k < res.captions.size() ? res.captions[k] : std::string();
                if (scorers.bleu || scorers.meteor) {
                    if (generated.empty()) {
                        rep.notices.push_back("scenario " + std::to_string(sc.index) + " layer " + std::to_string(k) +
                                              ": no caption; text scores are 0");
                    } else {
                        if (scorers.bleu) {
                            auto b = bleu_2_3_4(generated, sc.layer_captions[k]);
                            ls.bleu2 = b.bleu2;
                            ls.bleu3 = b.bleu3;
                            ls.bleu4 = b.bleu4;
                        }
                        if (scorers.meteor) ls.meteor = meteor_exact(generated, sc.layer_captions[k]);
                    }
                }
                for (const auto& [name, fn] : scorers.external) {
                    double v = fn(*crops.crops[k], sc.crop_captions[k]);
                    require(v >= 0.0 && v <= 1.0 && std::isfinite(v), ErrorCode::OutOfRange,
                            "external scorer '" + name + "' returned a value outside [0, 1]");
                    ls.external[name] = v;
                }
                img.layers.push_back(std::move(ls));
            }
            img.mean = detail::mean_of(img.layers);
            image_means.push_back(img.mean);
        }
        rep.images.push_back(std::move(img));
    }
    rep.suite_mean = detail::mean_of(image_means);
    return rep;
}

inline nlohmann::json to_json(const LayerScore& s) {
    nlohmann::json j = {{"bleu2", s.bleu2}, {"bleu3", s.bleu3}, {"bleu4", s.bleu4}, {"meteor_exact", s.meteor}};
    if (s.layer) j["layer"] = s.layer;
    if (!s.external.empty()) j["external"] = s.external;
    return j;
}

inline nlohmann::json to_json(const ScoreReport& r) {
    nlohmann::json dist = nlohmann::json::object();
    for (auto [k, v] : r.step_distribution) dist[std::to_string(k)] = v;
    nlohmann::json j = {{"scenarios", r.scenarios},
                        {"failed", r.failed},
                        {"average_occlusion", r.average_occlusion},
                        {"step_distribution", dist},
                        {"notices", r.notices}};
    if (r.scored) {
        j["suite_mean"] = to_json(r.suite_mean);
        j["images"] = nlohmann::json::array();
        for (const auto& img : r.images) {
            nlohmann::json ji = {{"scenario", img.scenario}, {"failed", img.failed}};
            if (!img.failed) {
                ji["mean"] = to_json(img.mean);
                ji["layers"] = nlohmann::json::array();
                for (const auto& l : img.layers) ji["layers"].push_back(to_json(l));
            }
            j["images"].push_back(ji);
        }
    }
    return j;
}

inline std::string format_report_table(const ScoreReport& r) {
    std::ostringstream out;
    out << "scenarios " << r.scenarios << "  failed " << r.failed << "  avg occlusion " << r.average_occlusion << "\n";
    out << "steps:";
    for (auto [k, v] : r.step_distribution) out << "  " << k << "=" << v;
    out << "\n";
    if (!r.scored) return out.str();
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s\n", "scenario", "bleu2", "bleu3", "bleu4", "meteor");
    out << line;
    for (const auto& img : r.images) {
        if (img.failed) {
            std::snprintf(line, sizeof line, "%-10zu %8s\n", img.scenario, "failed");
        } else {
            std::snprintf(line, sizeof line, "%-10zu %8.4f %8.4f %8.4f %8.4f\n", img.scenario, img.mean.bleu2,
                          img.mean.bleu3, img.mean.bleu4, img.mean.meteor);
        }
        out << line;
    }
    std::snprintf(line, sizeof line, "%-10s %8.4f %8.4f %8.4f %8.4f\n", "mean", r.suite_mean.bleu2, r.suite_mean.bleu3,
                  r.suite_mean.bleu4, r.suite_mean.meteor);
    out << line;
    return out.str();
}

/// Drives one scenario through an editing session: background from the
/// background label, then one edit per object layer with its layer caption.
inline SessionResult run_scenario(const Scenario& sc, const SessionConfig& config) {
    require(config.image_width() == sc.masks.front().width() && config.image_height() == sc.masks.front().height(),
            ErrorCode::DimensionMismatch, "session image size does not match scenario canvas");
    SessionResult res;
    res.scenario = sc.index;
    auto session = EditSession::create(sc.labels[0], config);
    res.captions.push_back(sc.labels[0]);
    for (std::size_t k = 1; k < sc.masks.size(); ++k) {
        session.add_edit(sc.layer_captions[k], downsample_mask(sc.masks[k], config.latent_width, config.latent_height));
        res.captions.push_back(sc.layer_captions[k]);
    }
    res.render = session.render();
    return res;
}

}  // namespace layeredit

#endif
