#ifndef LAYEREDIT_SESSION_HPP
#define LAYEREDIT_SESSION_HPP

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcg.hpp"
#include "denoiser.hpp"
#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "mask_io.hpp"
#include "memory.hpp"
#include "prompt.hpp"

namespace layeredit {

struct SessionConfig {
    std::string backend = "toy-dit";
    DenoiserConfig denoiser;
    int latent_width = 32;
    int latent_height = 32;
    int channels = 4;
    int decode_scale = 8;
    std::uint64_t seed = 0;
    std::uint64_t embedding_seed = kDefaultEmbeddingSeed;

    int image_width() const { return latent_width * decode_scale; }
    int image_height() const { return latent_height * decode_scale; }

    void validate() const {
        denoiser.validate();
        require(latent_width >= 1 && latent_height >= 1, ErrorCode::InvalidConfig, "latent dims must be positive");
        require(channels >= 3, ErrorCode::InvalidConfig, "at least 3 latent channels are required for decoding");
        require(decode_scale >= 1, ErrorCode::InvalidConfig, "decode scale must be >= 1");
        require(backend == "toy-dit" || backend == "procedural", ErrorCode::InvalidConfig,
                "unknown backend '" + backend + "'");
    }

    bool operator==(const SessionConfig&) const = default;
};

inline nlohmann::json to_json(const SessionConfig& c) {
    return {{"backend", c.backend},
            {"blocks", c.denoiser.blocks},
            {"d_model", c.denoiser.d_model},
            {"heads", c.denoiser.heads},
            {"steps", c.denoiser.steps},
            {"guidance_scale", c.denoiser.guidance_scale},
            {"weight_seed", c.denoiser.weight_seed},
            {"latent_width", c.latent_width},
            {"latent_height", c.latent_height},
            {"channels", c.channels},
            {"decode_scale", c.decode_scale},
            {"seed", c.seed},
            {"embedding_seed", c.embedding_seed}};
}

/// Missing keys keep their defaults.
inline SessionConfig session_config_from_json(const nlohmann::json& j, SessionConfig c = {}) {
    try {
        c.backend = j.value("backend", c.backend);
        c.denoiser.blocks = j.value("blocks", c.denoiser.blocks);
        c.denoiser.d_model = j.value("d_model", c.denoiser.d_model);
        c.denoiser.heads = j.value("heads", c.denoiser.heads);
        c.denoiser.steps = j.value("steps", c.denoiser.steps);
        c.denoiser.guidance_scale = j.value("guidance_scale", c.denoiser.guidance_scale);
        c.denoiser.weight_seed = j.value("weight_seed", c.denoiser.weight_seed);
        c.latent_width = j.value("latent_width", c.latent_width);
        c.latent_height = j.value("latent_height", c.latent_height);
        c.channels = j.value("channels", c.channels);
        c.decode_scale = j.value("decode_scale", c.decode_scale);
        c.seed = j.value("seed", c.seed);
        c.embedding_seed = j.value("embedding_seed", c.embedding_seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

struct EditCommand {
    enum class Kind { Create, Add, Delete };
    Kind kind = Kind::Create;
    std::string prompt;
    Mask mask;              // Add only, latent resolution
    std::size_t layer = 0;  // Delete only
    BlendMode mode = BlendMode::Bcg;
};

inline nlohmann::json to_json(const EditCommand& c) {
    switch (c.kind) {
        case EditCommand::Kind::Create: return {{"op", "create"}, {"prompt", c.prompt}};
        case EditCommand::Kind::Add:
            return {{"op", "add"}, {"prompt", c.prompt}, {"mask", mask_to_json(c.mask)}, {"mode", to_string(c.mode)}};
        case EditCommand::Kind::Delete: return {{"op", "delete"}, {"layer", c.layer}};
    }
    return {};
}

inline EditCommand edit_command_from_json(const nlohmann::json& j) {
    EditCommand c;
    try {
        auto op = j.at("op").get<std::string>();
        if (op == "create") {
            c.kind = EditCommand::Kind::Create;
            c.prompt = j.at("prompt").get<std::string>();
        } else if (op == "add") {
            c.kind = EditCommand::Kind::Add;
            c.prompt = j.at("prompt").get<std::string>();
            c.mask = mask_from_json(j.at("mask"));
            c.mode = j.value("mode", std::string("bcg")) == "lb" ? BlendMode::LatentBlending : BlendMode::Bcg;
        } else if (op == "delete") {
            c.kind = EditCommand::Kind::Delete;
            c.layer = j.at("layer").get<std::size_t>();
        } else {
            fail(ErrorCode::Format, "unknown edit op '" + op + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("edit command: ") + e.what());
    }
    return c;
}

/// Deletion schedule for T steps: resume at tau = ceil(0.4 T), blend against
/// the layer below the target down to level ceil(tau / 2), then denoise plainly.
struct DeletionSchedule {
    int tau = 0;
    int phase_end = 0;  // last blended level
    int blended_steps() const { return tau - phase_end; }
    int plain_steps() const { return phase_end; }
};

inline DeletionSchedule deletion_schedule(int steps) {
    DeletionSchedule s;
    s.tau = (2 * steps + 4) / 5;  // ceil(0.4 T) in integers
    s.phase_end = (s.tau + 1) / 2;
    return s;
}

namespace detail {
inline void write_f32_le(std::ostream& out, std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    } else {
        for (float f : v) {
            auto u = std::bit_cast<std::uint32_t>(f);
            char b[4] = {static_cast<char>(u), static_cast<char>(u >> 8), static_cast<char>(u >> 16),
                         static_cast<char>(u >> 24)};
            out.write(b, 4);
        }
    }
}

inline void read_f32_le(std::istream& in, std::span<float> v) {
    std::vector<unsigned char> buf(v.size() * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<std::size_t>(in.gcount()) == buf.size(), ErrorCode::Io, "truncated tensor blob");
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t u = buf[4 * i] | (buf[4 * i + 1] << 8) | (buf[4 * i + 2] << 16) |
                          (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        v[i] = std::bit_cast<float>(u);
    }
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view data) {
    std::ofstream out(p, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + p.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + p.string());
}

inline std::string blob_name(std::size_t layer, int t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "L%03zu_t%03d.f32", layer, t);
    return buf;
}
}  // namespace detail

inline constexpr std::string_view kSessionFormat = "layeredit-session/1";

/// An editing session: config, layer memory, the command log that reproduces
/// it, and per-command cost reports. Not thread-safe; callers serialize edits.
class EditSession {
public:
    /// Generates the background layer with a single-region T-step denoise.
    static EditSession create(const std::string& background_prompt, const SessionConfig& config) {
        config.validate();
        EditSession s(config);
        EditCommand cmd;
        cmd.kind = EditCommand::Kind::Create;
        cmd.prompt = background_prompt;
        s.apply(cmd);
        return s;
    }

    /// Adds an object under `mask` (latent resolution) in front of all prior layers.
    RgbImage add_edit(const std::string& prompt, const Mask& mask, BlendMode mode = BlendMode::Bcg) {
        EditCommand cmd;
        cmd.kind = EditCommand::Kind::Add;
        cmd.prompt = prompt;
        cmd.mask = mask;
        cmd.mode = mode;
        apply(cmd);
        return render();
    }

    /// Removes layer `target` (>= 1) and re-renders the region it occupied.
    RgbImage delete_edit(std::size_t target) {
        EditCommand cmd;
        cmd.kind = EditCommand::Kind::Delete;
        cmd.layer = target;
        apply(cmd);
        return render();
    }

    RgbImage render() const { return decode_latent(memory_.latent_at(memory_.size() - 1, 0), config_.decode_scale); }

    const LayerMemory& memory() const { return memory_; }
    const SessionConfig& config() const { return config_; }
    const std::vector<EditCommand>& edit_log() const { return log_; }
    const std::vector<CostReport>& stats() const { return stats_; }
    const Denoiser& denoiser() const { return *denoiser_; }

    /// Replays a command log from scratch.
    static EditSession replay(const SessionConfig& config, const std::vector<EditCommand>& log) {
        require(!log.empty() && log.front().kind == EditCommand::Kind::Create, ErrorCode::Format,
                "edit log must start with a create command");
        config.validate();
        EditSession s(config);
        for (const auto& cmd : log) s.apply(cmd);
        return s;
    }

    static EditSession replay(const nlohmann::json& manifest) {
        auto [config, log] = parse_manifest(manifest);
        return replay(config, log);
    }

    nlohmann::json manifest() const {
        nlohmann::json j;
        j["format"] = kSessionFormat;
        j["config"] = to_json(config_);
        j["edit_log"] = nlohmann::json::array();
        for (const auto& c : log_) j["edit_log"].push_back(to_json(c));
        j["layers"] = nlohmann::json::array();
        for (std::size_t i = 0; i < memory_.size(); ++i) {
            const auto& r = memory_.record(i);
            j["layers"].push_back(
                {{"index", i}, {"label", r.label}, {"mask", mask_to_json(r.mask)}, {"checksum", hex64(r.checksum())}});
        }
        j["stats"] = nlohmann::json::array();
        for (const auto& s : stats_)
            j["stats"].push_back({{"mode", s.mode},
                                  {"denoiser_calls", s.denoiser_calls},
                                  {"omega", s.omega},
                                  {"forward_cost", s.forward_cost},
                                  {"wall_ms", s.wall_ms}});
        j["final_image"] = image_checksum(render());
        return j;
    }

    /// Writes session.json plus one little-endian float32 blob per (layer, t).
    void save(const std::filesystem::path& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir / "layers");
        for (const auto& entry : fs::directory_iterator(dir / "layers")) fs::remove(entry.path());
        for (std::size_t i = 0; i < memory_.size(); ++i)
            for (int t = 0; t <= memory_.steps(); ++t) {
                std::ofstream out(dir / "layers" / detail::blob_name(i, t), std::ios::binary);
                require(static_cast<bool>(out), ErrorCode::Io, "cannot write tensor blob");
                detail::write_f32_le(out, memory_.latent_at(i, t).values());
            }
        detail::write_file(dir / "session.json", manifest().dump(2) + "\n");
    }

    /// Restores a saved session from its blobs (no recomputation).
    static EditSession load(const std::filesystem::path& dir) {
        auto manifest = nlohmann::json::parse(detail::read_file(dir / "session.json"), nullptr, false);
        require(!manifest.is_discarded(), ErrorCode::Format, "session.json is not valid JSON");
        auto [config, log] = parse_manifest(manifest);
        EditSession s(config);
        s.log_ = std::move(log);
        for (const auto& layer : manifest.at("layers")) {
            LayerRecord rec;
            rec.label = layer.at("label").get<std::string>();
            rec.mask = mask_from_json(layer.at("mask"));
            rec.prompt = embed_prompt(rec.label, static_cast<std::size_t>(config.denoiser.d_model), config.embedding_seed);
            std::size_t i = layer.at("index").get<std::size_t>();
            for (int t = 0; t <= config.denoiser.steps; ++t) {
                LatentTensor z(config.channels, config.latent_height, config.latent_width);
                std::ifstream in(dir / "layers" / detail::blob_name(i, t), std::ios::binary);
                require(static_cast<bool>(in), ErrorCode::Io, "missing tensor blob " + detail::blob_name(i, t));
                detail::read_f32_le(in, z.values());
                rec.trajectory.push_back(std::move(z));
            }
            require(hex64(rec.checksum()) == layer.at("checksum").get<std::string>(), ErrorCode::Format,
                    "layer " + std::to_string(i) + " checksum mismatch");
            s.memory_.append_layer(std::move(rec));
        }
        if (manifest.contains("stats"))
            for (const auto& st : manifest["stats"]) {
                CostReport c;
                c.mode = st.value("mode", "");
                c.edits = 1;
                c.denoiser_calls = st.value("denoiser_calls", std::uint64_t{0});
                c.omega = st.value("omega", std::uint64_t{0});
                c.forward_cost = st.value("forward_cost", std::uint64_t{0});
                c.wall_ms = st.value("wall_ms", 0.0);
                s.stats_.push_back(c);
            }
        return s;
    }

    static std::pair<SessionConfig, std::vector<EditCommand>> parse_manifest(const nlohmann::json& j) {
        require(j.is_object() && j.value("format", "") == kSessionFormat, ErrorCode::Format,
                "not a layeredit session manifest");
        SessionConfig config = session_config_from_json(j.at("config"));
        std::vector<EditCommand> log;
        for (const auto& c : j.at("edit_log")) log.push_back(edit_command_from_json(c));
        return {config, log};
    }

private:
    explicit EditSession(const SessionConfig& config)
        : config_(config),
          denoiser_(make_denoiser(config.backend, config.denoiser, config.channels)),
          memory_(config.denoiser.steps, config.channels, config.latent_height, config.latent_width) {}

    PromptEmbedding embed(const std::string& text) const {
        return embed_prompt(text, static_cast<std::size_t>(config_.denoiser.d_model), config_.embedding_seed);
    }

    void apply(const EditCommand& cmd) {
        switch (cmd.kind) {
            case EditCommand::Kind::Create: apply_create(cmd); break;
            case EditCommand::Kind::Add: apply_add(cmd); break;
            case EditCommand::Kind::Delete: apply_delete(cmd); break;
        }
        log_.push_back(cmd);
    }

    std::uint64_t next_stream() const { return log_.size(); }

    void apply_create(const EditCommand& cmd) {
        require(memory_.empty(), ErrorCode::InvalidArgument, "session already has a background");
        auto start = std::chrono::steady_clock::now();
        const int steps = config_.denoiser.steps;
        PromptEmbedding p0 = embed(cmd.prompt);
        RegionPartition part = single_region_partition(config_.latent_width, config_.latent_height);
        LayerRecord rec;
        rec.prompt = p0;
        rec.label = cmd.prompt;
        rec.mask = Mask::full(config_.latent_width, config_.latent_height);
        rec.trajectory.resize(static_cast<std::size_t>(steps) + 1);
        rec.trajectory[static_cast<std::size_t>(steps)] = sample_init_latent(
            config_.seed, next_stream(), config_.channels, config_.latent_height, config_.latent_width);
        CostReport cost;
        cost.mode = "create";
        cost.edits = 1;
        for (int t = steps; t >= 1; --t) {
            const auto& z = rec.trajectory[static_cast<std::size_t>(t)];
            auto pred = denoiser_->predict(z, t, part, std::span(&p0, 1));
            ++cost.denoiser_calls;
            rec.trajectory[static_cast<std::size_t>(t - 1)] = scheduler_step(z, pred, t, steps);
        }
        cost.omega = cost.denoiser_calls * denoiser_->cost_units_per_call();
        cost.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        memory_.append_layer(std::move(rec));
        stats_.push_back(cost);
    }

    void apply_add(const EditCommand& cmd) {
        require(!memory_.empty(), ErrorCode::InvalidArgument, "session has no background");
        auto result = run_edit_denoise(memory_, embed(cmd.prompt), cmd.prompt, cmd.mask, *denoiser_, cmd.mode,
                                       config_.seed, next_stream());
        memory_.append_layer(std::move(result.record));
        stats_.push_back(result.cost);
    }

    void apply_delete(const EditCommand& cmd) {
        const std::size_t target = cmd.layer;
        require(target != 0, ErrorCode::InvalidArgument, "the background layer cannot be deleted");
        require(target < memory_.size(), ErrorCode::OutOfRange,
                "layer " + std::to_string(target) + " does not exist");
        CostReport cost;
        cost.mode = "delete";
        cost.edits = 1;
        auto start = std::chrono::steady_clock::now();
        const std::size_t latest = memory_.size() - 1;
        if (target == latest) {
            // The layer below already holds the exact pre-edit state.
            memory_.remove_layer(target);
        } else {
            delete_occluded(target, cost);
        }
        cost.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        stats_.push_back(cost);
    }

    /// Deletes a layer that has other layers in front of it. The region in
    /// front (union of masks above the target) starts from the latest layer's
    /// latent at tau, everything else from the layer below the target; the
    /// partition used for denoising omits the target's mask and prompt.
    void delete_occluded(std::size_t target, CostReport& cost) {
        const int steps = memory_.steps();
        const std::size_t latest = memory_.size() - 1;
        const std::size_t below = target - 1;
        const auto sched = deletion_schedule(steps);

        std::vector<Mask> masks;
        std::vector<PromptEmbedding> prompts;
        for (std::size_t k = 0; k < memory_.size(); ++k)
            if (k != target) {
                masks.push_back(memory_.record(k).mask);
                prompts.push_back(memory_.record(k).prompt);
            }
        RegionPartition part = partition(masks);

        // front[k]: union of masks target+1..k.
        std::vector<Mask> front(memory_.size());
        Mask acc(memory_.width(), memory_.height());
        for (std::size_t k = target + 1; k <= latest; ++k) {
            acc |= memory_.record(k).mask;
            front[k] = acc;
        }
        const Mask& front_all = front[latest];

        std::vector<LatentTensor> rerun(static_cast<std::size_t>(sched.tau) + 1);
        rerun[static_cast<std::size_t>(sched.tau)] =
            bcg_blend(memory_.latent_at(latest, sched.tau), memory_.latent_at(below, sched.tau), front_all);
        for (int t = sched.tau; t >= 1; --t) {
            const auto& z = rerun[static_cast<std::size_t>(t)];
            auto pred = denoiser_->predict(z, t, part, prompts);
            ++cost.denoiser_calls;
            auto next = scheduler_step(z, pred, t, steps);
            if (t - 1 >= sched.phase_end) next = bcg_blend(next, memory_.latent_at(below, t - 1), front_all);
            rerun[static_cast<std::size_t>(t - 1)] = std::move(next);
        }
        cost.omega = cost.denoiser_calls * denoiser_->cost_units_per_call();

        // Layers above the target lose its contribution: outside their front
        // region they now show the layer below the target.
        for (std::size_t k = target + 1; k <= latest; ++k) {
            const auto& old = memory_.record(k);
            LayerRecord rec;
            rec.prompt = old.prompt;
            rec.mask = old.mask;
            rec.label = old.label;
            for (int t = 0; t <= steps; ++t) {
                if (k == latest && t <= sched.tau)
                    rec.trajectory.push_back(rerun[static_cast<std::size_t>(t)]);
                else
                    rec.trajectory.push_back(bcg_blend(old.trajectory[static_cast<std::size_t>(t)],
                                                       memory_.latent_at(below, t), front[k]));
            }
            memory_.replace_layer(k, std::move(rec));
        }
        memory_.remove_layer(target);
    }

    SessionConfig config_;
    std::shared_ptr<const Denoiser> denoiser_;
    LayerMemory memory_;
    std::vector<EditCommand> log_;
    std::vector<CostReport> stats_;
};

}  // namespace layeredit

#endif
