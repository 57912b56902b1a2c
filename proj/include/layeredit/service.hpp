#ifndef LAYEREDIT_SERVICE_HPP
#define LAYEREDIT_SERVICE_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "mask_io.hpp"
#include "session.hpp"

namespace layeredit {

struct ServiceConfig {
    SessionConfig defaults;
    std::size_t max_sessions = 64;
    int queue_limit = 1;          // edits admitted per session at once; beyond this -> 409
    int max_image_side = 2048;    // pixels
    int max_steps = 200;
};

/// Handler outcome, independent of the transport.
struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";

    static Response json(const nlohmann::json& j, int status = 200) { return {status, j.dump(), "application/json"}; }
    static Response error(int status, const std::string& message) {
        return json({{"error", message}, {"status", status}}, status);
    }
};

/// Read-only view of a session published after every edit.
struct SessionSnapshot {
    std::string image_id;
    std::size_t layer_count = 0;
    nlohmann::json layers;
    nlohmann::json stats;
    nlohmann::json manifest;
};

/// Session registry behind the HTTP API. Each session has a single-writer edit
/// lane; GET handlers only read the latest published snapshot.
class SessionService {
public:
    explicit SessionService(ServiceConfig config = {}) : config_(std::move(config)) {}

    Response healthz() const { return Response::json({{"status", "ok"}, {"sessions", session_count()}}); }

    Response create_session(const std::string& body) {
        return guarded([&] {
            auto j = parse_body(body);
            SessionConfig cfg = config_.defaults;
            if (j.contains("config")) cfg = session_config_from_json(j["config"], cfg);
            if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
            cfg.validate();
            require(cfg.image_width() <= config_.max_image_side && cfg.image_height() <= config_.max_image_side,
                    ErrorCode::InvalidConfig, "image size exceeds service limit");
            require(cfg.denoiser.steps <= config_.max_steps, ErrorCode::InvalidConfig, "steps exceed service limit");
            auto prompt = j.at("background_prompt").get<std::string>();
            {
                std::shared_lock lock(registry_mu_);
                require(slots_.size() < config_.max_sessions, ErrorCode::InvalidConfig, "session limit reached");
            }
            auto slot = std::make_shared<Slot>();
            slot->session = std::make_unique<EditSession>(EditSession::create(prompt, cfg));
            std::string id;
            {
                std::unique_lock lock(registry_mu_);
                std::uint64_t n = ++counter_;
                id = "s" + hex64(hash_combine(n, reinterpret_cast<std::uintptr_t>(slot.get()))).substr(0, 12) + "-" +
                     std::to_string(n);
                slot->id = id;
                slot->created_at = static_cast<std::int64_t>(std::time(nullptr));
                slots_[id] = slot;
            }
            publish(*slot);
            return Response::json({{"id", id},
                                   {"created_at", slot->created_at},
                                   {"config", to_json(cfg)},
                                   {"image_ref", "/images/" + slot->snapshot->image_id}},
                                  201);
        });
    }

    Response add_edit(const std::string& id, const std::string& body) {
        return with_edit_lane(id, [&](Slot& slot) {
            auto j = parse_body(body);
            auto prompt = j.at("prompt").get<std::string>();
            require(!tokenize(prompt).empty(), ErrorCode::InvalidArgument, "prompt is empty");
            const auto& cfg = slot.session->config();
            Mask mask = read_mask(j, cfg);
            auto mode = j.value("mode", std::string("bcg"));
            require(mode == "bcg" || mode == "lb", ErrorCode::InvalidArgument, "mode must be 'bcg' or 'lb'");
            slot.session->add_edit(prompt, mask, mode == "lb" ? BlendMode::LatentBlending : BlendMode::Bcg);
            publish(slot);
            return Response::json({{"layer_index", slot.session->memory().size() - 1},
                                   {"image_ref", "/images/" + slot.snapshot->image_id},
                                   {"image_id", slot.snapshot->image_id},
                                   {"cost", cost_json(slot.session->stats().back())}});
        });
    }

    Response delete_edit(const std::string& id, const std::string& layer) {
        return with_edit_lane(id, [&](Slot& slot) {
            std::size_t i = 0;
            try {
                i = std::stoull(layer);
            } catch (const std::exception&) {
                fail(ErrorCode::InvalidArgument, "layer index must be an integer");
            }
            slot.session->delete_edit(i);
            publish(slot);
            return Response::json({{"image_ref", "/images/" + slot.snapshot->image_id},
                                   {"image_id", slot.snapshot->image_id},
                                   {"cost", cost_json(slot.session->stats().back())}});
        });
    }

    Response get_image(const std::string& id) const {
        auto snap = snapshot(id);
        if (!snap) return not_found(id);
        return image_bytes(snap->image_id);
    }

    Response get_layers(const std::string& id) const {
        auto snap = snapshot(id);
        if (!snap) return not_found(id);
        return Response::json(snap->layers);
    }

    Response get_stats(const std::string& id) const {
        auto snap = snapshot(id);
        if (!snap) return not_found(id);
        return Response::json(snap->stats);
    }

    Response get_manifest(const std::string& id) const {
        auto snap = snapshot(id);
        if (!snap) return not_found(id);
        return Response::json(snap->manifest);
    }

    /// Content-addressed image fetch.
    Response image_bytes(const std::string& image_id) const {
        std::shared_lock lock(images_mu_);
        auto it = images_.find(image_id);
        if (it == images_.end()) return Response::error(404, "unknown image " + image_id);
        return {200, it->second, "image/x-portable-pixmap"};
    }

    std::size_t session_count() const {
        std::shared_lock lock(registry_mu_);
        return slots_.size();
    }

    /// Registers all routes on an httplib server.
    void bind(httplib::Server& server) {
        auto send = [](httplib::Response& res, const Response& r) {
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
        server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
        server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, create_session(req.body));
        });
        server.Post("/sessions/:id/edits", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, add_edit(req.path_params.at("id"), req.body));
        });
        server.Delete("/sessions/:id/edits/:layer", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, delete_edit(req.path_params.at("id"), req.path_params.at("layer")));
        });
        server.Get("/sessions/:id/image", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_image(req.path_params.at("id")));
        });
        server.Get("/sessions/:id/layers", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_layers(req.path_params.at("id")));
        });
        server.Get("/sessions/:id/stats", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_stats(req.path_params.at("id")));
        });
        server.Get("/sessions/:id/manifest", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, get_manifest(req.path_params.at("id")));
        });
        server.Get("/images/:image", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, image_bytes(req.path_params.at("image")));
        });
    }

private:
    struct Slot {
        std::string id;
        std::int64_t created_at = 0;
        std::mutex edit_mu;
        std::atomic<int> pending{0};
        std::unique_ptr<EditSession> session;  // touched only under edit_mu
        mutable std::mutex snap_mu;
        std::shared_ptr<const SessionSnapshot> snapshot;
    };

    static int status_for(ErrorCode code) {
        switch (code) {
            case ErrorCode::NumericFailure:
            case ErrorCode::Io: return 500;
            default: return 422;
        }
    }

    template <typename F>
    static Response guarded(F&& f) {
        try {
            return f();
        } catch (const Error& e) {
            return Response::error(status_for(e.code()), e.what());
        } catch (const nlohmann::json::exception& e) {
            return Response::error(422, std::string("invalid payload: ") + e.what());
        } catch (const std::exception& e) {
            return Response::error(500, e.what());
        }
    }

    static nlohmann::json parse_body(const std::string& body) {
        auto j = nlohmann::json::parse(body, nullptr, false);
        require(!j.is_discarded() && j.is_object(), ErrorCode::Format, "request body must be a JSON object");
        return j;
    }

    static Response not_found(const std::string& id) { return Response::error(404, "unknown session " + id); }

    /// Accepts RLE JSON or base64 PBM at image or latent resolution.
    static Mask read_mask(const nlohmann::json& j, const SessionConfig& cfg) {
        Mask m;
        if (j.contains("mask"))
            m = mask_from_json(j["mask"]);
        else if (j.contains("mask_pbm_base64"))
            m = decode_pbm(base64_decode(j["mask_pbm_base64"].get<std::string>()));
        else
            fail(ErrorCode::InvalidArgument, "request has no mask");
        if (m.width() == cfg.image_width() && m.height() == cfg.image_height() && cfg.decode_scale != 1)
            m = downsample_mask(m, cfg.latent_width, cfg.latent_height);
        require(m.width() == cfg.latent_width && m.height() == cfg.latent_height, ErrorCode::DimensionMismatch,
                "mask must be at image or latent resolution");
        require(m.any(), ErrorCode::EmptyMask, "mask is empty at latent resolution");
        return m;
    }

    static nlohmann::json cost_json(const CostReport& c) {
        return {{"mode", c.mode},         {"denoiser_calls", c.denoiser_calls}, {"omega", c.omega},
                {"forward_cost", c.forward_cost}, {"efficiency_gain", c.efficiency_gain()}, {"wall_ms", c.wall_ms}};
    }

    std::shared_ptr<Slot> find(const std::string& id) const {
        std::shared_lock lock(registry_mu_);
        auto it = slots_.find(id);
        return it == slots_.end() ? nullptr : it->second;
    }

    std::shared_ptr<const SessionSnapshot> snapshot(const std::string& id) const {
        auto slot = find(id);
        if (!slot) return nullptr;
        std::lock_guard lock(slot->snap_mu);
        return slot->snapshot;
    }

    template <typename F>
    Response with_edit_lane(const std::string& id, F&& f) {
        auto slot = find(id);
        if (!slot) return not_found(id);
        if (slot->pending.fetch_add(1) >= config_.queue_limit) {
            slot->pending.fetch_sub(1);
            return Response::error(409, "an edit is already in progress for session " + id);
        }
        std::lock_guard lock(slot->edit_mu);
        auto r = guarded([&] { return f(*slot); });
        slot->pending.fetch_sub(1);
        return r;
    }

    /// Called with the slot's edit lane held (or before the slot is shared).
    void publish(Slot& slot) {
        const EditSession& s = *slot.session;
        auto snap = std::make_shared<SessionSnapshot>();
        RgbImage img = s.render();
        snap->image_id = image_checksum(img);
        {
            std::unique_lock lock(images_mu_);
            images_.try_emplace(snap->image_id, encode_ppm(img));
        }
        snap->layer_count = s.memory().size();
        snap->layers = nlohmann::json::array();
        for (std::size_t i = 0; i < s.memory().size(); ++i) {
            const auto& r = s.memory().record(i);
            snap->layers.push_back({{"index", i}, {"label", r.label}, {"mask", mask_to_json(r.mask)}});
        }
        snap->stats = nlohmann::json::array();
        for (const auto& c : s.stats()) snap->stats.push_back(cost_json(c));
        snap->manifest = s.manifest();
        std::lock_guard lock(slot.snap_mu);
        slot.snapshot = std::move(snap);
    }

    ServiceConfig config_;
    mutable std::shared_mutex registry_mu_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
    std::uint64_t counter_ = 0;
    mutable std::shared_mutex images_mu_;
    std::map<std::string, std::string> images_;
};

}  // namespace layeredit

#endif
