#ifndef LAYEREDIT_BCG_HPP
#define LAYEREDIT_BCG_HPP

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "denoiser.hpp"
#include "error.hpp"
#include "mask.hpp"
#include "memory.hpp"
#include "tensor.hpp"

namespace layeredit {

/// Writes `fresh` inside the mask and copies `previous` everywhere else.
inline LatentTensor bcg_blend(const LatentTensor& fresh, const LatentTensor& previous, const Mask& mask) {
    fresh.check_shape(previous);
    fresh.check_mask(mask);
    LatentTensor out = previous;
    for (std::size_t cell = 0; cell < fresh.cells(); ++cell)
        if (mask.test(cell))
            for (int c = 0; c < fresh.channels(); ++c) out.at(c, cell) = fresh.at(c, cell);
    return out;
}

enum class BlendMode {
    Bcg,             // previous-layer latents read from memory
    LatentBlending,  // previous-layer latents re-derived by forward-noising the previous result
};

inline std::string to_string(BlendMode m) { return m == BlendMode::Bcg ? "bcg" : "lb"; }

/// Operation counters for one edit (or an aggregate of edits).
/// omega: denoiser cost units (calls x blocks x passes); forward_cost: forward
/// passes over the previous result.
struct CostReport {
    std::string mode;
    std::uint64_t edits = 0;
    std::uint64_t denoiser_calls = 0;
    std::uint64_t omega = 0;
    std::uint64_t forward_cost = 0;
    double wall_ms = 0;

    double r() const { return omega == 0 ? 0.0 : static_cast<double>(forward_cost) / static_cast<double>(omega); }
    double efficiency_gain() const {
        return omega == 0 ? 1.0 : static_cast<double>(omega + forward_cost) / static_cast<double>(omega);
    }

    CostReport& operator+=(const CostReport& o) {
        if (mode.empty()) mode = o.mode;
        edits += o.edits;
        denoiser_calls += o.denoiser_calls;
        omega += o.omega;
        forward_cost += o.forward_cost;
        wall_ms += o.wall_ms;
        return *this;
    }
};

/// Analytic cost model: Omega = T * L, Cost_LB = (1 + r) Omega, Cost_BCG = Omega.
struct AnalyticCost {
    double omega = 0;
    double cost_lb = 0;
    double cost_bcg = 0;
    double efficiency_gain = 1;
};

inline AnalyticCost cost_model(int steps, int layers, int height, int width, double r) {
    require(steps > 0 && layers > 0 && height > 0 && width > 0, ErrorCode::InvalidArgument,
            "cost model inputs must be positive");
    require(r >= 0.0 && r < 1.0, ErrorCode::OutOfRange, "r must lie in [0, 1)");
    AnalyticCost c;
    c.omega = static_cast<double>(steps) * static_cast<double>(layers);
    c.cost_bcg = c.omega;
    c.cost_lb = c.omega + r * c.omega;
    c.efficiency_gain = 1.0 + r;
    return c;
}

/// Per-step inputs captured during an edit, for cross-checks against memory.
struct EditTrace {
    std::vector<LatentTensor> blend_targets;  // indexed by level t
};

struct EditResult {
    LayerRecord record;
    CostReport cost;
};

inline constexpr std::uint64_t kLbNoiseTag = 0x1b00'0000'0002ULL;

/// Denoises one new layer over the existing history. Each level t = T..0 is
/// blended against the previous layer's latent at that level; the blended
/// latent is what gets stored and what the next step denoises.
inline EditResult run_edit_denoise(const LayerMemory& mem, const PromptEmbedding& prompt, const std::string& label,
                                   const Mask& mask, const Denoiser& denoiser, BlendMode mode, std::uint64_t seed,
                                   std::uint64_t stream, EditTrace* trace = nullptr) {
    require(!mem.empty(), ErrorCode::InvalidArgument, "session has no background layer");
    require(mask.width() == mem.width() && mask.height() == mem.height(), ErrorCode::DimensionMismatch,
            "edit mask does not match latent grid");
    require(mask.any(), ErrorCode::EmptyMask, "edit mask is empty");
    const int steps = mem.steps();
    require(denoiser.config().steps == steps, ErrorCode::InvalidConfig, "denoiser steps differ from memory");

    auto start = std::chrono::steady_clock::now();
    auto masks = mem.masks();
    masks.push_back(mask);
    auto prompts = mem.prompts();
    prompts.push_back(prompt);
    RegionPartition part = partition(masks);
    std::size_t prev = mem.size() - 1;

    CostReport cost;
    cost.mode = to_string(mode);
    cost.edits = 1;

    const LatentTensor& prev_final = mem.latent_at(prev, 0);
    LatentTensor lb_target;
    auto previous_at = [&](int t) -> const LatentTensor& {
        if (mode == BlendMode::Bcg || t == 0) return mem.latent_at(prev, t);
        LatentTensor eps = sample_normal_latent(hash_combine(seed, kLbNoiseTag, stream), static_cast<std::uint64_t>(t),
                                                prev_final.channels(), prev_final.height(), prev_final.width());
        lb_target = forward_noise(prev_final, eps, t, steps);
        ++cost.forward_cost;
        return lb_target;
    };

    LayerRecord rec;
    rec.prompt = prompt;
    rec.mask = mask;
    rec.label = label;
    rec.trajectory.resize(static_cast<std::size_t>(steps) + 1);
    if (trace) trace->blend_targets.assign(static_cast<std::size_t>(steps) + 1, {});

    auto store = [&](int t, const LatentTensor& fresh) {
        const LatentTensor& target = previous_at(t);
        if (trace) trace->blend_targets[static_cast<std::size_t>(t)] = target;
        rec.trajectory[static_cast<std::size_t>(t)] = bcg_blend(fresh, target, mask);
    };

    store(steps, sample_init_latent(seed, stream, mem.channels(), mem.height(), mem.width()));
    for (int t = steps; t >= 1; --t) {
        const LatentTensor& z = rec.trajectory[static_cast<std::size_t>(t)];
        LatentTensor pred = denoiser.predict(z, t, part, prompts);
        ++cost.denoiser_calls;
        store(t - 1, scheduler_step(z, pred, t, steps));
    }
    cost.omega = cost.denoiser_calls * denoiser.cost_units_per_call();
    cost.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {std::move(rec), cost};
}

}  // namespace layeredit

#endif
