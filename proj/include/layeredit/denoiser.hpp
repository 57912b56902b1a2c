#ifndef LAYEREDIT_DENOISER_HPP
#define LAYEREDIT_DENOISER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attention.hpp"
#include "error.hpp"
#include "mask.hpp"
#include "prompt.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace layeredit {

struct DenoiserConfig {
    int blocks = 4;
    int d_model = 64;
    int heads = 4;
    int steps = 20;  // T
    double guidance_scale = 7.5;
    std::uint64_t weight_seed = 0;

    void validate() const {
        require(blocks >= 1, ErrorCode::InvalidConfig, "blocks must be >= 1");
        require(d_model >= 1 && heads >= 1 && d_model % heads == 0, ErrorCode::InvalidConfig,
                "d_model must be a positive multiple of heads");
        require(steps >= 2, ErrorCode::InvalidConfig, "steps must be >= 2");
        require(std::isfinite(guidance_scale), ErrorCode::InvalidConfig, "guidance scale must be finite");
    }

    bool operator==(const DenoiserConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Scheduler

/// Cumulative signal level, linear in t with abar(0) = 1 and abar(T) = 0.
inline double alpha_bar(int t, int steps) { return 1.0 - static_cast<double>(t) / static_cast<double>(steps); }

/// z_{t-1} = a * prediction + (1 - a) * z_t with a = abar(t-1); the final step
/// (t = 1) returns the prediction exactly.
inline LatentTensor scheduler_step(const LatentTensor& z_t, const LatentTensor& prediction, int t, int steps) {
    require(t >= 1 && t <= steps, ErrorCode::OutOfRange, "timestep " + std::to_string(t) + " outside [1, T]");
    z_t.check_shape(prediction);
    if (t == 1) return prediction;
    auto a = static_cast<float>(alpha_bar(t - 1, steps));
    LatentTensor out = z_t;
    auto o = out.values();
    auto p = prediction.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a * p[i] + (1.0f - a) * o[i];
    return out;
}

/// Forward noising of a clean latent to level t: sqrt(abar) x0 + sqrt(1 - abar) eps.
inline LatentTensor forward_noise(const LatentTensor& x0, const LatentTensor& eps, int t, int steps) {
    require(t >= 0 && t <= steps, ErrorCode::OutOfRange, "timestep outside [0, T]");
    x0.check_shape(eps);
    auto ab = alpha_bar(t, steps);
    auto s = static_cast<float>(std::sqrt(ab));
    auto n = static_cast<float>(std::sqrt(1.0 - ab));
    LatentTensor out = x0;
    auto o = out.values();
    auto e = eps.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s * o[i] + n * e[i];
    return out;
}

inline LatentTensor cfg_combine(const LatentTensor& uncond, const LatentTensor& cond, double scale) {
    uncond.check_shape(cond);
    auto s = static_cast<float>(scale);
    LatentTensor out = uncond;
    auto o = out.values();
    auto c = cond.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] + s * (c[i] - o[i]);
    return out;
}

/// Standard-normal latent from a counter-based stream keyed by (seed, stream).
inline LatentTensor sample_normal_latent(std::uint64_t seed, std::uint64_t stream, int channels, int height,
                                         int width) {
    LatentTensor z(channels, height, width);
    CounterRng rng(hash_combine(seed, stream));
    for (auto& v : z.values()) v = static_cast<float>(rng.normal());
    return z;
}

inline constexpr std::uint64_t kInitNoiseTag = 0x1a7e'0000'0001ULL;

/// Initial noise for the layer at `layer` in a session seeded with `seed`.
inline LatentTensor sample_init_latent(std::uint64_t seed, std::uint64_t layer, int channels, int height, int width) {
    return sample_normal_latent(hash_combine(seed, kInitNoiseTag), layer, channels, height, width);
}

/// Sinusoidal timestep embedding of width d.
inline std::vector<float> timestep_embedding(int t, std::size_t d) {
    std::vector<float> e(d);
    for (std::size_t i = 0; i < d; i += 2) {
        double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
        e[i] = static_cast<float>(std::sin(t * freq));
        if (i + 1 < d) e[i + 1] = static_cast<float>(std::cos(t * freq));
    }
    return e;
}

// ---------------------------------------------------------------------------
// Backends

/// A per-step noise predictor conditioned on a region partition and one
/// prompt per partition owner (`prompts[owner]`).
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::string_view name() const = 0;
    virtual const DenoiserConfig& config() const = 0;
    virtual LatentTensor predict(const LatentTensor& z, int t, const RegionPartition& part,
                                 std::span<const PromptEmbedding> prompts) const = 0;
    /// Cost units one `predict` call is charged: blocks x network passes.
    virtual std::uint64_t cost_units_per_call() const = 0;
};

namespace detail {
inline Matrix random_matrix(std::uint64_t seed, std::uint64_t id, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    CounterRng rng(hash_combine(seed, id));
    auto std_dev = 1.0 / std::sqrt(static_cast<double>(rows));
    for (auto& v : m.data) v = static_cast<float>(rng.normal() * std_dev);
    return m;
}

inline float gelu(float x) {
    constexpr float k = 0.7978845608028654f;  // sqrt(2 / pi)
    return 0.5f * x * (1.0f + std::tanh(k * (x + 0.044715f * x * x * x)));
}
}  // namespace detail

/// Minimal diffusion transformer with seeded random weights. Patch size 1: one
/// token per latent cell. Each block is pre-LN self-attention, MQD
/// cross-attention and a GELU feedforward, all residual.
class ToyDit final : public Denoiser {
public:
    struct Block {
        LayerNormParams ln_self, ln_cross, ln_ff;
        AttentionWeights self_attn, cross_attn;
        Matrix ff_in, ff_out;  // d x 4d, 4d x d
        std::vector<float> ff_in_bias, ff_out_bias;
    };

    struct Weights {
        Matrix in_proj;  // C x d
        std::vector<float> in_bias;
        std::vector<Block> blocks;
        LayerNormParams final_ln;
        Matrix out_proj;  // d x C
        std::vector<float> out_bias;
    };

    ToyDit(DenoiserConfig cfg, int channels) : cfg_(cfg), channels_(channels) {
        cfg_.validate();
        require(channels >= 1, ErrorCode::InvalidConfig, "channels must be >= 1");
        auto d = static_cast<std::size_t>(cfg_.d_model);
        auto c = static_cast<std::size_t>(channels);
        std::uint64_t id = 0;
        auto next = [&](std::size_t r, std::size_t cols) { return detail::random_matrix(cfg_.weight_seed, id++, r, cols); };
        auto ln = [&] { return LayerNormParams{std::vector<float>(d, 1.0f), std::vector<float>(d, 0.0f)}; };
        w_.in_proj = next(c, d);
        w_.in_bias.assign(d, 0.0f);
        for (int k = 0; k < cfg_.blocks; ++k) {
            Block b;
            b.ln_self = ln();
            b.ln_cross = ln();
            b.ln_ff = ln();
            b.self_attn = {next(d, d), next(d, d), next(d, d), next(d, d)};
            b.cross_attn = {next(d, d), next(d, d), next(d, d), next(d, d)};
            b.ff_in = next(d, 4 * d);
            b.ff_out = next(4 * d, d);
            b.ff_in_bias.assign(4 * d, 0.0f);
            b.ff_out_bias.assign(d, 0.0f);
            w_.blocks.push_back(std::move(b));
        }
        w_.final_ln = ln();
        w_.out_proj = next(d, c);
        w_.out_bias.assign(c, 0.0f);
    }

    std::string_view name() const override { return "toy-dit"; }
    const DenoiserConfig& config() const override { return cfg_; }
    const Weights& weights() const { return w_; }
    int channels() const { return channels_; }
    std::uint64_t cost_units_per_call() const override {
        return static_cast<std::uint64_t>(cfg_.blocks) * (cfg_.guidance_scale == 1.0 ? 1 : 2);
    }

    /// One conditional pass through all K blocks. `probes`, when given,
    /// receives the MQD diagnostics of every block.
    LatentTensor forward(const LatentTensor& z, int t, const RegionPartition& part,
                         std::span<const PromptEmbedding> prompts,
                         std::vector<AttentionProbe>* probes = nullptr) const {
        require(z.channels() == channels_, ErrorCode::DimensionMismatch, "latent channels do not match denoiser");
        require(static_cast<std::size_t>(part.width()) == static_cast<std::size_t>(z.width()) &&
                    part.height() == z.height(),
                ErrorCode::DimensionMismatch, "partition does not match latent grid");
        z.check_finite("denoiser input");
        auto d = static_cast<std::size_t>(cfg_.d_model);
        auto heads = static_cast<std::size_t>(cfg_.heads);
        std::size_t n = z.cells();

        Matrix x(n, static_cast<std::size_t>(channels_));
        for (int c = 0; c < channels_; ++c)
            for (std::size_t cell = 0; cell < n; ++cell) x(cell, static_cast<std::size_t>(c)) = z.at(c, cell);
        Matrix h = matmul(x, w_.in_proj);
        add_row_bias(h, w_.in_bias);
        add_row_bias(h, timestep_embedding(t, d));

        if (probes) probes->assign(w_.blocks.size(), {});
        for (std::size_t k = 0; k < w_.blocks.size(); ++k) {
            const auto& b = w_.blocks[k];
            add_in_place(h, self_attention(layer_norm(h, b.ln_self), b.self_attn, heads));
            add_in_place(h, mqd_cross_attention(layer_norm(h, b.ln_cross), part, prompts, b.cross_attn, heads,
                                                probes ? &(*probes)[k] : nullptr));
            Matrix f = matmul(layer_norm(h, b.ln_ff), b.ff_in);
            add_row_bias(f, b.ff_in_bias);
            for (auto& v : f.data) v = detail::gelu(v);
            Matrix g = matmul(f, b.ff_out);
            add_row_bias(g, b.ff_out_bias);
            add_in_place(h, g);
            for (float v : h.data)
                require(std::isfinite(v), ErrorCode::NumericFailure, "non-finite activation in block " + std::to_string(k));
        }
        Matrix out = matmul(layer_norm(h, w_.final_ln), w_.out_proj);
        add_row_bias(out, w_.out_bias);

        LatentTensor pred(channels_, z.height(), z.width());
        for (int c = 0; c < channels_; ++c)
            for (std::size_t cell = 0; cell < n; ++cell) pred.at(c, cell) = out(cell, static_cast<std::size_t>(c));
        return pred;
    }

    /// Guided prediction: the unconditional branch routes every token to the null prompt.
    LatentTensor predict(const LatentTensor& z, int t, const RegionPartition& part,
                         std::span<const PromptEmbedding> prompts) const override {
        LatentTensor cond = forward(z, t, part, prompts);
        if (cfg_.guidance_scale == 1.0) return cond;
        PromptEmbedding null = null_prompt(static_cast<std::size_t>(cfg_.d_model));
        LatentTensor uncond = forward(z, t, single_region_partition(z.width(), z.height()), std::span(&null, 1));
        LatentTensor out = cfg_combine(uncond, cond, cfg_.guidance_scale);
        out.check_finite("guided prediction");
        return out;
    }

private:
    DenoiserConfig cfg_;
    int channels_;
    Weights w_;
};

/// Prompt-keyed pattern value at cell (x, y): a flat color with a stripe or dot
/// texture in channels 0-2 and a label id in channel 3.
inline float procedural_pattern(std::string_view label, int x, int y, int channel) {
    std::uint64_t h = fnv1a(label);
    if (channel == 3) return static_cast<float>(((h >> 32) & 0xffff) / 65535.0 * 2.0 - 1.0);
    if (channel > 3) return 0.0f;
    double base = ((h >> (channel * 16)) & 0xffff) / 65535.0 * 1.6 - 0.8;
    int period = 2 + static_cast<int>((h >> 52) & 3);
    bool on = false;
    switch ((h >> 48) & 3) {
        case 0: break;
        case 1: on = (y / period) % 2 == 0; break;
        case 2: on = ((x + y) / period) % 2 == 0; break;
        case 3: on = x % period == 0 && y % period == 0; break;
    }
    return static_cast<float>(base + (on ? 0.15 : -0.05));
}

/// Deterministic stand-in denoiser: every region predicts its owner's pattern,
/// faded in over the first half of the schedule.
class ProceduralDenoiser final : public Denoiser {
public:
    explicit ProceduralDenoiser(DenoiserConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    std::string_view name() const override { return "procedural"; }
    const DenoiserConfig& config() const override { return cfg_; }
    std::uint64_t cost_units_per_call() const override { return static_cast<std::uint64_t>(cfg_.blocks); }

    LatentTensor predict(const LatentTensor& z, int t, const RegionPartition& part,
                         std::span<const PromptEmbedding> prompts) const override {
        require(part.width() == z.width() && part.height() == z.height(), ErrorCode::DimensionMismatch,
                "partition does not match latent grid");
        double fade = std::min(1.0, static_cast<double>(cfg_.steps - t) / cfg_.steps * 2.0);
        LatentTensor pred(z.channels(), z.height(), z.width());
        for (const auto& e : part.entries) {
            require(e.owner < prompts.size(), ErrorCode::InvalidArgument,
                    "no label for partition owner " + std::to_string(e.owner));
            const auto& label = prompts[e.owner].text;
            for (int y = 0; y < z.height(); ++y)
                for (int x = 0; x < z.width(); ++x)
                    if (e.region.test(x, y))
                        for (int c = 0; c < z.channels(); ++c)
                            pred.at(c, y, x) = static_cast<float>(fade * procedural_pattern(label, x, y, c));
        }
        return pred;
    }

private:
    DenoiserConfig cfg_;
};

inline std::shared_ptr<const Denoiser> make_denoiser(std::string_view backend, const DenoiserConfig& cfg,
                                                     int channels) {
    if (backend == "toy-dit") return std::make_shared<ToyDit>(cfg, channels);
    if (backend == "procedural") return std::make_shared<ProceduralDenoiser>(cfg);
    fail(ErrorCode::InvalidConfig, "unknown denoiser backend '" + std::string(backend) + "'");
}

}  // namespace layeredit

#endif
