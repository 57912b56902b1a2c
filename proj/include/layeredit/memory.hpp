#ifndef LAYEREDIT_MEMORY_HPP
#define LAYEREDIT_MEMORY_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "mask.hpp"
#include "prompt.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace layeredit {

/// One editing step: prompt embedding, blended latent at every level t = 0..T
/// (`trajectory[t]`), and the step's mask.
struct LayerRecord {
    PromptEmbedding prompt;
    std::vector<LatentTensor> trajectory;
    Mask mask;
    std::string label;

    int steps() const { return static_cast<int>(trajectory.size()) - 1; }
    const LatentTensor& final_latent() const { return trajectory.front(); }

    std::size_t size_bytes() const {
        std::size_t n = 0;
        for (const auto& z : trajectory) n += z.size() * sizeof(float);
        n += prompt.vectors.data.size() * sizeof(float) + prompt.tokens.size() * sizeof(std::uint64_t);
        n += mask.words().size() * sizeof(std::uint64_t);
        return n;
    }

    std::uint64_t checksum() const {
        std::uint64_t h = fnv1a(label);
        auto bytes = [&](const void* p, std::size_t n) {
            h = fnv1a(std::span(static_cast<const unsigned char*>(p), n), h);
        };
        for (const auto& z : trajectory) bytes(z.values().data(), z.size() * sizeof(float));
        bytes(prompt.vectors.data.data(), prompt.vectors.data.size() * sizeof(float));
        bytes(prompt.tokens.data(), prompt.tokens.size() * sizeof(std::uint64_t));
        bytes(mask.words().data(), mask.words().size() * sizeof(std::uint64_t));
        return h;
    }
};

/// Ordered editing history; record 0 is the background. Records are shared
/// immutable values, so copying a LayerMemory is a cheap snapshot.
class LayerMemory {
public:
    LayerMemory(int steps, int channels, int height, int width)
        : steps_(steps), channels_(channels), height_(height), width_(width) {
        require(steps >= 1 && channels >= 1 && height >= 1 && width >= 1, ErrorCode::InvalidConfig,
                "memory dims must be positive");
    }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    int steps() const { return steps_; }
    int channels() const { return channels_; }
    int height() const { return height_; }
    int width() const { return width_; }

    /// Appends at index size(); earlier records are untouched.
    std::size_t append_layer(LayerRecord record) {
        check_record(record);
        if (records_.empty())
            require(record.mask.all(), ErrorCode::InvalidArgument, "background record mask must be all ones");
        records_.push_back(std::make_shared<const LayerRecord>(std::move(record)));
        return records_.size() - 1;
    }

    const LayerRecord& record(std::size_t i) const {
        require(i < records_.size(), ErrorCode::OutOfRange,
                "layer " + std::to_string(i) + " of " + std::to_string(records_.size()));
        return *records_[i];
    }

    const LatentTensor& latent_at(std::size_t i, int t) const {
        const auto& r = record(i);
        require(t >= 0 && t <= steps_, ErrorCode::OutOfRange, "timestep " + std::to_string(t) + " outside [0, T]");
        return r.trajectory[static_cast<std::size_t>(t)];
    }

    /// Removes layer i (> 0); later layers shift down by one.
    void remove_layer(std::size_t i) {
        require(i != 0, ErrorCode::InvalidArgument, "the background layer cannot be removed");
        require(i < records_.size(), ErrorCode::OutOfRange, "layer index out of range");
        records_.erase(records_.begin() + static_cast<std::ptrdiff_t>(i));
    }

    /// Swaps in a new record at index i (the old record object is not modified).
    void replace_layer(std::size_t i, LayerRecord record) {
        require(i < records_.size(), ErrorCode::OutOfRange, "layer index out of range");
        check_record(record);
        if (i == 0) require(record.mask.all(), ErrorCode::InvalidArgument, "background record mask must be all ones");
        records_[i] = std::make_shared<const LayerRecord>(std::move(record));
    }

    std::vector<Mask> masks() const {
        std::vector<Mask> out;
        for (const auto& r : records_) out.push_back(r->mask);
        return out;
    }

    std::vector<PromptEmbedding> prompts() const {
        std::vector<PromptEmbedding> out;
        for (const auto& r : records_) out.push_back(r->prompt);
        return out;
    }

    /// Bytes held by the history: a fixed header plus every record's tensors,
    /// embeddings and mask words.
    std::size_t memory_footprint() const {
        std::size_t n = sizeof(LayerMemory);
        for (const auto& r : records_) n += r->size_bytes();
        return n;
    }

private:
    void check_record(const LayerRecord& r) const {
        require(r.trajectory.size() == static_cast<std::size_t>(steps_) + 1, ErrorCode::DimensionMismatch,
                "trajectory length must be T+1");
        for (const auto& z : r.trajectory)
            require(z.channels() == channels_ && z.height() == height_ && z.width() == width_,
                    ErrorCode::DimensionMismatch, "trajectory tensor shape " + z.shape_string());
        require(r.mask.width() == width_ && r.mask.height() == height_, ErrorCode::DimensionMismatch,
                "record mask does not match latent grid");
        require(r.prompt.vectors.rows == r.prompt.tokens.size(), ErrorCode::InvalidArgument,
                "prompt embedding rows must equal token count");
    }

    int steps_, channels_, height_, width_;
    std::vector<std::shared_ptr<const LayerRecord>> records_;
};

}  // namespace layeredit

#endif
