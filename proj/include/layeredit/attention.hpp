#ifndef LAYEREDIT_ATTENTION_HPP
#define LAYEREDIT_ATTENTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "error.hpp"
#include "mask.hpp"
#include "prompt.hpp"
#include "tensor.hpp"

namespace layeredit {

struct AttentionWeights {
    Matrix wq, wk, wv, wo;  // d_model x d_model each
};

struct LayerNormParams {
    std::vector<float> gamma, beta;
};

inline Matrix layer_norm(const Matrix& x, const LayerNormParams& p, float eps = 1e-5f) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto r = x.row(i);
        double mean = 0;
        for (float v : r) mean += v;
        mean /= static_cast<double>(x.cols);
        double var = 0;
        for (float v : r) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.cols);
        auto inv = static_cast<float>(1.0 / std::sqrt(var + eps));
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = (r[j] - static_cast<float>(mean)) * inv * p.gamma[j] + p.beta[j];
    }
    return out;
}

/// Multi-head scaled dot-product attention of q over (k, v), all already
/// projected. When `probs` is non-null it receives one n x m matrix per head.
inline Matrix attend(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                     std::vector<Matrix>* probs = nullptr) {
    require(q.cols == k.cols && k.cols == v.cols && k.rows == v.rows, ErrorCode::DimensionMismatch,
            "attention operand dims");
    require(heads > 0 && q.cols % heads == 0, ErrorCode::InvalidConfig, "d_model must be divisible by heads");
    std::size_t dh = q.cols / heads;
    auto scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));
    Matrix out(q.rows, q.cols);
    if (probs) probs->assign(heads, Matrix(q.rows, k.rows));
    std::vector<float> logits(k.rows), kh(k.rows * dh), vh(v.rows * dh), acc(dh);
    for (std::size_t h = 0; h < heads; ++h) {
        std::size_t off = h * dh;
        for (std::size_t j = 0; j < k.rows; ++j)
            for (std::size_t c = 0; c < dh; ++c) {
                kh[j * dh + c] = k(j, off + c);
                vh[j * dh + c] = v(j, off + c);
            }
        for (std::size_t i = 0; i < q.rows; ++i) {
            const float* qi = q.data.data() + i * q.cols + off;
            float mx = -std::numeric_limits<float>::infinity();
            for (std::size_t j = 0; j < k.rows; ++j) {
                const float* kj = kh.data() + j * dh;
                float s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                logits[j] = s * scale;
                mx = std::max(mx, logits[j]);
            }
            float sum = 0;
            for (auto& l : logits) {
                l = std::exp(l - mx);
                sum += l;
            }
            for (auto& l : logits) l /= sum;
            std::fill(acc.begin(), acc.end(), 0.0f);
            for (std::size_t j = 0; j < k.rows; ++j) {
                float pj = logits[j];
                const float* vj = vh.data() + j * dh;
                for (std::size_t c = 0; c < dh; ++c) acc[c] += pj * vj[c];
            }
            std::copy(acc.begin(), acc.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * out.cols + off));
            if (probs)
                std::copy(logits.begin(), logits.end(), (*probs)[h].data.begin() + static_cast<std::ptrdiff_t>(i * k.rows));
        }
    }
    return out;
}

inline Matrix self_attention(const Matrix& x, const AttentionWeights& w, std::size_t heads) {
    return matmul(attend(matmul(x, w.wq), matmul(x, w.wk), matmul(x, w.wv), heads), w.wo);
}

/// Plain cross-attention of every query row over one prompt.
inline Matrix cross_attention(const Matrix& x, const Matrix& prompt, const AttentionWeights& w, std::size_t heads,
                              std::vector<Matrix>* probs = nullptr) {
    return matmul(attend(matmul(x, w.wq), matmul(prompt, w.wk), matmul(prompt, w.wv), heads, probs), w.wo);
}

/// Diagnostics captured from one MQD call. Keys of all prompts are laid out
/// back to back (owner 0 first) so a row shows where attention mass went.
struct AttentionProbe {
    std::vector<std::size_t> key_offset;  // per owner
    std::size_t total_keys = 0;
    std::vector<Matrix> weights;          // per head: tokens x total_keys
    std::vector<int> write_count;         // per token
    std::vector<std::size_t> owner;       // per token
};

/// Region-routed cross-attention: tokens in each partition region attend only
/// to their owner's prompt; results are scattered back to their positions so
/// every token is written exactly once.
inline Matrix mqd_cross_attention(const Matrix& tokens, const RegionPartition& part,
                                  std::span<const PromptEmbedding> prompts, const AttentionWeights& w,
                                  std::size_t heads, AttentionProbe* probe = nullptr) {
    require(part.entries.front().region.size() == tokens.rows, ErrorCode::DimensionMismatch,
            "partition does not match token grid");
    Matrix out(tokens.rows, tokens.cols);
    std::vector<int> writes(tokens.rows, 0);
    if (probe) {
        probe->key_offset.assign(prompts.size(), 0);
        probe->total_keys = 0;
        for (std::size_t o = 0; o < prompts.size(); ++o) {
            probe->key_offset[o] = probe->total_keys;
            probe->total_keys += prompts[o].vectors.rows;
        }
        probe->weights.assign(heads, Matrix(tokens.rows, probe->total_keys));
        probe->owner.assign(tokens.rows, SIZE_MAX);
    }
    for (const auto& entry : part.entries) {
        require(entry.owner < prompts.size(), ErrorCode::InvalidArgument,
                "no prompt for partition owner " + std::to_string(entry.owner));
        std::vector<std::size_t> cells;
        for (std::size_t c = 0; c < entry.region.size(); ++c)
            if (entry.region.test(c)) cells.push_back(c);
        if (cells.empty()) continue;
        Matrix q(cells.size(), tokens.cols);
        for (std::size_t r = 0; r < cells.size(); ++r) std::ranges::copy(tokens.row(cells[r]), q.row(r).begin());
        std::vector<Matrix> probs;
        Matrix res = cross_attention(q, prompts[entry.owner].vectors, w, heads, probe ? &probs : nullptr);
        for (std::size_t r = 0; r < cells.size(); ++r) {
            std::ranges::copy(res.row(r), out.row(cells[r]).begin());
            ++writes[cells[r]];
        }
        if (probe) {
            std::size_t off = probe->key_offset[entry.owner];
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t r = 0; r < cells.size(); ++r)
                    for (std::size_t kk = 0; kk < probs[h].cols; ++kk)
                        probe->weights[h](cells[r], off + kk) = probs[h](r, kk);
            for (auto c : cells) probe->owner[c] = entry.owner;
        }
    }
    for (auto n : writes) require(n == 1, ErrorCode::InvalidArgument, "partition does not cover every token exactly once");
    if (probe) probe->write_count = std::move(writes);
    return out;
}

}  // namespace layeredit

#endif
