#ifndef LAYEREDIT_PROMPT_HPP
#define LAYEREDIT_PROMPT_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace layeredit {

inline constexpr std::uint64_t kDefaultEmbeddingSeed = 0x5eed'0e3b'ed00ULL;

/// Lowercase whitespace tokenization, shared by prompt embedding and text metrics.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::istringstream in(lowered);
    std::vector<std::string> tokens;
    for (std::string tok; in >> tok;) tokens.push_back(std::move(tok));
    return tokens;
}

struct PromptEmbedding {
    std::string text;
    std::vector<std::uint64_t> tokens;
    Matrix vectors;  // tokens x d_model

    std::size_t token_count() const { return tokens.size(); }
    bool operator==(const PromptEmbedding&) const = default;
};

/// Stand-in text encoder: each token's row is a standard-normal vector drawn
/// from a generator keyed by (token hash, embedding seed).
inline PromptEmbedding embed_prompt(std::string_view text, std::size_t d_model,
                                    std::uint64_t embedding_seed = kDefaultEmbeddingSeed) {
    auto words = tokenize(text);
    require(!words.empty(), ErrorCode::InvalidArgument, "prompt text is empty");
    require(d_model > 0, ErrorCode::InvalidArgument, "d_model must be positive");
    PromptEmbedding p;
    p.text = std::string(text);
    p.vectors = Matrix(words.size(), d_model);
    for (std::size_t r = 0; r < words.size(); ++r) {
        auto id = fnv1a(words[r]);
        p.tokens.push_back(id);
        CounterRng rng(hash_combine(id, embedding_seed));
        for (std::size_t c = 0; c < d_model; ++c) p.vectors(r, c) = static_cast<float>(rng.normal());
    }
    return p;
}

/// Unconditional prompt for classifier-free guidance: one all-zero token.
inline PromptEmbedding null_prompt(std::size_t d_model) {
    PromptEmbedding p;
    p.tokens = {0};
    p.vectors = Matrix(1, d_model);
    return p;
}

}  // namespace layeredit

#endif
