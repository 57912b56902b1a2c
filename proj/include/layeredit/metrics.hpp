#ifndef LAYEREDIT_METRICS_HPP
#define LAYEREDIT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "prompt.hpp"

namespace layeredit {

namespace detail {
inline std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return counts;
}
}  // namespace detail

/// Clipped n-gram statistics for one candidate/reference pair.
struct BleuStats {
    std::vector<std::size_t> matches;  // index k-1 for k-grams
    std::vector<std::size_t> totals;
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;

    BleuStats& operator+=(const BleuStats& o) {
        for (std::size_t k = 0; k < matches.size(); ++k) {
            matches[k] += o.matches[k];
            totals[k] += o.totals[k];
        }
        candidate_length += o.candidate_length;
        reference_length += o.reference_length;
        return *this;
    }
};

inline BleuStats bleu_stats(std::string_view candidate, std::string_view reference, std::size_t max_n) {
    auto cand = tokenize(candidate);
    auto ref = tokenize(reference);
    require(!cand.empty() && !ref.empty(), ErrorCode::InvalidArgument, "BLEU needs non-empty texts");
    BleuStats s;
    s.candidate_length = cand.size();
    s.reference_length = ref.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
        auto cc = detail::ngram_counts(cand, n);
        auto rc = detail::ngram_counts(ref, n);
        std::size_t match = 0, total = 0;
        for (const auto& [gram, count] : cc) {
            total += count;
            auto it = rc.find(gram);
            if (it != rc.end()) match += std::min(count, it->second);
        }
        s.matches.push_back(match);
        s.totals.push_back(total);
    }
    return s;
}

/// BLEU-n from accumulated statistics: brevity penalty times the geometric
/// mean of clipped precisions 1..n, no smoothing.
inline double bleu_from_stats(const BleuStats& s, std::size_t n) {
    require(n >= 1 && n <= s.matches.size(), ErrorCode::OutOfRange, "BLEU order out of range");
    double log_sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (s.matches[k] == 0 || s.totals[k] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(s.matches[k]) / static_cast<double>(s.totals[k]));
    }
    double bp = s.candidate_length > s.reference_length
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(s.reference_length) / static_cast<double>(s.candidate_length));
    return bp * std::exp(log_sum / static_cast<double>(n));
}

inline double bleu(std::string_view candidate, std::string_view reference, std::size_t n) {
    return bleu_from_stats(bleu_stats(candidate, reference, n), n);
}

/// Corpus BLEU over candidate/reference pairs (statistics summed before the ratio).
inline double corpus_bleu(const std::vector<std::pair<std::string, std::string>>& pairs, std::size_t n) {
    require(!pairs.empty(), ErrorCode::InvalidArgument, "corpus BLEU needs at least one pair");
    BleuStats total = bleu_stats(pairs.front().first, pairs.front().second, n);
    for (std::size_t i = 1; i < pairs.size(); ++i) total += bleu_stats(pairs[i].first, pairs[i].second, n);
    return bleu_from_stats(total, n);
}

struct BleuScores {
    double bleu2 = 0, bleu3 = 0, bleu4 = 0;
};

inline BleuScores bleu_2_3_4(std::string_view candidate, std::string_view reference) {
    auto s = bleu_stats(candidate, reference, 4);
    return {bleu_from_stats(s, 2), bleu_from_stats(s, 3), bleu_from_stats(s, 4)};
}

/// METEOR restricted to exact unigram matches: Fmean with recall weighted 9:1
/// and a fragmentation penalty 0.5 (chunks / matches)^3. The alignment takes
/// each candidate word left to right, preferring the reference position that
/// extends the current chunk, otherwise the leftmost unused one.
inline double meteor_exact(std::string_view candidate, std::string_view reference) {
    auto cand = tokenize(candidate);
    auto ref = tokenize(reference);
    require(!cand.empty() && !ref.empty(), ErrorCode::InvalidArgument, "METEOR needs non-empty texts");
    std::vector<bool> used(ref.size(), false);
    std::size_t matches = 0, chunks = 0;
    long prev = -2;
    for (const auto& word : cand) {
        long pick = -1;
        if (prev >= 0 && static_cast<std::size_t>(prev + 1) < ref.size() && !used[static_cast<std::size_t>(prev + 1)] &&
            ref[static_cast<std::size_t>(prev + 1)] == word)
            pick = prev + 1;
        for (std::size_t j = 0; pick < 0 && j < ref.size(); ++j)
            if (!used[j] && ref[j] == word) pick = static_cast<long>(j);
        if (pick < 0) {
            prev = -2;
            continue;
        }
        used[static_cast<std::size_t>(pick)] = true;
        ++matches;
        if (pick != prev + 1 || prev < 0) ++chunks;
        prev = pick;
    }
    if (matches == 0) return 0.0;
    double p = static_cast<double>(matches) / static_cast<double>(cand.size());
    double r = static_cast<double>(matches) / static_cast<double>(ref.size());
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

}  // namespace layeredit

#endif
