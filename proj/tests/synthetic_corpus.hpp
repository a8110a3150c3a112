#pragma once

// Desk-scale stand-in for the shared-task corpus: "human" documents are
// spans sampled from a bundled public-domain excerpt, "AI" documents come
// from an order-2 character Markov chain fitted to the same excerpt. The
// generator is fully seeded, so the corpus is identical across runs.

#include <array>
#include <map>
#include <string>
#include <vector>

#include "noisedetect/corpus.hpp"
#include "noisedetect/noising.hpp"
#include "noisedetect/rng.hpp"

namespace synthetic {

inline constexpr const char* kAiClassName = "markov-order2";

class CharMarkov {
public:
    explicit CharMarkov(const std::string& corpus) {
        for (std::size_t i = 0; i + 2 < corpus.size(); ++i) {
            const std::string context = corpus.substr(i, 2);
            ++transitions_[context][corpus[i + 2]];
            contexts_.push_back(context);
        }
    }

    std::string generate(noisedetect::SplitMix64& rng, std::size_t target_words) const {
        std::string context = random_context(rng);
        std::string out = context;
        const std::size_t char_cap = 24 * target_words + 64;
        while (noisedetect::word_count(out) < target_words + 1 && out.size() < char_cap) {
            const auto it = transitions_.find(context);
            if (it == transitions_.end()) {
                context = random_context(rng);
                continue;
            }
            std::uint64_t total = 0;
            for (const auto& [ch, count] : it->second) total += count;
            std::uint64_t r = rng.next_below(total);
            char next = it->second.begin()->first;
            for (const auto& [ch, count] : it->second) {
                if (r < count) {
                    next = ch;
                    break;
                }
                r -= count;
            }
            out += next;
            context = out.substr(out.size() - 2, 2);
        }
        // Trim to exactly target_words tokens, single-spaced.
        const auto tokens = noisedetect::tokenize_words(out).tokens;
        std::string text;
        const std::size_t keep = std::min(tokens.size(), target_words);
        for (std::size_t i = 0; i < keep; ++i) {
            if (i > 0) text += ' ';
            text += tokens[i];
        }
        return text.empty() ? "aa" : text;
    }

private:
    std::string random_context(noisedetect::SplitMix64& rng) const {
        return contexts_[static_cast<std::size_t>(rng.next_below(contexts_.size()))];
    }

    std::map<std::string, std::map<char, std::uint64_t>> transitions_;
    std::vector<std::string> contexts_;
};

/// `docs_per_class` human and AI documents, interleaved, labeled on both
/// label_a and label_b.
inline noisedetect::Dataset make_corpus(const std::string& excerpt, std::size_t docs_per_class,
                                        std::size_t min_words, std::size_t max_words,
                                        std::uint64_t seed) {
    const auto excerpt_words = noisedetect::tokenize_words(excerpt).tokens;
    const CharMarkov markov(excerpt);
    noisedetect::SplitMix64 rng(seed);

    std::vector<noisedetect::LabeledDocument> docs;
    docs.reserve(docs_per_class * 2);
    for (std::size_t i = 0; i < docs_per_class * 2; ++i) {
        const std::size_t words =
            min_words + static_cast<std::size_t>(rng.next_below(max_words - min_words + 1));
        const bool ai = i % 2 == 1;
        std::string text;
        if (ai) {
            text = markov.generate(rng, words);
        } else {
            const std::size_t span = std::min(words, excerpt_words.size());
            const std::size_t start =
                static_cast<std::size_t>(rng.next_below(excerpt_words.size() - span + 1));
            for (std::size_t w = 0; w < span; ++w) {
                if (w > 0) text += ' ';
                text += excerpt_words[start + w];
            }
        }
        docs.push_back({std::move(text), ai ? 1 : 0,
                        std::string(ai ? kAiClassName : "Human_story")});
    }
    return noisedetect::dataset_from_documents(std::move(docs));
}

} // namespace synthetic
