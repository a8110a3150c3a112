#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "noisedetect/corpus.hpp"
#include "noisedetect/rng.hpp"

namespace noisedetect {

enum class NoiseKind {
    junk_injection,
    unigram,
    blank,
    eda_swap,
    eda_delete,
    eda_insert,
    eda_synonym,
};

const char* noise_kind_name(NoiseKind kind);
std::optional<NoiseKind> parse_noise_kind(const std::string& name);

/// Parameters of one noising transform. `rate` is the fraction of word
/// positions affected; junk words are lowercase a-z with lengths drawn
/// uniformly from [junk_len_min, junk_len_max].
struct NoiseSpec {
    NoiseKind kind = NoiseKind::junk_injection;
    double rate = 0.10;
    int junk_len_min = 3;
    int junk_len_max = 8;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> lexicon_path; // eda_synonym only

    void validate() const;
};

/// Whitespace-delimited tokens plus the original inter-token whitespace.
/// whitespace has tokens.size() + 1 entries (leading, between each pair,
/// trailing); detokenize() reproduces the original text byte-exactly.
struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<std::string> whitespace;

    std::string detokenize() const;
};

/// Split on ASCII whitespace (space, \t, \n, \r, \v, \f).
TokenSequence tokenize_words(std::string_view text);
std::size_t word_count(std::string_view text);

/// Number of positions a rate-γ transform touches in an n-word document:
/// max(1, round(γ·n)), round half up.
std::size_t affected_count(double rate, std::size_t n_words);

/// Random lowercase a-z word with length uniform in [len_min, len_max].
std::string generate_junk_word(SplitMix64& rng, int len_min, int len_max);

/// Token -> count table for unigram noising, in a fixed order so sampling is
/// deterministic.
using UnigramTable = std::vector<std::pair<std::string, std::uint64_t>>;
UnigramTable build_unigram_table(const Dataset& dataset);

/// Synonym lexicon: one line per entry, `word<TAB>syn1,syn2,...`.
struct SynonymLexicon {
    std::map<std::string, std::vector<std::string>> entries;

    /// Synonyms for a token: exact match first, then ASCII-lowercased.
    const std::vector<std::string>* find(const std::string& token) const;
};

SynonymLexicon load_synonym_lexicon(const std::filesystem::path& path);

const std::vector<std::string>& english_stopwords();

/// Insert k = max(1, round(rate·n)) junk words at k distinct word gaps
/// (ends included), chosen uniformly without replacement. Original words
/// keep their order; insertions are single-space separated from neighbors,
/// untouched gaps keep their original whitespace.
std::string inject_junk(std::string_view text, const NoiseSpec& spec);

/// Replace each token with probability rate by a token sampled
/// proportionally to vocab counts.
std::string unigram_noise(std::string_view text, const NoiseSpec& spec, const UnigramTable& vocab);

/// Replace each token with probability rate by the placeholder "_".
std::string blank_noise(std::string_view text, const NoiseSpec& spec);

/// The four EDA transforms: random swap, random deletion, random insertion
/// (synonyms when a lexicon is given, junk words otherwise), and synonym
/// replacement.
std::string eda_transform(std::string_view text, const NoiseSpec& spec,
                          const SynonymLexicon* lexicon = nullptr);

struct NoiseResources {
    const UnigramTable* vocab = nullptr;       // unigram
    const SynonymLexicon* lexicon = nullptr;   // eda_insert / eda_synonym
};

/// Dispatch to the transform selected by spec.kind.
std::string apply_noise(std::string_view text, const NoiseSpec& spec,
                        const NoiseResources& resources = {});

/// Apply the transform to every document with a per-document substream
/// derived from (spec.seed, document index). Labels and order unchanged.
Dataset noise_dataset(const Dataset& dataset, const NoiseSpec& spec,
                      const NoiseResources& resources = {});

} // namespace noisedetect
