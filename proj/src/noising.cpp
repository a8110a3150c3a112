#include "noisedetect/noising.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "noisedetect/error.hpp"

namespace noisedetect {

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string ascii_lower(std::string s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
}

void require_kind(const NoiseSpec& spec, NoiseKind expected) {
    if (spec.kind != expected)
        fail(ErrorCode::InvalidSpec,
             std::string("spec.kind is ") + noise_kind_name(spec.kind) + ", expected " +
                 noise_kind_name(expected));
}

/// First k of 0..n-1 after a partial Fisher-Yates pass, ascending.
std::vector<std::size_t> sample_without_replacement(SplitMix64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// Rebuild text with extra words placed at gaps. gap_words[g] goes between
/// token g-1 and token g (g = 0: before the first token, g = n: after the
/// last). Chosen gaps are rendered single-spaced; other gaps keep their
/// original whitespace.
std::string render_with_insertions(const TokenSequence& ts,
                                   const std::vector<std::vector<std::string>>& gap_words) {
    const std::size_t n = ts.tokens.size();
    std::string out;
    for (std::size_t g = 0; g <= n; ++g) {
        const auto& words = gap_words[g];
        if (words.empty()) {
            out += ts.whitespace[g];
        } else {
            if (g > 0) out += ' ';
            for (std::size_t w = 0; w < words.size(); ++w) {
                if (w > 0) out += ' ';
                out += words[w];
            }
            if (g < n) out += ' ';
        }
        if (g < n) out += ts.tokens[g];
    }
    return out;
}

std::string eda_swap_impl(const TokenSequence& ts, const NoiseSpec& spec, std::string_view text) {
    const std::size_t n = ts.tokens.size();
    if (n < 2) return std::string(text);
    TokenSequence out = ts;
    SplitMix64 rng(spec.seed);
    const std::size_t k = affected_count(spec.rate, n);
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t i = static_cast<std::size_t>(rng.next_below(n));
        std::size_t j = static_cast<std::size_t>(rng.next_below(n - 1));
        if (j >= i) ++j; // uniform over positions != i
        std::swap(out.tokens[i], out.tokens[j]);
    }
    return out.detokenize();
}

std::string eda_delete_impl(const TokenSequence& ts, const NoiseSpec& spec, std::string_view text) {
    const std::size_t n = ts.tokens.size();
    if (n == 0) return std::string(text);
    SplitMix64 rng(spec.seed);
    std::vector<bool> keep(n, true);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (rng.next_double() < spec.rate) keep[i] = false;
        else ++kept;
    }
    if (kept == n) return std::string(text);
    if (kept == 0) {
        // EDA convention: never return an empty sentence.
        return ts.tokens[static_cast<std::size_t>(rng.next_below(n))];
    }
    std::string out;
    bool first = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        if (!first) out += ' ';
        out += ts.tokens[i];
        first = false;
    }
    return out;
}

std::string eda_insert_impl(const TokenSequence& ts, const NoiseSpec& spec,
                            const SynonymLexicon* lexicon) {
    const std::size_t n = ts.tokens.size();
    SplitMix64 rng(spec.seed);
    const std::size_t k = affected_count(spec.rate, n);

    std::vector<std::size_t> candidates;
    if (lexicon) {
        for (std::size_t i = 0; i < n; ++i) {
            if (lexicon->find(ts.tokens[i])) candidates.push_back(i);
        }
    }

    std::vector<std::vector<std::string>> gap_words(n + 1);
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t gap = static_cast<std::size_t>(rng.next_below(n + 1));
        std::string word;
        if (!candidates.empty()) {
            const auto& token =
                ts.tokens[candidates[static_cast<std::size_t>(rng.next_below(candidates.size()))]];
            const auto& syns = *lexicon->find(token);
            word = syns[static_cast<std::size_t>(rng.next_below(syns.size()))];
        } else {
            word = generate_junk_word(rng, spec.junk_len_min, spec.junk_len_max);
        }
        gap_words[gap].push_back(std::move(word));
    }
    return render_with_insertions(ts, gap_words);
}

std::string eda_synonym_impl(const TokenSequence& ts, const NoiseSpec& spec,
                             const SynonymLexicon* lexicon, std::string_view text) {
    if (!lexicon)
        fail(ErrorCode::LexiconRequired, "eda_synonym needs a synonym lexicon");
    const std::size_t n = ts.tokens.size();
    if (n == 0) return std::string(text);

    const auto& stopwords = english_stopwords();
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string lowered = ascii_lower(ts.tokens[i]);
        if (std::find(stopwords.begin(), stopwords.end(), lowered) != stopwords.end()) continue;
        if (lexicon->find(ts.tokens[i])) candidates.push_back(i);
    }
    if (candidates.empty()) return std::string(text);

    SplitMix64 rng(spec.seed);
    const std::size_t k = std::min(affected_count(spec.rate, n), candidates.size());
    std::vector<std::size_t> chosen = sample_without_replacement(rng, candidates.size(), k);

    TokenSequence out = ts;
    for (std::size_t c : chosen) {
        const std::size_t pos = candidates[c];
        const auto& syns = *lexicon->find(ts.tokens[pos]);
        out.tokens[pos] = syns[static_cast<std::size_t>(rng.next_below(syns.size()))];
    }
    return out.detokenize();
}

} // namespace

const char* noise_kind_name(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::junk_injection: return "junk_injection";
        case NoiseKind::unigram: return "unigram";
        case NoiseKind::blank: return "blank";
        case NoiseKind::eda_swap: return "eda_swap";
        case NoiseKind::eda_delete: return "eda_delete";
        case NoiseKind::eda_insert: return "eda_insert";
        case NoiseKind::eda_synonym: return "eda_synonym";
    }
    return "unknown";
}

std::optional<NoiseKind> parse_noise_kind(const std::string& name) {
    if (name == "junk" || name == "junk_injection") return NoiseKind::junk_injection;
    if (name == "unigram") return NoiseKind::unigram;
    if (name == "blank") return NoiseKind::blank;
    if (name == "eda_swap") return NoiseKind::eda_swap;
    if (name == "eda_delete") return NoiseKind::eda_delete;
    if (name == "eda_insert") return NoiseKind::eda_insert;
    if (name == "eda_synonym") return NoiseKind::eda_synonym;
    return std::nullopt;
}

void NoiseSpec::validate() const {
    if (!(rate >= 0.0 && rate <= 1.0))
        fail(ErrorCode::InvalidSpec, "rate must be in [0, 1]");
    if (junk_len_min < 1 || junk_len_max < junk_len_min)
        fail(ErrorCode::InvalidSpec, "junk length bounds must satisfy 1 <= min <= max");
    if (kind == NoiseKind::eda_synonym && !lexicon_path)
        fail(ErrorCode::LexiconRequired, "eda_synonym needs lexicon_path");
    if (kind != NoiseKind::eda_synonym && kind != NoiseKind::eda_insert && lexicon_path)
        fail(ErrorCode::InvalidSpec,
             std::string("lexicon_path is only meaningful for eda_synonym/eda_insert, not ") +
                 noise_kind_name(kind));
}

std::string TokenSequence::detokenize() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        out += whitespace[i];
        out += tokens[i];
    }
    out += whitespace.back();
    return out;
}

TokenSequence tokenize_words(std::string_view text) {
    TokenSequence ts;
    std::size_t i = 0;
    std::string ws;
    while (i < text.size()) {
        ws.clear();
        while (i < text.size() && is_ascii_space(text[i])) ws += text[i++];
        if (i >= text.size()) {
            ts.whitespace.push_back(ws);
            return ts;
        }
        ts.whitespace.push_back(ws);
        std::size_t start = i;
        while (i < text.size() && !is_ascii_space(text[i])) ++i;
        ts.tokens.emplace_back(text.substr(start, i - start));
    }
    ts.whitespace.emplace_back();
    return ts;
}

std::size_t word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_ascii_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::size_t affected_count(double rate, std::size_t n_words) {
    const auto rounded = std::llround(rate * static_cast<double>(n_words));
    return std::max<std::size_t>(1, static_cast<std::size_t>(rounded));
}

std::string generate_junk_word(SplitMix64& rng, int len_min, int len_max) {
    const auto span = static_cast<std::uint64_t>(len_max - len_min + 1);
    const auto len = static_cast<std::size_t>(len_min) + static_cast<std::size_t>(rng.next_below(span));
    std::string word(len, 'a');
    for (char& c : word) c = static_cast<char>('a' + rng.next_below(26));
    return word;
}

UnigramTable build_unigram_table(const Dataset& dataset) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& doc : dataset.documents) {
        for (auto& token : tokenize_words(doc.text).tokens) ++counts[std::move(token)];
    }
    return UnigramTable(counts.begin(), counts.end());
}

const std::vector<std::string>* SynonymLexicon::find(const std::string& token) const {
    auto it = entries.find(token);
    if (it != entries.end()) return &it->second;
    it = entries.find(ascii_lower(token));
    if (it != entries.end()) return &it->second;
    return nullptr;
}

SynonymLexicon load_synonym_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open lexicon '" + path.string() + "'");
    SynonymLexicon lexicon;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            fail(ErrorCode::LexiconParseError,
                 "line " + std::to_string(line_no) + ": expected `word<TAB>syn1,syn2,...`");
        const std::string word = line.substr(0, tab);
        std::vector<std::string> syns;
        std::size_t pos = tab + 1;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            std::string syn = line.substr(pos, comma - pos);
            if (syn.empty())
                fail(ErrorCode::LexiconParseError,
                     "line " + std::to_string(line_no) + ": empty synonym for '" + word + "'");
            syns.push_back(std::move(syn));
            pos = comma + 1;
        }
        if (syns.empty())
            fail(ErrorCode::LexiconParseError,
                 "line " + std::to_string(line_no) + ": no synonyms for '" + word + "'");
        lexicon.entries[word] = std::move(syns);
    }
    return lexicon;
}

const std::vector<std::string>& english_stopwords() {
    // Fixed built-in list (see README); kept short on purpose.
    static const std::vector<std::string> words = {
        "a",    "an",   "and",  "are",  "as",    "at",   "be",   "but",  "by",
        "for",  "from", "had",  "has",  "have",  "he",   "her",  "his",  "i",
        "if",   "in",   "into", "is",   "it",    "its",  "my",   "no",   "not",
        "of",   "on",   "or",   "our",  "she",   "so",   "that", "the",  "their",
        "them", "then", "there","they", "this",  "to",   "was",  "we",   "were",
        "what", "when", "which","who",  "will",  "with", "you",  "your",
    };
    return words;
}

std::string inject_junk(std::string_view text, const NoiseSpec& spec) {
    spec.validate();
    require_kind(spec, NoiseKind::junk_injection);
    const TokenSequence ts = tokenize_words(text);
    const std::size_t n = ts.tokens.size();
    if (n == 0) fail(ErrorCode::EmptyText, "cannot inject junk into a text with no words");

    const std::size_t k = affected_count(spec.rate, n);
    SplitMix64 rng(spec.seed);
    const std::vector<std::size_t> gaps = sample_without_replacement(rng, n + 1, k);

    std::vector<std::vector<std::string>> gap_words(n + 1);
    for (std::size_t gap : gaps) {
        gap_words[gap].push_back(generate_junk_word(rng, spec.junk_len_min, spec.junk_len_max));
    }
    return render_with_insertions(ts, gap_words);
}

std::string unigram_noise(std::string_view text, const NoiseSpec& spec, const UnigramTable& vocab) {
    spec.validate();
    require_kind(spec, NoiseKind::unigram);
    std::uint64_t total = 0;
    for (const auto& [token, count] : vocab) total += count;
    if (total == 0)
        fail(ErrorCode::EmptyVocabulary, "unigram vocabulary is empty or has no positive counts");

    std::vector<std::uint64_t> cumulative;
    cumulative.reserve(vocab.size());
    std::uint64_t running = 0;
    for (const auto& [token, count] : vocab) {
        running += count;
        cumulative.push_back(running);
    }

    TokenSequence ts = tokenize_words(text);
    SplitMix64 rng(spec.seed);
    for (auto& token : ts.tokens) {
        if (rng.next_double() < spec.rate) {
            const std::uint64_t r = rng.next_below(total);
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
            token = vocab[static_cast<std::size_t>(it - cumulative.begin())].first;
        }
    }
    return ts.detokenize();
}

std::string blank_noise(std::string_view text, const NoiseSpec& spec) {
    spec.validate();
    require_kind(spec, NoiseKind::blank);
    TokenSequence ts = tokenize_words(text);
    SplitMix64 rng(spec.seed);
    for (auto& token : ts.tokens) {
        if (rng.next_double() < spec.rate) token = "_";
    }
    return ts.detokenize();
}

std::string eda_transform(std::string_view text, const NoiseSpec& spec,
                          const SynonymLexicon* lexicon) {
    spec.validate();
    const TokenSequence ts = tokenize_words(text);
    switch (spec.kind) {
        case NoiseKind::eda_swap: return eda_swap_impl(ts, spec, text);
        case NoiseKind::eda_delete: return eda_delete_impl(ts, spec, text);
        case NoiseKind::eda_insert: return eda_insert_impl(ts, spec, lexicon);
        case NoiseKind::eda_synonym: return eda_synonym_impl(ts, spec, lexicon, text);
        default:
            fail(ErrorCode::InvalidSpec,
                 std::string(noise_kind_name(spec.kind)) + " is not an EDA transform");
    }
}

std::string apply_noise(std::string_view text, const NoiseSpec& spec,
                        const NoiseResources& resources) {
    switch (spec.kind) {
        case NoiseKind::junk_injection:
            return inject_junk(text, spec);
        case NoiseKind::unigram:
            if (!resources.vocab)
                fail(ErrorCode::EmptyVocabulary, "unigram noising needs a vocabulary");
            return unigram_noise(text, spec, *resources.vocab);
        case NoiseKind::blank:
            return blank_noise(text, spec);
        default:
            return eda_transform(text, spec, resources.lexicon);
    }
}

Dataset noise_dataset(const Dataset& dataset, const NoiseSpec& spec,
                      const NoiseResources& resources) {
    spec.validate();
    std::vector<LabeledDocument> out;
    out.reserve(dataset.documents.size());
    for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
        NoiseSpec sub = spec;
        sub.seed = derive_stream_seed(spec.seed, i);
        try {
            out.push_back(LabeledDocument{apply_noise(dataset.documents[i].text, sub, resources),
                                          dataset.documents[i].label_a,
                                          dataset.documents[i].label_b});
        } catch (const Error& e) {
            fail(e.code(), "document " + std::to_string(i) + ": " + e.what());
        }
    }
    return dataset_from_documents(std::move(out));
}

} // namespace noisedetect
