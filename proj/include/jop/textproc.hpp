#ifndef JOP_TEXTPROC_HPP
#define JOP_TEXTPROC_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "jop/corpus.hpp"

namespace jop::text {

// Tokenization rule: compose combining diacritics (NFC for the Latin
// repertoire), lowercase, then split on any character that is neither a
// letter (ASCII or Latin-1/Extended) nor an ASCII digit. Diacritics are
// preserved; punctuation never reaches a token.
std::vector<std::string> tokenize(const std::string& text);

// Lowercases one UTF-8 string under the tokenizer's case rule.
std::string lowercase(const std::string& s);

// Splits on . ! ? ; followed by whitespace or end of text, with an
// abbreviation guard so "art. 121" does not break a sentence. Never
// returns empty sentences.
std::vector<std::string> split_sentences(const std::string& text);

class StopwordList {
public:
    static StopwordList builtin_portuguese();
    static StopwordList from_file(const std::filesystem::path& path);
    static StopwordList none();

    bool contains(const std::string& token) const;
    std::size_t size() const { return entries_.size(); }
    const std::string& source() const { return source_; }

private:
    std::unordered_set<std::string> entries_;  // all lowercase
    std::string source_;
};

// Order-preserving, case-insensitive filter.
std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                          const StopwordList& list);

// Shared preprocessing pipeline: sentence split, tokenize, optional
// stopword filtering. Sentences left empty by the filter are dropped.
struct Preprocessor {
    StopwordList stopwords = StopwordList::builtin_portuguese();
    bool filter_stopwords = true;

    std::vector<std::string> flat_tokens(const std::string& text) const;
    std::vector<std::vector<std::string>> sentence_tokens(const std::string& text) const;
};

class Vocabulary {
public:
    static constexpr int kPadIndex = 0;
    static constexpr int kUnkIndex = 1;

    // Index for a token, kUnkIndex when absent. Tokens are expected in
    // tokenizer (lowercase) form.
    int index_of(const std::string& token) const;
    bool contains(const std::string& token) const;

    // Number of indices including the two reserved slots.
    std::size_t size() const { return by_index_.size() + 2; }
    std::size_t token_count() const { return by_index_.size(); }
    int min_count() const { return min_count_; }
    std::size_t frequency(const std::string& token) const;

    // Token for an index >= 2.
    const std::string& token_at(int index) const;

    std::string to_json_string() const;
    static Vocabulary from_json_string(const std::string& s);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    friend Vocabulary build_vocabulary(const corpus::Dataset& ds, int min_count,
                                       const Preprocessor& preproc);

private:
    std::unordered_map<std::string, int> index_;
    std::unordered_map<std::string, std::size_t> freq_;
    std::vector<std::string> by_index_;  // position 0 holds index 2
    int min_count_ = 1;
};

// Tokens with corpus frequency >= min_count are indexed from 2 in
// descending frequency, ties broken lexicographically. Throws
// EmptyVocabularyError when nothing survives.
Vocabulary build_vocabulary(const corpus::Dataset& ds, int min_count,
                            const Preprocessor& preproc);

// Fixed-capacity sentence-by-word grid with masks; the hierarchical
// model input. Padded cells hold index 0 with mask false.
struct HierarchicalDocument {
    std::size_t m_cap = 0;
    std::size_t n_cap = 0;
    std::vector<int> grid;                   // m_cap * n_cap
    std::vector<std::uint8_t> word_mask;     // m_cap * n_cap
    std::vector<std::uint8_t> sentence_mask; // m_cap
    std::size_t m_real = 0;
    std::vector<std::size_t> n_real;         // per kept sentence
    // Surface forms of the kept tokens, for attention reporting.
    std::vector<std::vector<std::string>> surfaces;

    int index_at(std::size_t t, std::size_t i) const { return grid[t * n_cap + i]; }
    bool word_at(std::size_t t, std::size_t i) const { return word_mask[t * n_cap + i]; }
};

HierarchicalDocument to_hierarchical(const corpus::LabeledDocument& doc,
                                     const Vocabulary& vocab, std::size_t m_cap,
                                     std::size_t n_cap, const Preprocessor& preproc);

// Capacity suggestion: the dataset's 95th-percentile sentence count and
// sentence length (nearest-rank), floored at 1.
struct GridCaps {
    std::size_t m_cap = 1;
    std::size_t n_cap = 1;
};
GridCaps suggest_caps(const corpus::Dataset& ds, const Preprocessor& preproc,
                      double percentile = 0.95);

} // namespace jop::text

#endif
