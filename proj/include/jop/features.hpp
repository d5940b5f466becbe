#ifndef JOP_FEATURES_HPP
#define JOP_FEATURES_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "jop/corpus.hpp"
#include "jop/tensor.hpp"
#include "jop/textproc.hpp"

namespace jop::features {

// Sparse feature vector over the vocabulary index space: strictly
// increasing indices, finite weights, no explicit zeros.
struct SparseVector {
    std::vector<std::pair<int, double>> entries;

    std::size_t nnz() const { return entries.size(); }
    double dot(const SparseVector& other) const;
    double dot_dense(const std::vector<double>& dense) const;
    double squared_norm() const;
    // Zero entries are dropped; duplicates are an error.
    void set(int index, double weight);
    double at(int index) const;
};

// Term weighting: weight(t, d) = f(t,d) * ln(N / n_t), natural log,
// raw in-document counts, no smoothing. Tokens outside the fitted
// vocabulary contribute nothing.
class TfidfModel {
public:
    static TfidfModel fit(const corpus::Dataset& ds, const text::Vocabulary& vocab,
                          const text::Preprocessor& preproc);

    // Rebuilds a fitted model from its serialized form: df_by_index[i] is
    // the document frequency of vocabulary index i (0 when absent).
    static TfidfModel restore(const text::Vocabulary& vocab,
                              const std::vector<double>& df_by_index,
                              std::size_t corpus_size);
    // Inverse of restore, sized vocab.size().
    std::vector<double> df_by_index() const;

    SparseVector transform(const std::vector<std::string>& tokens,
                           bool l2_normalize = false) const;

    // Raw per-token counts mapped onto vocabulary indices (the input the
    // multinomial model trains on).
    SparseVector counts(const std::vector<std::string>& tokens) const;

    std::size_t corpus_size() const { return corpus_size_; }
    std::size_t document_frequency(const std::string& token) const;
    const text::Vocabulary& vocabulary() const { return vocab_; }

private:
    text::Vocabulary vocab_;
    std::unordered_map<std::string, std::size_t> df_;
    std::size_t corpus_size_ = 0;
};

// Word -> dense vector table parsed from the textual embedding format
// (token followed by dim floats per line; an optional `count dim` header
// is detected and skipped). Lookups of unknown words yield zero vectors.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

    // `filter`, when given, keeps only listed tokens (streaming load).
    static EmbeddingTable load(std::istream& in, std::size_t expected_dim,
                               const std::unordered_set<std::string>* filter = nullptr);
    static EmbeddingTable load(const std::filesystem::path& path,
                               std::size_t expected_dim,
                               const std::unordered_set<std::string>* filter = nullptr);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    std::size_t skipped_lines() const { return skipped_; }

    bool contains(const std::string& token) const { return vectors_.count(token) > 0; }
    const std::vector<double>* find(const std::string& token) const;
    // Writes the token's vector (or zeros) into out[0..dim); returns true
    // when the token was out of table.
    bool copy_to(const std::string& token, double* out) const;

    void insert(const std::string& token, std::vector<double> v);
    void serialize(std::ostream& out) const;

    bool operator==(const EmbeddingTable& other) const;

private:
    std::size_t dim_ = 0;
    std::size_t skipped_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Dense [m_cap, n_cap, dim] input tensor for the hierarchical model:
// masked cells are zero vectors, unknown-word cells are zero vectors with
// their mask untouched.
ad::Tensor embed_grid(const EmbeddingTable& table, const text::HierarchicalDocument& hd,
                      const text::Vocabulary& vocab);

// Dense [len, dim] matrix for a flat token-index sequence (the recurrent
// models' input).
ad::Tensor embed_sequence(const EmbeddingTable& table, const std::vector<int>& indices,
                          const text::Vocabulary& vocab);

} // namespace jop::features

#endif
