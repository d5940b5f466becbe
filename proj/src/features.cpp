#include "jop/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "jop/errors.hpp"

namespace jop::features {

double SparseVector::dot(const SparseVector& other) const {
    double acc = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
        if (a->first == b->first) {
            acc += a->second * b->second;
            ++a;
            ++b;
        } else if (a->first < b->first) {
            ++a;
        } else {
            ++b;
        }
    }
    return acc;
}

double SparseVector::dot_dense(const std::vector<double>& dense) const {
    double acc = 0.0;
    for (const auto& [i, w] : entries) acc += w * dense[static_cast<std::size_t>(i)];
    return acc;
}

double SparseVector::squared_norm() const {
    double acc = 0.0;
    for (const auto& [i, w] : entries) acc += w * w;
    return acc;
}

void SparseVector::set(int index, double weight) {
    if (weight == 0.0) return;
    if (!entries.empty() && entries.back().first >= index)
        throw Error("SparseVector::set: indices must be strictly increasing");
    entries.emplace_back(index, weight);
}

double SparseVector::at(int index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, int i) { return e.first < i; });
    return (it != entries.end() && it->first == index) ? it->second : 0.0;
}

TfidfModel TfidfModel::fit(const corpus::Dataset& ds, const text::Vocabulary& vocab,
                           const text::Preprocessor& preproc) {
    if (ds.documents.empty()) throw EmptyDatasetError("fit on an empty dataset");
    TfidfModel model;
    model.vocab_ = vocab;
    model.corpus_size_ = ds.documents.size();
    for (const auto& doc : ds.documents) {
        std::unordered_set<std::string> seen;
        for (auto& tok : preproc.flat_tokens(doc.text))
            if (vocab.contains(tok) && seen.insert(tok).second) model.df_[tok]++;
    }
    return model;
}

TfidfModel TfidfModel::restore(const text::Vocabulary& vocab,
                               const std::vector<double>& df_by_index,
                               std::size_t corpus_size) {
    TfidfModel model;
    model.vocab_ = vocab;
    model.corpus_size_ = corpus_size;
    for (std::size_t idx = 2; idx < df_by_index.size(); ++idx)
        if (df_by_index[idx] > 0.0)
            model.df_[vocab.token_at(static_cast<int>(idx))] =
                static_cast<std::size_t>(df_by_index[idx]);
    return model;
}

std::vector<double> TfidfModel::df_by_index() const {
    std::vector<double> out(vocab_.size(), 0.0);
    for (const auto& [tok, n] : df_)
        out[static_cast<std::size_t>(vocab_.index_of(tok))] = static_cast<double>(n);
    return out;
}

std::size_t TfidfModel::document_frequency(const std::string& token) const {
    auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
}

SparseVector TfidfModel::transform(const std::vector<std::string>& tokens,
                                   bool l2_normalize) const {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& tok : tokens) counts[tok]++;

    std::vector<std::pair<int, double>> entries;
    for (const auto& [tok, count] : counts) {
        auto it = df_.find(tok);
        if (it == df_.end()) continue;  // unseen at fit time
        const double idf = std::log(static_cast<double>(corpus_size_) /
                                    static_cast<double>(it->second));
        const double w = static_cast<double>(count) * idf;
        if (w != 0.0) entries.emplace_back(vocab_.index_of(tok), w);
    }
    std::sort(entries.begin(), entries.end());

    SparseVector v;
    v.entries = std::move(entries);
    if (l2_normalize) {
        const double norm = std::sqrt(v.squared_norm());
        if (norm > 0.0)
            for (auto& [i, w] : v.entries) w /= norm;
    }
    return v;
}

SparseVector TfidfModel::counts(const std::vector<std::string>& tokens) const {
    std::unordered_map<int, std::size_t> counts;
    for (const auto& tok : tokens) {
        if (!vocab_.contains(tok)) continue;
        counts[vocab_.index_of(tok)]++;
    }
    std::vector<std::pair<int, double>> entries;
    entries.reserve(counts.size());
    for (const auto& [idx, n] : counts)
        entries.emplace_back(idx, static_cast<double>(n));
    std::sort(entries.begin(), entries.end());
    SparseVector v;
    v.entries = std::move(entries);
    return v;
}

// ---- embeddings ---------------------------------------------------------------

namespace {

bool parse_double(std::string_view s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last && std::isfinite(out);
}

// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

bool looks_like_header(const std::vector<std::string_view>& fields) {
    if (fields.size() != 2) return false;
    for (auto f : fields) {
        unsigned long long v = 0;
        auto res = std::from_chars(f.data(), f.data() + f.size(), v);
        if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) return false;
    }
    return true;
}

} // namespace

EmbeddingTable EmbeddingTable::load(std::istream& in, std::size_t expected_dim,
                                    const std::unordered_set<std::string>* filter) {
    EmbeddingTable table(expected_dim);
    std::string line;
    bool first = true;
    std::size_t parsed = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto fields = split_fields(line);
        if (first) {
            first = false;
            if (looks_like_header(fields)) continue;
        }
        if (fields.empty()) continue;
        if (fields.size() != expected_dim + 1) {
            table.skipped_++;
            continue;
        }
        std::vector<double> v(expected_dim);
        bool ok = true;
        for (std::size_t j = 0; j < expected_dim && ok; ++j)
            ok = parse_double(fields[j + 1], v[j]);
        if (!ok) {
            table.skipped_++;
            continue;
        }
        ++parsed;
        std::string token(fields[0]);
        if (filter && !filter->count(token)) continue;
        table.vectors_[std::move(token)] = std::move(v);
    }
    if (parsed == 0 && table.skipped_ > 0)
        throw DimensionError("no embedding line matches dimension " +
                             std::to_string(expected_dim));
    return table;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path,
                                    std::size_t expected_dim,
                                    const std::unordered_set<std::string>* filter) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path.string());
    return load(in, expected_dim, filter);
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
    auto it = vectors_.find(token);
    return it == vectors_.end() ? nullptr : &it->second;
}

bool EmbeddingTable::copy_to(const std::string& token, double* out) const {
    if (const auto* v = find(token)) {
        std::copy(v->begin(), v->end(), out);
        return false;
    }
    std::fill(out, out + dim_, 0.0);
    return true;
}

void EmbeddingTable::insert(const std::string& token, std::vector<double> v) {
    if (v.size() != dim_) throw DimensionError("embedding vector has wrong dimension");
    vectors_[token] = std::move(v);
}

void EmbeddingTable::serialize(std::ostream& out) const {
    std::map<std::string, const std::vector<double>*> ordered;
    for (const auto& [tok, v] : vectors_) ordered[tok] = &v;
    for (const auto& [tok, v] : ordered) {
        out << tok;
        for (double x : *v) {
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof(buf), x);
            out << ' ';
            out.write(buf, res.ptr - buf);
        }
        out << '\n';
    }
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    return dim_ == other.dim_ && vectors_ == other.vectors_;
}

ad::Tensor embed_grid(const EmbeddingTable& table, const text::HierarchicalDocument& hd,
                      const text::Vocabulary& vocab) {
    ad::Tensor out(ad::Shape{hd.m_cap, hd.n_cap, table.dim()});
    for (std::size_t t = 0; t < hd.m_cap; ++t)
        for (std::size_t i = 0; i < hd.n_cap; ++i) {
            if (!hd.word_at(t, i)) continue;
            const int idx = hd.index_at(t, i);
            if (idx < 2) continue;  // unknown words embed as zero
            table.copy_to(vocab.token_at(idx), &out(t, i, 0));
        }
    return out;
}

ad::Tensor embed_sequence(const EmbeddingTable& table, const std::vector<int>& indices,
                          const text::Vocabulary& vocab) {
    ad::Tensor out(ad::Shape{indices.size(), table.dim()});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 2) continue;
        table.copy_to(vocab.token_at(indices[i]), &out(i, 0));
    }
    return out;
}

} // namespace jop::features
