#ifndef JOP_ATTENTION_HPP
#define JOP_ATTENTION_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "jop/eval.hpp"
#include "jop/neural.hpp"

namespace jop::attention {

// One unmasked (document, sentence, word) occurrence. Occurrences are
// never merged: the same surface token appears once per position it
// holds, each with its own weights.
struct AttentionRecord {
    std::string doc_id;
    std::size_t sentence_index = 0;
    std::size_t word_position = 0;
    std::string token;
    double word_weight = 0.0;       // within-sentence softmax weight
    double sentence_weight = 0.0;   // within-document softmax weight
    double doc_contribution = 0.0;  // word_weight * sentence_weight
    int gold = 0;
    int pred = 0;
};

enum class ScoreField { word_weight, doc_contribution };

std::string score_field_name(ScoreField f);
ScoreField score_field_from(const std::string& name);
double record_score(const AttentionRecord& r, ScoreField f);

// Forward trace plus the surface tokens it refers to; everything needed
// to render one document.
struct DocExplanation {
    std::string doc_id;
    neural::HanTrace trace;
    std::vector<std::vector<std::string>> surfaces;
    int gold = 0;
    int pred = 0;
};

// Throws NotAttentionModelError unless the container holds the
// hierarchical kind.
DocExplanation explain_document(const io::TrainedModel& tm,
                                const eval::PredictContext& ctx,
                                const corpus::LabeledDocument& doc);

// One record per unmasked word occurrence across the dataset, grouped by
// document in ascending doc-id order. Extraction over documents runs on
// `jobs` threads without changing the output.
std::vector<AttentionRecord> extract_attention(const io::TrainedModel& tm,
                                               const eval::PredictContext& ctx,
                                               const corpus::Dataset& ds,
                                               int jobs = 1);

struct RankEntry {
    std::size_t rank = 0;
    std::string token;
    double weight = 0.0;
    std::string doc_id;
    std::size_t sentence_index = 0;
    std::size_t word_position = 0;
};

struct AttentionRanking {
    int outcome_class = +1;
    ScoreField field = ScoreField::word_weight;
    std::vector<RankEntry> entries;

    std::string to_json_string() const;
};

// Records filtered to one outcome class (gold label by default), sorted
// by the chosen score descending. Ties break lexicographically by token,
// then doc id, then position, so equal inputs rank identically. The same
// surface token may hold several ranks.
AttentionRanking rank_by_class(const std::vector<AttentionRecord>& records,
                               int outcome_class, std::size_t top_k, ScoreField field,
                               bool group_by_predicted = false);

struct ClassTokenCounts {
    std::size_t occurrences = 0;      // attention records
    std::size_t distinct_tokens = 0;  // distinct surface forms
};

std::map<int, ClassTokenCounts> token_counts(const std::vector<AttentionRecord>& records);
// Four-row layout: one row per (dataset, class).
std::string render_token_counts(const std::map<int, ClassTokenCounts>& counts,
                                const std::string& dataset_name);

struct BoxplotStats {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::size_t count = 0;
};

// Quartiles by linear interpolation between order statistics
// (h = (n-1) p). Throws EmptyClassError when there are no records.
std::map<int, BoxplotStats> boxplot_stats(const std::vector<AttentionRecord>& records,
                                          ScoreField field);
std::string boxplot_to_json(const std::map<int, BoxplotStats>& stats, ScoreField field);

// Self-contained HTML: a weight bar per sentence, word backgrounds with
// opacity proportional to the sentence-normalized word weight, raw
// values in tooltips.
std::string render_heatmap(const DocExplanation& doc);
void write_heatmap(const DocExplanation& doc, const std::filesystem::path& path);

// doc_id, sentence, position, token, word_weight, sentence_weight,
// doc_contribution, gold, pred - tab separated with a header row.
std::string records_to_tsv(const std::vector<AttentionRecord>& records);
std::vector<AttentionRecord> records_from_tsv(const std::string& text);

} // namespace jop::attention

#endif
