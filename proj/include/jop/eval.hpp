#ifndef JOP_EVAL_HPP
#define JOP_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "jop/classic.hpp"
#include "jop/corpus.hpp"
#include "jop/model_io.hpp"
#include "jop/neural.hpp"

namespace jop::eval {

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    int positive_class = +1;

    std::size_t total() const { return tp + fp + fn + tn; }
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& golds, int positive_class = +1);

// Zero-denominator convention: precision/recall are 0 when undefined,
// f_score is 0 when P + R == 0.
struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f_score = 0.0;
    double accuracy = 0.0;
};

Metrics metrics(const ConfusionMatrix& cm);

// Every hyper-parameter of the pipeline in one place, JSON-overridable.
struct PipelineConfig {
    int min_count = 1;
    bool filter_stopwords = true;
    std::string stopword_source = "builtin";  // builtin | none | <file path>
    bool l2_normalize = false;
    double caps_percentile = 0.95;
    std::size_t m_cap = 0;  // 0 derives the cap from the training fold
    std::size_t n_cap = 0;
    int positive_class = +1;

    classic::LogRegConfig logreg{};
    classic::LdaConfig lda{};
    classic::KnnConfig knn{};
    classic::CartConfig cart{};
    classic::NbConfig nb{};
    classic::SvmConfig svm{};
    neural::NetConfig net{};
    neural::TrainConfig train{};
};

nlohmann::json pipeline_to_json(const PipelineConfig& cfg);
// Starts from defaults and applies any keys present.
PipelineConfig pipeline_from_json(const nlohmann::json& overrides);

bool is_neural_kind(const std::string& kind);

// Full training pass on one dataset: preprocessing fitted on `ds`, then
// the requested model. `table` is required for neural kinds.
struct TrainOutcome {
    io::TrainedModel model;
    text::Vocabulary vocab;
    neural::TrainingLog log;  // empty for classic kinds
};

TrainOutcome train_any(const std::string& kind, const corpus::Dataset& ds,
                       const PipelineConfig& cfg,
                       const features::EmbeddingTable* table, std::uint64_t seed);

// Everything needed to score documents with a trained container.
struct PredictContext {
    text::Preprocessor preproc;
    text::Vocabulary vocab;
    features::TfidfModel tfidf;
    const features::EmbeddingTable* table = nullptr;
    std::size_t m_cap = 1, n_cap = 1;
    bool l2_normalize = false;
};

PredictContext context_for(const io::TrainedModel& tm, text::Vocabulary vocab,
                           const features::EmbeddingTable* table);

struct Scored {
    int label = 0;
    double score = 0.0;  // sign-consistent with label
};

Scored score_document(const io::TrainedModel& tm, const PredictContext& ctx,
                      const corpus::LabeledDocument& doc);

struct CvReport {
    std::string kind;
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<Metrics> folds;
    Metrics mean;
    double wall_sec = 0.0;  // stderr diagnostics only, never serialized

    std::string to_json_string() const;
    static CvReport from_json_string(const std::string& s);
    // Aligned text table: algorithm row with the four metric columns.
    std::string to_table() const;
};

// Stratified k-fold driver: per fold, the pipeline and model are fitted
// on the k-1 training folds and scored on the held-out fold; metrics are
// averaged arithmetically. `jobs` > 1 trains folds concurrently without
// changing any result.
CvReport cross_validate(const std::string& kind, const corpus::Dataset& ds, int k,
                        std::uint64_t seed, const PipelineConfig& cfg,
                        const features::EmbeddingTable* table = nullptr,
                        int jobs = 1);

} // namespace jop::eval

#endif
