#ifndef JOP_CORPUS_HPP
#define JOP_CORPUS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jop::corpus {

enum class Subject { homicide, corruption, other };

std::string subject_name(Subject s);
Subject subject_from(const std::string& name);

// One labelled judicial decision. label is +1 for absolution and -1 for
// condemnation; text is guaranteed non-empty after trimming.
struct LabeledDocument {
    std::string id;
    std::string text;
    int label = 0;
    Subject subject = Subject::other;
    std::optional<std::string> date;  // ISO-8601 when present
};

struct Dataset {
    std::string name;
    std::vector<LabeledDocument> documents;

    std::size_t size() const { return documents.size(); }
};

enum class DatasetFormat { jsonl, csv };

// Loads all records in file order. Throws IoError for unreadable files and
// SchemaError (with the offending line number) for missing fields,
// duplicate ids, bad labels or empty text.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
// Format inferred from the extension (.jsonl / .csv).
Dataset load_dataset(const std::filesystem::path& path);

void write_jsonl(const Dataset& ds, std::ostream& out);
void write_jsonl(const Dataset& ds, const std::filesystem::path& path);

struct ClassDistribution {
    std::size_t absolutions = 0;
    std::size_t condemnations = 0;
    std::size_t total = 0;
    // Truncated (not rounded) to one decimal.
    double absolution_pct = 0.0;
    double condemnation_pct = 0.0;
};

ClassDistribution class_distribution(const Dataset& ds);

// Two-row text table of the distribution (counts and percentages).
std::string render_distribution(const Dataset& ds);

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    // Document id -> fold index, in dataset order.
    std::vector<std::pair<std::string, int>> assignments;

    int fold_of(const std::string& id) const;
    std::vector<std::size_t> fold_sizes() const;
    std::string to_json_string() const;
};

// Deterministic stratified folds: within each label class, document
// positions are shuffled by splitmix64 (streams derived from `seed`) and
// dealt round-robin, each class starting where the previous one left off.
// Throws InsufficientClassError when a class has fewer than k members.
FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed);

} // namespace jop::corpus

#endif
