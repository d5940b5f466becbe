#include "jop/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "jop/errors.hpp"
#include "jop/rng.hpp"

namespace jop::corpus {

using nlohmann::json;

std::string subject_name(Subject s) {
    switch (s) {
    case Subject::homicide: return "homicide";
    case Subject::corruption: return "corruption";
    case Subject::other: return "other";
    }
    return "other";
}

Subject subject_from(const std::string& name) {
    if (name == "homicide") return Subject::homicide;
    if (name == "corruption") return Subject::corruption;
    if (name == "other") return Subject::other;
    throw SchemaError("unknown subject: " + name);
}

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void schema_fail(std::size_t line, const std::string& what) {
    throw SchemaError("line " + std::to_string(line) + ": " + what);
}

void validate(LabeledDocument& doc, std::size_t line,
              std::unordered_set<std::string>& seen) {
    if (doc.id.empty()) schema_fail(line, "empty id");
    if (!seen.insert(doc.id).second) schema_fail(line, "duplicate id '" + doc.id + "'");
    if (doc.label != 1 && doc.label != -1)
        schema_fail(line, "label must be 1 or -1, got " + std::to_string(doc.label));
    if (blank(doc.text)) schema_fail(line, "empty text for id '" + doc.id + "'");
}

Dataset load_jsonl(std::istream& in) {
    Dataset ds;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (blank(line)) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            schema_fail(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) schema_fail(lineno, "record is not an object");
        LabeledDocument doc;
        try {
            if (!rec.contains("id")) schema_fail(lineno, "missing field 'id'");
            if (!rec.contains("text")) schema_fail(lineno, "missing field 'text'");
            if (!rec.contains("label")) schema_fail(lineno, "missing field 'label'");
            doc.id = rec.at("id").get<std::string>();
            doc.text = rec.at("text").get<std::string>();
            if (!rec.at("label").is_number_integer())
                schema_fail(lineno, "label must be an integer");
            doc.label = rec.at("label").get<int>();
            if (rec.contains("subject"))
                doc.subject = subject_from(rec.at("subject").get<std::string>());
            if (rec.contains("date") && !rec.at("date").is_null())
                doc.date = rec.at("date").get<std::string>();
        } catch (const json::exception& e) {
            schema_fail(lineno, std::string("bad field type: ") + e.what());
        }
        validate(doc, lineno, seen);
        ds.documents.push_back(std::move(doc));
    }
    return ds;
}

// Minimal RFC-4180 reader: quoted fields may contain commas, doubled
// quotes and newlines.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    // Returns false at end of input. `start_line` is the 1-based line the
    // record began on, for error reporting.
    bool next(std::vector<std::string>& fields, std::size_t& start_line) {
        fields.clear();
        int c = in_.get();
        while (c == '\n') {
            ++line_;
            c = in_.get();
        }
        if (c == EOF) return false;
        start_line = line_;
        std::string field;
        bool quoted = false;
        while (true) {
            if (quoted) {
                if (c == EOF) throw SchemaError("line " + std::to_string(start_line) +
                                                ": unterminated quoted field");
                if (c == '"') {
                    int peek = in_.get();
                    if (peek == '"') {
                        field.push_back('"');
                    } else {
                        quoted = false;
                        in_.unget();
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(static_cast<char>(c));
                }
            } else if (c == '"' && field.empty()) {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '\n' || c == EOF) {
                if (c == '\n') ++line_;
                if (!field.empty() && field.back() == '\r') field.pop_back();
                fields.push_back(std::move(field));
                return true;
            } else {
                field.push_back(static_cast<char>(c));
            }
            c = in_.get();
        }
    }

private:
    std::istream& in_;
    std::size_t line_ = 1;
};

Dataset load_csv(std::istream& in) {
    CsvReader reader(in);
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (!reader.next(fields, line)) return {};
    const std::vector<std::string> expected{"id", "text", "label", "subject", "date"};
    if (fields != expected)
        throw SchemaError("line 1: CSV header must be 'id,text,label,subject,date'");

    Dataset ds;
    std::unordered_set<std::string> seen;
    while (reader.next(fields, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != 5)
            schema_fail(line, "expected 5 fields, got " + std::to_string(fields.size()));
        LabeledDocument doc;
        doc.id = fields[0];
        doc.text = fields[1];
        try {
            std::size_t pos = 0;
            doc.label = std::stoi(fields[2], &pos);
            if (pos != fields[2].size()) schema_fail(line, "label is not an integer");
        } catch (const std::logic_error&) {
            schema_fail(line, "label is not an integer: '" + fields[2] + "'");
        }
        doc.subject = fields[3].empty() ? Subject::other : subject_from(fields[3]);
        if (!fields[4].empty()) doc.date = fields[4];
        validate(doc, line, seen);
        ds.documents.push_back(std::move(doc));
    }
    return ds;
}

} // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path.string());
    Dataset ds = format == DatasetFormat::jsonl ? load_jsonl(in) : load_csv(in);
    ds.name = path.stem().string();
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".csv") return load_dataset(path, DatasetFormat::csv);
    return load_dataset(path, DatasetFormat::jsonl);
}

void write_jsonl(const Dataset& ds, std::ostream& out) {
    for (const auto& doc : ds.documents) {
        json rec{{"id", doc.id},
                 {"text", doc.text},
                 {"label", doc.label},
                 {"subject", subject_name(doc.subject)}};
        if (doc.date) rec["date"] = *doc.date;
        out << rec.dump() << '\n';
    }
}

void write_jsonl(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset file: " + path.string());
    write_jsonl(ds, out);
}

namespace {
double truncate_pct(std::size_t part, std::size_t total) {
    if (total == 0) return 0.0;
    return std::floor(1000.0 * static_cast<double>(part) / static_cast<double>(total)) /
           10.0;
}
} // namespace

ClassDistribution class_distribution(const Dataset& ds) {
    ClassDistribution dist;
    for (const auto& doc : ds.documents)
        (doc.label == 1 ? dist.absolutions : dist.condemnations)++;
    dist.total = ds.documents.size();
    dist.absolution_pct = truncate_pct(dist.absolutions, dist.total);
    dist.condemnation_pct = truncate_pct(dist.condemnations, dist.total);
    return dist;
}

std::string render_distribution(const Dataset& ds) {
    const auto d = class_distribution(ds);
    std::ostringstream out;
    out << "Dataset: " << ds.name << "\n";
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-24s %8zu  %5.1f\n", "Absolutions (+1)",
                  d.absolutions, d.absolution_pct);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-24s %8zu  %5.1f\n", "Condemnations (-1)",
                  d.condemnations, d.condemnation_pct);
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-24s %8zu  %5.1f\n", "Total", d.total,
                  d.total ? 100.0 : 0.0);
    out << buf;
    return out.str();
}

int FoldPlan::fold_of(const std::string& id) const {
    for (const auto& [doc_id, fold] : assignments)
        if (doc_id == id) return fold;
    throw Error("fold plan has no assignment for id '" + id + "'");
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [id, fold] : assignments) sizes[static_cast<std::size_t>(fold)]++;
    return sizes;
}

std::string FoldPlan::to_json_string() const {
    json obj;
    obj["k"] = k;
    obj["seed"] = seed;
    json assign = json::object();
    for (const auto& [id, fold] : assignments) assign[id] = fold;
    obj["assignments"] = assign;
    return obj.dump(2);
}

FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw Error("stratified_kfold: k must be >= 2");

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.reserve(ds.documents.size());
    std::vector<int> fold_by_index(ds.documents.size(), -1);

    std::size_t next_start = 0;
    int class_stream = 0;
    for (int label : {+1, -1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.documents.size(); ++i)
            if (ds.documents[i].label == label) members.push_back(i);
        if (members.size() < static_cast<std::size_t>(k))
            throw InsufficientClassError(
                "label " + std::to_string(label) + " has " +
                std::to_string(members.size()) + " documents, need at least " +
                std::to_string(k));
        SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(class_stream++)));
        rng.shuffle(members);
        for (std::size_t j = 0; j < members.size(); ++j)
            fold_by_index[members[j]] =
                static_cast<int>((next_start + j) % static_cast<std::size_t>(k));
        next_start = (next_start + members.size()) % static_cast<std::size_t>(k);
    }

    for (std::size_t i = 0; i < ds.documents.size(); ++i)
        plan.assignments.emplace_back(ds.documents[i].id, fold_by_index[i]);
    return plan;
}

} // namespace jop::corpus
