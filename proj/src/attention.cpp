#include "jop/attention.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "jop/errors.hpp"

namespace jop::attention {

using nlohmann::json;

std::string score_field_name(ScoreField f) {
    return f == ScoreField::word_weight ? "word_weight" : "doc_contribution";
}

ScoreField score_field_from(const std::string& name) {
    if (name == "word_weight") return ScoreField::word_weight;
    if (name == "doc_contribution") return ScoreField::doc_contribution;
    throw Error("unknown score field: " + name);
}

double record_score(const AttentionRecord& r, ScoreField f) {
    return f == ScoreField::word_weight ? r.word_weight : r.doc_contribution;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

DocExplanation explain_document(const io::TrainedModel& tm,
                                const eval::PredictContext& ctx,
                                const corpus::LabeledDocument& doc) {
    if (!tm.is_neural() || tm.as_neural().kind != neural::Kind::han)
        throw NotAttentionModelError("attention extraction requires the 'han' kind, got '" +
                                     tm.kind() + "'");
    const auto& model = tm.as_neural();

    auto hd = text::to_hierarchical(doc, ctx.vocab, ctx.m_cap, ctx.n_cap, ctx.preproc);
    const features::EmbeddingTable empty(model.net.embedding_dim);
    const features::EmbeddingTable* table = ctx.table ? ctx.table : &empty;

    neural::Example ex;
    ex.label = doc.label;
    ex.m_cap = hd.m_cap;
    ex.n_cap = hd.n_cap;
    ex.grid = features::embed_grid(*table, hd, ctx.vocab);
    ex.word_mask = hd.word_mask;
    ex.sentence_mask = hd.sentence_mask;
    ex.grid_indices = hd.grid;
    if (std::none_of(hd.sentence_mask.begin(), hd.sentence_mask.end(),
                     [](std::uint8_t m) { return m != 0; })) {
        ex.word_mask[0] = 1;
        ex.sentence_mask[0] = 1;
        hd.surfaces.assign(1, {""});
    }

    DocExplanation out;
    out.doc_id = doc.id;
    out.trace = neural::han_forward(model, ex);
    out.surfaces = hd.surfaces;
    out.gold = doc.label;
    out.pred = out.trace.prob_pos >= 0.5 ? +1 : -1;
    return out;
}

std::vector<AttentionRecord> extract_attention(const io::TrainedModel& tm,
                                               const eval::PredictContext& ctx,
                                               const corpus::Dataset& ds, int jobs) {
    if (!tm.is_neural() || tm.as_neural().kind != neural::Kind::han)
        throw NotAttentionModelError("attention extraction requires the 'han' kind, got '" +
                                     tm.kind() + "'");

    std::vector<std::vector<AttentionRecord>> per_doc(ds.size());
    std::vector<std::string> errors(ds.size());
    auto run_doc = [&](std::size_t i) {
        try {
            auto exp = explain_document(tm, ctx, ds.documents[i]);
            auto& records = per_doc[i];
            for (std::size_t t = 0; t < exp.surfaces.size(); ++t) {
                for (std::size_t w = 0; w < exp.surfaces[t].size(); ++w) {
                    AttentionRecord r;
                    r.doc_id = exp.doc_id;
                    r.sentence_index = t;
                    r.word_position = w;
                    r.token = exp.surfaces[t][w];
                    r.word_weight = exp.trace.word_weights[t][w];
                    r.sentence_weight = exp.trace.sentence_weights[t];
                    r.doc_contribution = r.word_weight * r.sentence_weight;
                    r.gold = exp.gold;
                    r.pred = exp.pred;
                    records.push_back(std::move(r));
                }
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < ds.size(); ++i) run_doc(i);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&, w]() {
                for (std::size_t i = static_cast<std::size_t>(w); i < ds.size();
                     i += static_cast<std::size_t>(jobs))
                    run_doc(i);
            });
        for (auto& t : workers) t.join();
    }
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (!errors[i].empty())
            throw Error("document '" + ds.documents[i].id + "': " + errors[i]);

    // Merge in ascending doc-id order.
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ds.documents[a].id < ds.documents[b].id;
    });
    std::vector<AttentionRecord> records;
    for (std::size_t i : order)
        for (auto& r : per_doc[i]) records.push_back(std::move(r));
    return records;
}

// ---- rankings -----------------------------------------------------------------

std::string AttentionRanking::to_json_string() const {
    json obj;
    obj["class"] = outcome_class;
    obj["score_field"] = score_field_name(field);
    json rows = json::array();
    for (const auto& e : entries)
        rows.push_back({{"rank", e.rank},
                        {"word", e.token},
                        {"weight", e.weight},
                        {"doc_id", e.doc_id},
                        {"sentence", e.sentence_index},
                        {"position", e.word_position}});
    obj["entries"] = rows;
    return obj.dump(2);
}

AttentionRanking rank_by_class(const std::vector<AttentionRecord>& records,
                               int outcome_class, std::size_t top_k, ScoreField field,
                               bool group_by_predicted) {
    std::vector<const AttentionRecord*> in_class;
    for (const auto& r : records)
        if ((group_by_predicted ? r.pred : r.gold) == outcome_class)
            in_class.push_back(&r);
    if (in_class.empty())
        throw EmptyClassError("no attention records for class " +
                              std::to_string(outcome_class));

    std::sort(in_class.begin(), in_class.end(),
              [&](const AttentionRecord* a, const AttentionRecord* b) {
                  const double sa = record_score(*a, field);
                  const double sb = record_score(*b, field);
                  if (sa != sb) return sa > sb;
                  if (a->token != b->token) return a->token < b->token;
                  if (a->doc_id != b->doc_id) return a->doc_id < b->doc_id;
                  if (a->sentence_index != b->sentence_index)
                      return a->sentence_index < b->sentence_index;
                  return a->word_position < b->word_position;
              });

    AttentionRanking ranking;
    ranking.outcome_class = outcome_class;
    ranking.field = field;
    const std::size_t n = std::min(top_k, in_class.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto* r = in_class[i];
        ranking.entries.push_back({i + 1, r->token, record_score(*r, field), r->doc_id,
                                   r->sentence_index, r->word_position});
    }
    return ranking;
}

std::map<int, ClassTokenCounts> token_counts(const std::vector<AttentionRecord>& records) {
    std::map<int, ClassTokenCounts> counts;
    std::map<int, std::set<std::string>> distinct;
    for (const auto& r : records) {
        counts[r.gold].occurrences++;
        distinct[r.gold].insert(r.token);
    }
    for (auto& [cls, c] : counts) c.distinct_tokens = distinct[cls].size();
    return counts;
}

std::string render_token_counts(const std::map<int, ClassTokenCounts>& counts,
                                const std::string& dataset_name) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-36s %-16s %-16s\n", "Dataset",
                  "Word Tokens", "Unique Tokens");
    out << buf;
    const auto row = [&](int cls, const char* label) {
        ClassTokenCounts c;
        if (auto it = counts.find(cls); it != counts.end()) c = it->second;
        std::snprintf(buf, sizeof(buf), "%-36s %-16zu %-16zu\n",
                      (dataset_name + " " + label).c_str(), c.occurrences,
                      c.distinct_tokens);
        out << buf;
    };
    row(+1, "Absolutions");
    row(-1, "Condemnations");
    return out.str();
}

std::map<int, BoxplotStats> boxplot_stats(const std::vector<AttentionRecord>& records,
                                          ScoreField field) {
    if (records.empty()) throw EmptyClassError("no attention records to summarize");
    std::map<int, std::vector<double>> values;
    for (const auto& r : records) values[r.gold].push_back(record_score(r, field));

    auto quantile = [](const std::vector<double>& v, double p) {
        const double h = (static_cast<double>(v.size()) - 1.0) * p;
        const std::size_t lo = static_cast<std::size_t>(h);
        const double frac = h - static_cast<double>(lo);
        if (lo + 1 >= v.size()) return v.back();
        return v[lo] + frac * (v[lo + 1] - v[lo]);
    };
    std::map<int, BoxplotStats> stats;
    for (auto& [cls, v] : values) {
        std::sort(v.begin(), v.end());
        BoxplotStats s;
        s.min = v.front();
        s.q1 = quantile(v, 0.25);
        s.median = quantile(v, 0.5);
        s.q3 = quantile(v, 0.75);
        s.max = v.back();
        s.count = v.size();
        stats[cls] = s;
    }
    return stats;
}

std::string boxplot_to_json(const std::map<int, BoxplotStats>& stats, ScoreField field) {
    json obj;
    obj["score_field"] = score_field_name(field);
    json classes = json::object();
    for (const auto& [cls, s] : stats)
        classes[std::to_string(cls)] = {{"min", s.min},     {"q1", s.q1},
                                        {"median", s.median}, {"q3", s.q3},
                                        {"max", s.max},     {"count", s.count}};
    obj["classes"] = classes;
    return obj.dump(2);
}

// ---- heatmap -------------------------------------------------------------------

namespace {

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::string render_heatmap(const DocExplanation& doc) {
    double max_sentence = 0.0;
    for (double w : doc.trace.sentence_weights) max_sentence = std::max(max_sentence, w);
    if (max_sentence <= 0.0) max_sentence = 1.0;

    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"pt\">\n<head>\n<meta charset=\"utf-8\">\n"
        << "<title>" << escape_html(doc.doc_id) << "</title>\n<style>\n"
        << "body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:1.7}\n"
        << ".sentence{margin:.5em 0;display:flex;align-items:baseline}\n"
        << ".sbar{display:inline-block;height:.75em;background:#4a7fb5;"
           "margin-right:.6em;flex:none;min-width:1px}\n"
        << ".word{padding:0 .15em;border-radius:2px}\n"
        << "</style>\n</head>\n<body>\n"
        << "<h2>" << escape_html(doc.doc_id) << "</h2>\n"
        << "<p>gold " << doc.gold << ", predicted " << doc.pred << " (p+ = "
        << format_double(doc.trace.prob_pos) << ")</p>\n";

    for (std::size_t t = 0; t < doc.surfaces.size(); ++t) {
        const double s_weight = doc.trace.sentence_weights[t];
        double max_word = 0.0;
        for (std::size_t w = 0; w < doc.surfaces[t].size(); ++w)
            max_word = std::max(max_word, doc.trace.word_weights[t][w]);
        if (max_word <= 0.0) max_word = 1.0;

        out << "<div class=\"sentence\"><span class=\"sbar\" style=\"width:"
            << format_double(120.0 * s_weight / max_sentence)
            << "px\" title=\"sentence weight " << format_double(s_weight)
            << "\"></span><span class=\"words\">";
        for (std::size_t w = 0; w < doc.surfaces[t].size(); ++w) {
            const double weight = doc.trace.word_weights[t][w];
            out << "<span class=\"word\" style=\"background-color:rgba(230,140,0,"
                << format_double(weight / max_word) << ")\" title=\"word "
                << format_double(weight) << " / sentence " << format_double(s_weight)
                << "\">" << escape_html(doc.surfaces[t][w]) << "</span> ";
        }
        out << "</span></div>\n";
    }
    out << "</body>\n</html>\n";
    return out.str();
}

void write_heatmap(const DocExplanation& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write heatmap: " + path.string());
    out << render_heatmap(doc);
}

// ---- tsv -----------------------------------------------------------------------

std::string records_to_tsv(const std::vector<AttentionRecord>& records) {
    std::ostringstream out;
    out << "doc_id\tsentence\tposition\ttoken\tword_weight\tsentence_weight"
           "\tdoc_contribution\tgold\tpred\n";
    for (const auto& r : records) {
        out << r.doc_id << '\t' << r.sentence_index << '\t' << r.word_position << '\t'
            << r.token << '\t' << format_double(r.word_weight) << '\t'
            << format_double(r.sentence_weight) << '\t'
            << format_double(r.doc_contribution) << '\t' << r.gold << '\t' << r.pred
            << '\n';
    }
    return out.str();
}

std::vector<AttentionRecord> records_from_tsv(const std::string& text) {
    std::vector<AttentionRecord> records;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("doc_id\t", 0) == 0) continue;  // header
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 9)
            throw SchemaError("line " + std::to_string(lineno) +
                              ": expected 9 tab-separated fields");
        AttentionRecord r;
        r.doc_id = fields[0];
        r.sentence_index = std::stoul(fields[1]);
        r.word_position = std::stoul(fields[2]);
        r.token = fields[3];
        r.word_weight = std::stod(fields[4]);
        r.sentence_weight = std::stod(fields[5]);
        r.doc_contribution = std::stod(fields[6]);
        r.gold = std::stoi(fields[7]);
        r.pred = std::stoi(fields[8]);
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace jop::attention
