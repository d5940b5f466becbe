// jop: judicial outcome prediction toolkit.
//
// Subcommands: prepare, crossval, train, predict, explain, rank-attention.
// Every run is a pure function of its input files, flags and seed; all
// artifacts are written atomically and reruns are byte-identical.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "jop/attention.hpp"
#include "jop/corpus.hpp"
#include "jop/errors.hpp"
#include "jop/eval.hpp"
#include "jop/model_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitTraining = 3;
constexpr int kExitUsage = 4;

void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>{});
}

struct CommonArgs {
    std::string dataset;
    std::string embeddings;
    std::string model;
    std::string out = "out";
    std::uint64_t seed = 42;
    int jobs = 1;
    std::string config_path;
};

eval::PipelineConfig resolve_config(const CommonArgs& args) {
    if (args.config_path.empty()) return {};
    json overrides;
    try {
        overrides = json::parse(slurp(args.config_path));
    } catch (const json::exception& e) {
        throw SchemaError("config file " + args.config_path + ": " + e.what());
    }
    return eval::pipeline_from_json(overrides);
}

void write_run_json(const CommonArgs& args, const std::string& subcommand,
                    const eval::PipelineConfig& cfg, json extras = json::object()) {
    json run;
    run["subcommand"] = subcommand;
    run["dataset"] = args.dataset;
    run["embeddings"] = args.embeddings;
    run["model"] = args.model;
    run["out"] = args.out;
    run["seed"] = args.seed;
    run["jobs"] = args.jobs;
    run["config"] = eval::pipeline_to_json(cfg);
    for (auto& [key, value] : extras.items()) run[key] = value;
    write_atomic(fs::path(args.out) / "run.json", run.dump(2) + "\n");
}

// First data line determines the vector width; a `count dim` header is
// honoured when present.
std::size_t probe_embedding_dim(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file: " + path.string());
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::vector<std::string> parts;
        std::string tok;
        while (fields >> tok) parts.push_back(tok);
        if (first && parts.size() == 2) {
            try {
                return std::stoul(parts[1]);
            } catch (const std::logic_error&) {
            }
        }
        first = false;
        if (parts.size() >= 2) return parts.size() - 1;
    }
    throw DimensionError("embedding file has no data lines: " + path.string());
}

features::EmbeddingTable load_table(const std::string& path, std::size_t dim = 0) {
    if (dim == 0) dim = probe_embedding_dim(path);
    auto table = features::EmbeddingTable::load(fs::path(path), dim);
    if (table.skipped_lines() > 0)
        std::cerr << "embeddings: skipped " << table.skipped_lines()
                  << " malformed line(s)\n";
    return table;
}

corpus::Dataset load_ds(const std::string& path, const std::string& format) {
    if (format == "jsonl") return corpus::load_dataset(path, corpus::DatasetFormat::jsonl);
    if (format == "csv") return corpus::load_dataset(path, corpus::DatasetFormat::csv);
    return corpus::load_dataset(path);
}

bool known_kind(const std::string& kind) {
    static const std::set<std::string> kinds{"logreg", "lda", "knn", "cart", "nb",
                                             "svm", "mlp", "rnn", "lstm", "gru", "han"};
    return kinds.count(kind) > 0;
}

std::string sanitize_filename(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                              c == '-' || c == '_'
                          ? c
                          : '_');
    return out;
}

// Loads a model container plus the vocabulary its vocabulary_ref points
// to (relative to the container's directory).
std::pair<io::TrainedModel, text::Vocabulary> load_model_bundle(const fs::path& model_path) {
    auto tm = io::load(model_path);
    fs::path vocab_path = tm.vocabulary_ref;
    if (vocab_path.is_relative()) vocab_path = model_path.parent_path() / vocab_path;
    auto vocab = text::Vocabulary::load(vocab_path);
    return {std::move(tm), std::move(vocab)};
}

// ---- subcommands ------------------------------------------------------------------

int cmd_prepare(const CommonArgs& args, const std::string& format,
                const eval::PipelineConfig& cfg) {
    auto ds = load_ds(args.dataset, format);

    text::Preprocessor preproc;
    preproc.filter_stopwords = cfg.filter_stopwords;
    if (cfg.stopword_source == "builtin")
        preproc.stopwords = text::StopwordList::builtin_portuguese();
    else if (cfg.stopword_source == "none")
        preproc.stopwords = text::StopwordList::none();
    else
        preproc.stopwords = text::StopwordList::from_file(cfg.stopword_source);

    auto vocab = text::build_vocabulary(ds, cfg.min_count, preproc);
    auto dist = corpus::class_distribution(ds);
    auto caps = text::suggest_caps(ds, preproc, cfg.caps_percentile);

    json stats;
    stats["dataset"] = ds.name;
    stats["total"] = dist.total;
    stats["absolutions"] = {{"count", dist.absolutions}, {"pct", dist.absolution_pct}};
    stats["condemnations"] = {{"count", dist.condemnations},
                              {"pct", dist.condemnation_pct}};
    stats["vocabulary_size"] = vocab.token_count();
    stats["suggested_caps"] = {{"m_cap", caps.m_cap}, {"n_cap", caps.n_cap}};

    std::ostringstream prepared;
    for (const auto& doc : ds.documents) {
        json rec;
        rec["id"] = doc.id;
        rec["label"] = doc.label;
        rec["sentences"] = preproc.sentence_tokens(doc.text);
        prepared << rec.dump() << '\n';
    }

    const fs::path out(args.out);
    write_atomic(out / "vocabulary.json", vocab.to_json_string() + "\n");
    write_atomic(out / "stats.json", stats.dump(2) + "\n");
    write_atomic(out / "stats.txt", corpus::render_distribution(ds));
    write_atomic(out / "prepared.jsonl", prepared.str());
    write_run_json(args, "prepare", cfg);
    std::cout << corpus::render_distribution(ds);
    return kExitOk;
}

int cmd_crossval(const CommonArgs& args, int k, const eval::PipelineConfig& cfg) {
    auto ds = load_ds(args.dataset, "auto");
    std::optional<features::EmbeddingTable> table;
    if (eval::is_neural_kind(args.model)) {
        if (args.embeddings.empty())
            throw Error("model '" + args.model + "' needs --embeddings");
        table = load_table(args.embeddings);
    }

    auto report = eval::cross_validate(args.model, ds, k, args.seed, cfg,
                                       table ? &*table : nullptr, args.jobs);

    const fs::path out(args.out);
    write_atomic(out / "cv_report.json", report.to_json_string() + "\n");
    write_atomic(out / "cv_table.txt", report.to_table());
    write_run_json(args, "crossval", cfg, json{{"k", k}});
    std::cout << report.to_table();
    std::cerr << "wall time " << report.wall_sec << " s\n";
    return kExitOk;
}

int cmd_train(const CommonArgs& args, const eval::PipelineConfig& cfg) {
    auto ds = load_ds(args.dataset, "auto");
    std::optional<features::EmbeddingTable> table;
    if (eval::is_neural_kind(args.model)) {
        if (args.embeddings.empty())
            throw Error("model '" + args.model + "' needs --embeddings");
        table = load_table(args.embeddings);
    }

    auto outcome =
        eval::train_any(args.model, ds, cfg, table ? &*table : nullptr, args.seed);
    outcome.model.vocabulary_ref = "vocabulary.json";

    json log;
    log["stop_reason"] = outcome.log.stop_reason == neural::StopReason::early_stop
                             ? "early_stop"
                             : "max_epochs";
    log["best_epoch"] = outcome.log.best_epoch;
    json epochs = json::array();
    for (std::size_t e = 0; e < outcome.log.epoch_loss.size(); ++e)
        epochs.push_back({{"epoch", e + 1},
                          {"loss", outcome.log.epoch_loss[e]},
                          {"lr", outcome.log.epoch_lr[e]}});
    log["epochs"] = epochs;

    const fs::path out(args.out);
    write_atomic(out / "vocabulary.json", outcome.vocab.to_json_string() + "\n");
    write_atomic(out / "model.json", io::to_json_string(outcome.model) + "\n");
    write_atomic(out / "training_log.json", log.dump(2) + "\n");
    write_run_json(args, "train", cfg);
    for (std::size_t e = 0; e < outcome.log.epoch_wall_sec.size(); ++e)
        std::cerr << "epoch " << e + 1 << ": loss " << outcome.log.epoch_loss[e]
                  << ", lr " << outcome.log.epoch_lr[e] << ", "
                  << outcome.log.epoch_wall_sec[e] << " s\n";
    return kExitOk;
}

int cmd_predict(const CommonArgs& args, const eval::PipelineConfig& cfg) {
    auto [tm, vocab] = load_model_bundle(args.model);
    auto ds = load_ds(args.dataset, "auto");

    std::optional<features::EmbeddingTable> table;
    if (tm.is_neural() && !tm.as_neural().owns_embeddings) {
        if (args.embeddings.empty())
            throw Error("this model needs --embeddings for scoring");
        table = load_table(args.embeddings, tm.as_neural().net.embedding_dim);
    }
    auto ctx = eval::context_for(tm, std::move(vocab), table ? &*table : nullptr);

    std::ostringstream lines;
    for (const auto& doc : ds.documents) {
        auto scored = eval::score_document(tm, ctx, doc);
        json rec{{"id", doc.id}, {"label", scored.label}, {"score", scored.score}};
        lines << rec.dump() << '\n';
    }
    write_atomic(fs::path(args.out) / "predictions.jsonl", lines.str());
    write_run_json(args, "predict", cfg);
    return kExitOk;
}

int cmd_explain(const CommonArgs& args, const eval::PipelineConfig& cfg) {
    auto [tm, vocab] = load_model_bundle(args.model);
    auto ds = load_ds(args.dataset, "auto");

    std::optional<features::EmbeddingTable> table;
    if (tm.is_neural() && !tm.as_neural().owns_embeddings) {
        if (args.embeddings.empty())
            throw Error("this model needs --embeddings for scoring");
        table = load_table(args.embeddings, tm.as_neural().net.embedding_dim);
    }
    auto ctx = eval::context_for(tm, std::move(vocab), table ? &*table : nullptr);

    auto records = attention::extract_attention(tm, ctx, ds, args.jobs);
    const fs::path out(args.out);
    write_atomic(out / "records.tsv", attention::records_to_tsv(records));
    for (const auto& doc : ds.documents) {
        auto exp = attention::explain_document(tm, ctx, doc);
        write_atomic(out / "heatmaps" / (sanitize_filename(doc.id) + ".html"),
                     attention::render_heatmap(exp));
    }
    write_run_json(args, "explain", cfg);
    std::cerr << records.size() << " attention records over " << ds.size()
              << " documents\n";
    return kExitOk;
}

int cmd_rank_attention(const CommonArgs& args, const std::string& records_path,
                       const std::string& cls, std::size_t top_k,
                       const std::string& score_field, bool by_predicted,
                       const eval::PipelineConfig& cfg) {
    auto records = attention::records_from_tsv(slurp(records_path));
    const auto field = attention::score_field_from(score_field);

    const fs::path out(args.out);
    auto write_class = [&](int outcome_class, const std::string& name) {
        auto ranking = attention::rank_by_class(records, outcome_class, top_k, field,
                                                by_predicted);
        write_atomic(out / ("ranking_" + name + ".json"),
                     ranking.to_json_string() + "\n");
    };
    if (cls == "both") {
        bool has_pos = false, has_neg = false;
        for (const auto& r : records) {
            has_pos |= (by_predicted ? r.pred : r.gold) == +1;
            has_neg |= (by_predicted ? r.pred : r.gold) == -1;
        }
        if (has_pos) write_class(+1, "absolution");
        if (has_neg) write_class(-1, "condemnation");
    } else if (cls == "1" || cls == "+1") {
        write_class(+1, "absolution");
    } else if (cls == "-1") {
        write_class(-1, "condemnation");
    } else {
        throw Error("--class must be +1, -1 or both");
    }

    auto stats = attention::boxplot_stats(records, field);
    write_atomic(out / "boxplot_stats.json",
                 attention::boxplot_to_json(stats, field) + "\n");
    auto counts = attention::token_counts(records);
    write_atomic(out / "token_counts.txt",
                 attention::render_token_counts(counts, fs::path(records_path).stem().string()));
    write_run_json(args, "rank-attention", cfg,
                   json{{"records", records_path},
                        {"class", cls},
                        {"top_k", top_k},
                        {"score_field", score_field},
                        {"by_predicted", by_predicted}});
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"judicial outcome prediction: classical and attention-based text "
                 "classifiers with word-level explanations"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string format = "auto";
    int k = 10;
    std::string cls = "both";
    std::size_t top_k = 20;
    std::string score_field = "word_weight";
    bool by_predicted = false;
    std::string records_path;

    auto add_common = [&](CLI::App* cmd, bool needs_dataset = true) {
        if (needs_dataset)
            cmd->add_option("--dataset", args.dataset, "labeled dataset (jsonl or csv)")
                ->required();
        cmd->add_option("--out", args.out, "output directory");
        cmd->add_option("--seed", args.seed, "root seed for all randomness");
        cmd->add_option("--jobs", args.jobs, "worker threads for folds/documents");
        cmd->add_option("--config", args.config_path, "JSON hyper-parameter overrides");
    };

    auto* prepare = app.add_subcommand("prepare", "tokenize, build vocabulary, report stats");
    add_common(prepare);
    prepare->add_option("--format", format, "dataset format: auto|jsonl|csv");
    int min_count_flag = -1;
    std::string stopwords_flag;
    prepare->add_option("--min-count", min_count_flag,
                        "minimum token frequency for the vocabulary");
    prepare->add_option("--stopwords", stopwords_flag,
                        "stopword list: builtin|none|<file>");

    auto* crossval = app.add_subcommand("crossval", "stratified k-fold evaluation");
    add_common(crossval);
    crossval->add_option("--model", args.model, "model kind (logreg..svm, mlp..han)")
        ->required();
    crossval->add_option("--embeddings", args.embeddings, "embedding file (neural kinds)");
    crossval->add_option("--k", k, "fold count");

    auto* train = app.add_subcommand("train", "train one model on the full dataset");
    add_common(train);
    train->add_option("--model", args.model, "model kind")->required();
    train->add_option("--embeddings", args.embeddings, "embedding file (neural kinds)");

    auto* predict = app.add_subcommand("predict", "score a dataset with a trained model");
    add_common(predict);
    predict->add_option("--model", args.model, "trained model container")->required();
    predict->add_option("--embeddings", args.embeddings, "embedding file");

    auto* explain = app.add_subcommand("explain", "attention records and heatmaps");
    add_common(explain);
    explain->add_option("--model", args.model, "trained hierarchical model")->required();
    explain->add_option("--embeddings", args.embeddings, "embedding file");

    auto* rank = app.add_subcommand("rank-attention", "rank extracted attention records");
    add_common(rank, /*needs_dataset=*/false);
    rank->add_option("--records", records_path, "records.tsv from explain")->required();
    rank->add_option("--class", cls, "outcome class: +1|-1|both");
    rank->add_option("--top-k", top_k, "entries per ranking");
    rank->add_option("--score-field", score_field, "word_weight|doc_contribution");
    rank->add_flag("--by-predicted", by_predicted, "group by predicted label");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if ((crossval->parsed() || train->parsed()) && !known_kind(args.model)) {
            std::cerr << "error: unknown model kind '" << args.model << "'\n";
            return kExitUsage;
        }
        auto cfg = resolve_config(args);
        if (min_count_flag >= 1) cfg.min_count = min_count_flag;
        if (!stopwords_flag.empty()) cfg.stopword_source = stopwords_flag;
        if (prepare->parsed()) return cmd_prepare(args, format, cfg);
        if (crossval->parsed()) return cmd_crossval(args, k, cfg);
        if (train->parsed()) return cmd_train(args, cfg);
        if (predict->parsed()) return cmd_predict(args, cfg);
        if (explain->parsed()) return cmd_explain(args, cfg);
        if (rank->parsed())
            return cmd_rank_attention(args, records_path, cls, top_k, score_field,
                                      by_predicted, cfg);
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const EmptyVocabularyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const EmptyDatasetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const AllMaskedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NotAttentionModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    }
}
