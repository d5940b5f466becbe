#include "jop/eval.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "jop/errors.hpp"
#include "jop/rng.hpp"

namespace jop::eval {

using nlohmann::json;

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& golds, int positive_class) {
    if (predictions.size() != golds.size() || predictions.empty())
        throw LengthMismatchError("predictions and golds must have equal length >= 1");
    ConfusionMatrix cm;
    cm.positive_class = positive_class;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_class;
        const bool gold_pos = golds[i] == positive_class;
        if (pred_pos && gold_pos)
            ++cm.tp;
        else if (pred_pos)
            ++cm.fp;
        else if (gold_pos)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw LengthMismatchError("empty confusion matrix");
    Metrics m;
    const double tp = static_cast<double>(cm.tp);
    m.precision = (cm.tp + cm.fp) ? tp / static_cast<double>(cm.tp + cm.fp) : 0.0;
    m.recall = (cm.tp + cm.fn) ? tp / static_cast<double>(cm.tp + cm.fn) : 0.0;
    m.f_score = (m.precision + m.recall) > 0.0
                    ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                    : 0.0;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    return m;
}

// ---- configuration ------------------------------------------------------------

json pipeline_to_json(const PipelineConfig& c) {
    json j;
    j["min_count"] = c.min_count;
    j["filter_stopwords"] = c.filter_stopwords;
    j["stopword_source"] = c.stopword_source;
    j["l2_normalize"] = c.l2_normalize;
    j["caps_percentile"] = c.caps_percentile;
    j["m_cap"] = c.m_cap;
    j["n_cap"] = c.n_cap;
    j["positive_class"] = c.positive_class;
    j["logreg"] = {{"epochs", c.logreg.epochs}, {"lr", c.logreg.lr}, {"l2", c.logreg.l2}};
    j["lda"] = {{"shrinkage", c.lda.shrinkage}};
    j["knn"] = {{"k", c.knn.k}};
    j["cart"] = {{"max_depth", c.cart.max_depth}, {"min_leaf", c.cart.min_leaf}};
    j["nb"] = {{"alpha", c.nb.alpha}};
    j["svm"] = {{"lambda", c.svm.lambda}, {"epochs", c.svm.epochs}};
    j["net"] = {{"embedding_dim", c.net.embedding_dim},
                {"hidden", c.net.hidden},
                {"attention_dim", c.net.attention_dim}};
    j["train"] = {{"initial_lr", c.train.initial_lr},
                  {"lr_decay_factor", c.train.lr_decay_factor},
                  {"lr_decay_every", c.train.lr_decay_every},
                  {"early_stop_min_delta", c.train.early_stop_min_delta},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"max_epochs", c.train.max_epochs},
                  {"batch_size", c.train.batch_size},
                  {"momentum", c.train.momentum},
                  {"finetune_embeddings", c.train.finetune_embeddings}};
    return j;
}

PipelineConfig pipeline_from_json(const json& j) {
    PipelineConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw SchemaError("config overrides must be a JSON object");
    c.min_count = j.value("min_count", c.min_count);
    c.filter_stopwords = j.value("filter_stopwords", c.filter_stopwords);
    c.stopword_source = j.value("stopword_source", c.stopword_source);
    c.l2_normalize = j.value("l2_normalize", c.l2_normalize);
    c.caps_percentile = j.value("caps_percentile", c.caps_percentile);
    c.m_cap = j.value("m_cap", c.m_cap);
    c.n_cap = j.value("n_cap", c.n_cap);
    c.positive_class = j.value("positive_class", c.positive_class);
    if (j.contains("logreg")) {
        const auto& o = j.at("logreg");
        c.logreg.epochs = o.value("epochs", c.logreg.epochs);
        c.logreg.lr = o.value("lr", c.logreg.lr);
        c.logreg.l2 = o.value("l2", c.logreg.l2);
    }
    if (j.contains("lda"))
        c.lda.shrinkage = j.at("lda").value("shrinkage", c.lda.shrinkage);
    if (j.contains("knn")) c.knn.k = j.at("knn").value("k", c.knn.k);
    if (j.contains("cart")) {
        c.cart.max_depth = j.at("cart").value("max_depth", c.cart.max_depth);
        c.cart.min_leaf = j.at("cart").value("min_leaf", c.cart.min_leaf);
    }
    if (j.contains("nb")) c.nb.alpha = j.at("nb").value("alpha", c.nb.alpha);
    if (j.contains("svm")) {
        c.svm.lambda = j.at("svm").value("lambda", c.svm.lambda);
        c.svm.epochs = j.at("svm").value("epochs", c.svm.epochs);
    }
    if (j.contains("net")) {
        const auto& o = j.at("net");
        c.net.embedding_dim = o.value("embedding_dim", c.net.embedding_dim);
        c.net.hidden = o.value("hidden", c.net.hidden);
        c.net.attention_dim = o.value("attention_dim", c.net.attention_dim);
    }
    if (j.contains("train")) {
        const auto& o = j.at("train");
        c.train.initial_lr = o.value("initial_lr", c.train.initial_lr);
        c.train.lr_decay_factor = o.value("lr_decay_factor", c.train.lr_decay_factor);
        c.train.lr_decay_every = o.value("lr_decay_every", c.train.lr_decay_every);
        c.train.early_stop_min_delta =
            o.value("early_stop_min_delta", c.train.early_stop_min_delta);
        c.train.early_stop_patience =
            o.value("early_stop_patience", c.train.early_stop_patience);
        c.train.max_epochs = o.value("max_epochs", c.train.max_epochs);
        c.train.batch_size = o.value("batch_size", c.train.batch_size);
        c.train.momentum = o.value("momentum", c.train.momentum);
        c.train.finetune_embeddings =
            o.value("finetune_embeddings", c.train.finetune_embeddings);
    }
    return c;
}

bool is_neural_kind(const std::string& kind) {
    return kind == "mlp" || kind == "rnn" || kind == "lstm" || kind == "gru" ||
           kind == "han";
}

// ---- pipeline assembly ----------------------------------------------------------

namespace {

text::Preprocessor make_preprocessor(const PipelineConfig& cfg) {
    text::Preprocessor pre;
    pre.filter_stopwords = cfg.filter_stopwords;
    if (cfg.stopword_source == "builtin")
        pre.stopwords = text::StopwordList::builtin_portuguese();
    else if (cfg.stopword_source == "none")
        pre.stopwords = text::StopwordList::none();
    else
        pre.stopwords = text::StopwordList::from_file(cfg.stopword_source);
    return pre;
}

} // namespace

TrainOutcome train_any(const std::string& kind, const corpus::Dataset& ds,
                       const PipelineConfig& cfg,
                       const features::EmbeddingTable* table, std::uint64_t seed) {
    auto preproc = make_preprocessor(cfg);
    auto vocab = text::build_vocabulary(ds, cfg.min_count, preproc);
    auto tfidf = features::TfidfModel::fit(ds, vocab, preproc);

    std::size_t m_cap = cfg.m_cap, n_cap = cfg.n_cap;
    if (m_cap == 0 || n_cap == 0) {
        auto caps = text::suggest_caps(ds, preproc, cfg.caps_percentile);
        if (m_cap == 0) m_cap = caps.m_cap;
        if (n_cap == 0) n_cap = caps.n_cap;
    }

    json config = pipeline_to_json(cfg);
    config["m_cap"] = m_cap;
    config["n_cap"] = n_cap;

    TrainOutcome out;
    out.model.seed = seed;

    if (is_neural_kind(kind)) {
        if (!table)
            throw Error("neural model '" + kind + "' requires an embedding table");
        std::vector<neural::Example> examples;
        examples.reserve(ds.size());
        for (const auto& doc : ds.documents)
            examples.push_back(
                neural::make_example(doc, vocab, *table, preproc, m_cap, n_cap));
        neural::NetConfig net = cfg.net;
        net.embedding_dim = table->dim();
        net.m_cap = m_cap;
        net.n_cap = n_cap;
        neural::TrainConfig tc = cfg.train;
        tc.seed = seed;
        auto result =
            neural::train(neural::kind_from(kind), examples, net, tc, table, &vocab);
        out.log = std::move(result.log);
        out.model.train_loss_curve = out.log.epoch_loss;
        config["net"]["embedding_dim"] = net.embedding_dim;
        out.model.model = std::move(result.model);
    } else {
        classic::Samples X;
        classic::Labels y;
        const bool use_counts = kind == "nb";
        for (const auto& doc : ds.documents) {
            auto tokens = preproc.flat_tokens(doc.text);
            X.push_back(use_counts ? tfidf.counts(tokens)
                                   : tfidf.transform(tokens, cfg.l2_normalize));
            y.push_back(doc.label);
        }
        const std::size_t dim = vocab.size();
        switch (classic::kind_from(kind)) {
        case classic::Kind::logreg:
            out.model.model = classic::train_logreg(X, y, dim, cfg.logreg);
            break;
        case classic::Kind::lda:
            out.model.model = classic::train_lda(X, y, dim, cfg.lda);
            break;
        case classic::Kind::knn:
            out.model.model = classic::train_knn(X, y, dim, cfg.knn);
            break;
        case classic::Kind::cart:
            out.model.model = classic::train_cart(X, y, dim, cfg.cart);
            break;
        case classic::Kind::nb:
            out.model.model = classic::train_nb(X, y, dim, cfg.nb);
            break;
        case classic::Kind::svm: {
            classic::SvmConfig sc = cfg.svm;
            sc.seed = seed;
            out.model.model = classic::train_svm(X, y, dim, sc);
            break;
        }
        }
        out.model.extra_tensors.emplace(
            "tfidf.df", ad::Tensor(ad::Shape{vocab.size()}, tfidf.df_by_index()));
        out.model.extra_tensors.emplace(
            "tfidf.n", ad::Tensor(ad::Shape{1},
                                  {static_cast<double>(tfidf.corpus_size())}));
    }
    out.model.config = std::move(config);
    out.vocab = std::move(vocab);
    return out;
}

PredictContext context_for(const io::TrainedModel& tm, text::Vocabulary vocab,
                           const features::EmbeddingTable* table) {
    PredictContext ctx;
    PipelineConfig cfg = pipeline_from_json(tm.config);
    ctx.preproc = make_preprocessor(cfg);
    ctx.l2_normalize = cfg.l2_normalize;
    ctx.m_cap = std::max<std::size_t>(1, tm.config.value("m_cap", std::size_t{1}));
    ctx.n_cap = std::max<std::size_t>(1, tm.config.value("n_cap", std::size_t{1}));
    ctx.table = table;

    if (!tm.is_neural()) {
        auto df_it = tm.extra_tensors.find("tfidf.df");
        auto n_it = tm.extra_tensors.find("tfidf.n");
        if (df_it == tm.extra_tensors.end() || n_it == tm.extra_tensors.end())
            throw SchemaError("classic model container is missing its tf-idf state");
        ctx.tfidf = features::TfidfModel::restore(
            vocab, df_it->second.vec(),
            static_cast<std::size_t>(n_it->second.vec().at(0)));
    } else {
        if (!table && !tm.as_neural().owns_embeddings)
            throw Error("neural model requires an embedding table for scoring");
    }
    ctx.vocab = std::move(vocab);
    return ctx;
}

Scored score_document(const io::TrainedModel& tm, const PredictContext& ctx,
                      const corpus::LabeledDocument& doc) {
    Scored out;
    if (tm.is_neural()) {
        const auto& nm = tm.as_neural();
        // Models that own their (fine-tuned) embeddings look rows up from
        // the parameter table; the example grid then only carries indices.
        const features::EmbeddingTable empty(nm.net.embedding_dim);
        const features::EmbeddingTable* table = ctx.table ? ctx.table : &empty;
        auto ex = neural::make_example(doc, ctx.vocab, *table, ctx.preproc, ctx.m_cap,
                                       ctx.n_cap);
        const double p = neural::predict_proba(nm, ex);
        out.score = 2.0 * p - 1.0;
        out.label = out.score >= 0.0 ? +1 : -1;
    } else {
        auto tokens = ctx.preproc.flat_tokens(doc.text);
        auto x = tm.kind() == "nb" ? ctx.tfidf.counts(tokens)
                                   : ctx.tfidf.transform(tokens, ctx.l2_normalize);
        auto pred = tm.as_classic().predict(x);
        out.label = pred.label;
        out.score = pred.score;
    }
    return out;
}

// ---- cross validation -------------------------------------------------------------

std::string CvReport::to_json_string() const {
    json obj;
    obj["kind"] = kind;
    obj["k"] = k;
    obj["seed"] = seed;
    json fold_rows = json::array();
    for (std::size_t f = 0; f < folds.size(); ++f)
        fold_rows.push_back({{"fold", f},
                             {"precision", folds[f].precision},
                             {"recall", folds[f].recall},
                             {"f_score", folds[f].f_score},
                             {"accuracy", folds[f].accuracy}});
    obj["folds"] = fold_rows;
    obj["mean"] = {{"precision", mean.precision},
                   {"recall", mean.recall},
                   {"f_score", mean.f_score},
                   {"accuracy", mean.accuracy}};
    return obj.dump(2);
}

CvReport CvReport::from_json_string(const std::string& s) {
    json obj;
    try {
        obj = json::parse(s);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid cv report: ") + e.what());
    }
    CvReport report;
    report.kind = obj.at("kind").get<std::string>();
    report.k = obj.at("k").get<int>();
    report.seed = obj.at("seed").get<std::uint64_t>();
    for (const auto& row : obj.at("folds")) {
        Metrics m;
        m.precision = row.at("precision").get<double>();
        m.recall = row.at("recall").get<double>();
        m.f_score = row.at("f_score").get<double>();
        m.accuracy = row.at("accuracy").get<double>();
        report.folds.push_back(m);
    }
    const auto& mm = obj.at("mean");
    report.mean.precision = mm.at("precision").get<double>();
    report.mean.recall = mm.at("recall").get<double>();
    report.mean.f_score = mm.at("f_score").get<double>();
    report.mean.accuracy = mm.at("accuracy").get<double>();
    return report;
}

namespace {

std::string display_name(const std::string& kind) {
    if (kind == "logreg") return "Logistic Regression";
    if (kind == "lda") return "Linear Discriminant Analysis";
    if (kind == "knn") return "K-Neighbors";
    if (kind == "cart") return "Regression Trees";
    if (kind == "nb") return "Naive Bayes";
    if (kind == "svm") return "Support Vector Machines";
    if (kind == "mlp") return "MLP";
    if (kind == "rnn") return "RNN";
    if (kind == "lstm") return "LSTM";
    if (kind == "gru") return "GRU";
    if (kind == "han") return "HAN";
    return kind;
}

} // namespace

std::string CvReport::to_table() const {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-28s %-10s %-10s %-10s %-10s\n", "Algorithm",
                  "Precision", "Recall", "F-Score", "Accuracy");
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-28s %-10.6f %-10.6f %-10.6f %-10.6f\n",
                  display_name(kind).c_str(), mean.precision, mean.recall, mean.f_score,
                  mean.accuracy);
    out << buf;
    return out.str();
}

CvReport cross_validate(const std::string& kind, const corpus::Dataset& ds, int k,
                        std::uint64_t seed, const PipelineConfig& cfg,
                        const features::EmbeddingTable* table, int jobs) {
    const auto started = std::chrono::steady_clock::now();
    auto plan = corpus::stratified_kfold(ds, k, seed);

    CvReport report;
    report.kind = kind;
    report.k = k;
    report.seed = seed;
    report.folds.resize(static_cast<std::size_t>(k));

    std::vector<int> fold_of(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        fold_of[i] = plan.assignments[i].second;

    std::vector<std::string> fold_errors(static_cast<std::size_t>(k));
    auto run_fold = [&](int f) {
        try {
            corpus::Dataset train_ds, test_ds;
            train_ds.name = ds.name;
            test_ds.name = ds.name;
            for (std::size_t i = 0; i < ds.size(); ++i)
                (fold_of[i] == f ? test_ds : train_ds)
                    .documents.push_back(ds.documents[i]);

            const std::uint64_t fold_seed =
                mix_seed(seed, 0xF01D0000ULL + static_cast<std::uint64_t>(f));
            auto outcome = train_any(kind, train_ds, cfg, table, fold_seed);
            auto ctx = context_for(outcome.model, outcome.vocab, table);

            std::vector<int> predictions, golds;
            predictions.reserve(test_ds.size());
            for (const auto& doc : test_ds.documents) {
                predictions.push_back(score_document(outcome.model, ctx, doc).label);
                golds.push_back(doc.label);
            }
            report.folds[static_cast<std::size_t>(f)] =
                metrics(confusion(predictions, golds, cfg.positive_class));
        } catch (const std::exception& e) {
            fold_errors[static_cast<std::size_t>(f)] = e.what();
        }
    };

    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int f = 0; f < k; ++f) run_fold(f);
    } else {
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w)
            workers.emplace_back([&, w]() {
                for (int f = w; f < k; f += jobs) run_fold(f);
            });
        for (auto& t : workers) t.join();
    }
    for (int f = 0; f < k; ++f)
        if (!fold_errors[static_cast<std::size_t>(f)].empty())
            throw Error("fold " + std::to_string(f) + ": " +
                        fold_errors[static_cast<std::size_t>(f)]);

    for (const auto& m : report.folds) {
        report.mean.precision += m.precision;
        report.mean.recall += m.recall;
        report.mean.f_score += m.f_score;
        report.mean.accuracy += m.accuracy;
    }
    const double inv = 1.0 / static_cast<double>(k);
    report.mean.precision *= inv;
    report.mean.recall *= inv;
    report.mean.f_score *= inv;
    report.mean.accuracy *= inv;
    report.wall_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    return report;
}

} // namespace jop::eval
