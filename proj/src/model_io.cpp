#include "jop/model_io.hpp"

#include <fstream>

#include "jop/errors.hpp"

namespace jop::io {

using nlohmann::json;
using ad::Shape;
using ad::Tensor;

namespace {

json tensor_to_json(const Tensor& t) {
    json obj;
    obj["shape"] = t.shape();
    obj["data"] = t.vec();
    return obj;
}

Tensor tensor_from_json(const json& obj) {
    Shape shape = obj.at("shape").get<Shape>();
    std::vector<double> data = obj.at("data").get<std::vector<double>>();
    return Tensor(std::move(shape), std::move(data));
}

json vec_tensor(const std::vector<double>& v) {
    return tensor_to_json(Tensor(Shape{v.size()}, v));
}

std::vector<double> vec_from(const json& tensors, const std::string& name) {
    return tensors.at(name).at("data").get<std::vector<double>>();
}

double scalar_from(const json& tensors, const std::string& name) {
    return vec_from(tensors, name).at(0);
}

json classic_tensors(const classic::ClassicModel& m) {
    using namespace classic;
    json t = json::object();
    switch (m.kind()) {
    case Kind::logreg: {
        const auto& lm = m.as<LogRegModel>();
        t["w"] = vec_tensor(lm.w);
        t["b"] = vec_tensor({lm.b});
        break;
    }
    case Kind::lda: {
        const auto& lm = m.as<LdaModel>();
        t["mean_pos"] = vec_tensor(lm.mean_pos);
        t["mean_neg"] = vec_tensor(lm.mean_neg);
        t["priors"] = vec_tensor({lm.prior_pos, lm.prior_neg});
        t["shrinkage"] = vec_tensor({lm.shrinkage});
        t["w"] = vec_tensor(lm.w);
        t["c"] = vec_tensor({lm.c});
        break;
    }
    case Kind::knn: {
        const auto& km = m.as<KnnModel>();
        std::vector<double> rowptr{0}, col, val, labels;
        for (std::size_t i = 0; i < km.x.size(); ++i) {
            for (const auto& [idx, w] : km.x[i].entries) {
                col.push_back(idx);
                val.push_back(w);
            }
            rowptr.push_back(static_cast<double>(col.size()));
            labels.push_back(km.y[i]);
        }
        t["k"] = vec_tensor({static_cast<double>(km.k)});
        t["labels"] = vec_tensor(labels);
        t["x.rowptr"] = vec_tensor(rowptr);
        t["x.col"] = vec_tensor(col);
        t["x.val"] = vec_tensor(val);
        t["centroid_pos"] = vec_tensor(km.centroid_pos);
        t["centroid_neg"] = vec_tensor(km.centroid_neg);
        break;
    }
    case Kind::cart: {
        const auto& cm = m.as<CartModel>();
        std::vector<double> feature, threshold, left, right, label, n_pos, n_neg;
        for (const auto& node : cm.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            label.push_back(node.label);
            n_pos.push_back(static_cast<double>(node.n_pos));
            n_neg.push_back(static_cast<double>(node.n_neg));
        }
        t["feature"] = vec_tensor(feature);
        t["threshold"] = vec_tensor(threshold);
        t["left"] = vec_tensor(left);
        t["right"] = vec_tensor(right);
        t["label"] = vec_tensor(label);
        t["n_pos"] = vec_tensor(n_pos);
        t["n_neg"] = vec_tensor(n_neg);
        break;
    }
    case Kind::nb: {
        const auto& nm = m.as<NbModel>();
        t["log_prior"] = vec_tensor({nm.log_prior_pos, nm.log_prior_neg});
        t["log_lik_pos"] = vec_tensor(nm.log_lik_pos);
        t["log_lik_neg"] = vec_tensor(nm.log_lik_neg);
        t["alpha"] = vec_tensor({nm.alpha});
        break;
    }
    case Kind::svm: {
        const auto& sm = m.as<SvmModel>();
        t["w"] = vec_tensor(sm.w);
        t["b"] = vec_tensor({sm.b});
        t["lambda"] = vec_tensor({sm.lambda});
        break;
    }
    }
    return t;
}

classic::ClassicModel classic_from(const std::string& kind_name, std::size_t dim,
                                   const json& t) {
    using namespace classic;
    const Kind kind = kind_from(kind_name);
    switch (kind) {
    case Kind::logreg: {
        LogRegModel m;
        m.w = vec_from(t, "w");
        m.b = scalar_from(t, "b");
        return ClassicModel(kind, dim, std::move(m));
    }
    case Kind::lda: {
        LdaModel m;
        m.mean_pos = vec_from(t, "mean_pos");
        m.mean_neg = vec_from(t, "mean_neg");
        auto priors = vec_from(t, "priors");
        m.prior_pos = priors.at(0);
        m.prior_neg = priors.at(1);
        m.shrinkage = scalar_from(t, "shrinkage");
        m.w = vec_from(t, "w");
        m.c = scalar_from(t, "c");
        return ClassicModel(kind, dim, std::move(m));
    }
    case Kind::knn: {
        KnnModel m;
        m.k = static_cast<std::size_t>(scalar_from(t, "k"));
        auto rowptr = vec_from(t, "x.rowptr");
        auto col = vec_from(t, "x.col");
        auto val = vec_from(t, "x.val");
        for (std::size_t i = 0; i + 1 < rowptr.size(); ++i) {
            features::SparseVector v;
            for (std::size_t j = static_cast<std::size_t>(rowptr[i]);
                 j < static_cast<std::size_t>(rowptr[i + 1]); ++j)
                v.set(static_cast<int>(col[j]), val[j]);
            m.x.push_back(std::move(v));
        }
        for (double l : vec_from(t, "labels")) m.y.push_back(static_cast<int>(l));
        m.centroid_pos = vec_from(t, "centroid_pos");
        m.centroid_neg = vec_from(t, "centroid_neg");
        return ClassicModel(kind, dim, std::move(m));
    }
    case Kind::cart: {
        CartModel m;
        auto feature = vec_from(t, "feature");
        auto threshold = vec_from(t, "threshold");
        auto left = vec_from(t, "left");
        auto right = vec_from(t, "right");
        auto label = vec_from(t, "label");
        auto n_pos = vec_from(t, "n_pos");
        auto n_neg = vec_from(t, "n_neg");
        for (std::size_t i = 0; i < feature.size(); ++i) {
            CartNode node;
            node.feature = static_cast<int>(feature[i]);
            node.threshold = threshold[i];
            node.left = static_cast<int>(left[i]);
            node.right = static_cast<int>(right[i]);
            node.label = static_cast<int>(label[i]);
            node.n_pos = static_cast<std::size_t>(n_pos[i]);
            node.n_neg = static_cast<std::size_t>(n_neg[i]);
            m.nodes.push_back(node);
        }
        return ClassicModel(kind, dim, std::move(m));
    }
    case Kind::nb: {
        NbModel m;
        auto prior = vec_from(t, "log_prior");
        m.log_prior_pos = prior.at(0);
        m.log_prior_neg = prior.at(1);
        m.log_lik_pos = vec_from(t, "log_lik_pos");
        m.log_lik_neg = vec_from(t, "log_lik_neg");
        m.alpha = scalar_from(t, "alpha");
        return ClassicModel(kind, dim, std::move(m));
    }
    case Kind::svm: {
        SvmModel m;
        m.w = vec_from(t, "w");
        m.b = scalar_from(t, "b");
        m.lambda = scalar_from(t, "lambda");
        return ClassicModel(kind, dim, std::move(m));
    }
    }
    throw SchemaError("unknown classic kind: " + kind_name);
}

} // namespace

std::string TrainedModel::kind() const {
    if (is_neural()) return neural::kind_name(as_neural().kind);
    return classic::kind_name(as_classic().kind());
}

std::string to_json_string(const TrainedModel& tm) {
    json obj;
    obj["format_version"] = 1;
    obj["kind"] = tm.kind();
    obj["config"] = tm.config;
    obj["vocabulary_ref"] = tm.vocabulary_ref;
    obj["metadata"] = {{"seed", tm.seed}, {"train_loss_curve", tm.train_loss_curve}};

    json tensors = json::object();
    if (tm.is_neural()) {
        const auto& nm = tm.as_neural();
        for (const auto& [name, tensor] : nm.params) tensors[name] = tensor_to_json(tensor);
        obj["config"]["net"] = {{"embedding_dim", nm.net.embedding_dim},
                                {"hidden", nm.net.hidden},
                                {"attention_dim", nm.net.attention_dim},
                                {"m_cap", nm.net.m_cap},
                                {"n_cap", nm.net.n_cap}};
    } else {
        tensors = classic_tensors(tm.as_classic());
        obj["config"]["feature_dim"] = tm.as_classic().feature_dim();
    }
    for (const auto& [name, tensor] : tm.extra_tensors)
        tensors[name] = tensor_to_json(tensor);
    obj["tensors"] = tensors;
    return obj.dump(2);
}

TrainedModel from_json_string(const std::string& s) {
    json obj;
    try {
        obj = json::parse(s);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid model container: ") + e.what());
    }
    if (obj.value("format_version", 0) != 1)
        throw SchemaError("unsupported model container version");

    TrainedModel tm;
    tm.config = obj.at("config");
    tm.vocabulary_ref = obj.value("vocabulary_ref", "");
    if (obj.contains("metadata")) {
        tm.seed = obj["metadata"].value("seed", std::uint64_t{0});
        if (obj["metadata"].contains("train_loss_curve"))
            tm.train_loss_curve =
                obj["metadata"]["train_loss_curve"].get<std::vector<double>>();
    }

    const std::string kind = obj.at("kind").get<std::string>();
    const json& tensors = obj.at("tensors");
    const bool neural_kind = kind == "mlp" || kind == "rnn" || kind == "lstm" ||
                             kind == "gru" || kind == "han";
    if (neural_kind) {
        neural::NeuralModel nm;
        nm.kind = neural::kind_from(kind);
        const json& net = tm.config.at("net");
        nm.net.embedding_dim = net.at("embedding_dim").get<std::size_t>();
        nm.net.hidden = net.at("hidden").get<std::size_t>();
        nm.net.attention_dim = net.at("attention_dim").get<std::size_t>();
        nm.net.m_cap = net.at("m_cap").get<std::size_t>();
        nm.net.n_cap = net.at("n_cap").get<std::size_t>();
        // Tensors rebuilt in the canonical parameter order so that a
        // reloaded model serializes identically.
        auto reference = neural::init_model(nm.kind, nm.net, 0);
        for (const auto& [name, t] : reference.params)
            nm.params.add(name, tensor_from_json(tensors.at(name)));
        if (tensors.contains("embedding.table")) {
            nm.params.add("embedding.table", tensor_from_json(tensors.at("embedding.table")));
            nm.owns_embeddings = true;
        }
        tm.model = std::move(nm);
    } else {
        const std::size_t dim = tm.config.at("feature_dim").get<std::size_t>();
        tm.model = classic_from(kind, dim, tensors);
    }
    for (const auto& [name, value] : tensors.items())
        if (name.rfind("tfidf.", 0) == 0)
            tm.extra_tensors.emplace(name, tensor_from_json(value));
    return tm;
}

void save(const TrainedModel& tm, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path.string());
    out << to_json_string(tm) << '\n';
}

TrainedModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path.string());
    std::string content(std::istreambuf_iterator<char>(in),
                        std::istreambuf_iterator<char>{});
    return from_json_string(content);
}

} // namespace jop::io
