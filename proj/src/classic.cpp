#include "jop/classic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "jop/errors.hpp"
#include "jop/rng.hpp"

namespace jop::classic {

std::string kind_name(Kind k) {
    switch (k) {
    case Kind::logreg: return "logreg";
    case Kind::lda: return "lda";
    case Kind::knn: return "knn";
    case Kind::cart: return "cart";
    case Kind::nb: return "nb";
    case Kind::svm: return "svm";
    }
    return "logreg";
}

Kind kind_from(const std::string& name) {
    if (name == "logreg") return Kind::logreg;
    if (name == "lda") return Kind::lda;
    if (name == "knn") return Kind::knn;
    if (name == "cart") return Kind::cart;
    if (name == "nb") return Kind::nb;
    if (name == "svm") return Kind::svm;
    throw Error("unknown classic model kind: " + name);
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_training_input(const Samples& X, const Labels& y, std::size_t dim,
                          std::size_t min_per_class) {
    if (X.size() != y.size())
        throw LengthMismatchError("training samples and labels differ in length");
    if (X.empty()) throw EmptyDatasetError("no training samples");
    std::size_t pos = 0, neg = 0;
    for (int label : y) {
        if (label == 1)
            ++pos;
        else if (label == -1)
            ++neg;
        else
            throw SchemaError("training label must be +1 or -1");
    }
    if (pos < min_per_class || neg < min_per_class)
        throw SingleClassError("each class needs at least " +
                               std::to_string(min_per_class) + " samples (got " +
                               std::to_string(pos) + "/" + std::to_string(neg) + ")");
    for (const auto& x : X)
        if (!x.entries.empty() &&
            static_cast<std::size_t>(x.entries.back().first) >= dim)
            throw DimensionError("sample index exceeds feature dimension");
}

void check_dim(const features::SparseVector& x, std::size_t dim) {
    if (!x.entries.empty() && static_cast<std::size_t>(x.entries.back().first) >= dim)
        throw DimensionError("feature index exceeds the model's dimension");
}

double cosine_distance(const features::SparseVector& a,
                       const features::SparseVector& b) {
    const double na = a.squared_norm(), nb = b.squared_norm();
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - a.dot(b) / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_distance_dense(const std::vector<double>& dense,
                             const features::SparseVector& b) {
    double nd = 0.0;
    for (double v : dense) nd += v * v;
    const double nb = b.squared_norm();
    if (nd == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - b.dot_dense(dense) / (std::sqrt(nd) * std::sqrt(nb));
}

} // namespace

// ---- logistic regression -------------------------------------------------------

ClassicModel train_logreg(const Samples& X, const Labels& y, std::size_t dim,
                          const LogRegConfig& cfg) {
    check_training_input(X, y, dim, 1);
    const std::size_t n = X.size();
    LogRegModel m;
    m.w.assign(dim, 0.0);
    std::vector<double> grad(dim);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(X[i].dot_dense(m.w) + m.b);
            const double err = p - (y[i] == 1 ? 1.0 : 0.0);
            for (const auto& [idx, v] : X[i].entries)
                grad[static_cast<std::size_t>(idx)] += err * v;
            grad_b += err;
        }
        const double scale = cfg.lr / static_cast<double>(n);
        for (std::size_t j = 0; j < dim; ++j)
            m.w[j] -= scale * grad[j] + cfg.lr * cfg.l2 * m.w[j];
        m.b -= scale * grad_b;
    }
    return ClassicModel(Kind::logreg, dim, std::move(m));
}

// ---- linear discriminant analysis ----------------------------------------------

namespace {

// Solves A x = b for symmetric positive definite A (in place Cholesky).
std::vector<double> spd_solve(std::vector<double> A, std::vector<double> b,
                              std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = A[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= A[j * n + k] * A[j * n + k];
        if (d < 1e-12) d = 1e-12;
        const double l = std::sqrt(d);
        A[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = A[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
            A[i * n + j] = s / l;
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= A[i * n + k] * b[k];
        b[i] /= A[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= A[k * n + ii] * b[k];
        b[ii] /= A[ii * n + ii];
    }
    return b;
}

} // namespace

ClassicModel train_lda(const Samples& X, const Labels& y, std::size_t dim,
                       const LdaConfig& cfg) {
    check_training_input(X, y, dim, 2);
    const std::size_t n = X.size();

    LdaModel m;
    m.shrinkage = cfg.shrinkage;
    m.mean_pos.assign(dim, 0.0);
    m.mean_neg.assign(dim, 0.0);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& mean = y[i] == 1 ? m.mean_pos : m.mean_neg;
        (y[i] == 1 ? n_pos : n_neg)++;
        for (const auto& [idx, v] : X[i].entries) mean[static_cast<std::size_t>(idx)] += v;
    }
    for (auto& v : m.mean_pos) v /= static_cast<double>(n_pos);
    for (auto& v : m.mean_neg) v /= static_cast<double>(n_neg);
    m.prior_pos = static_cast<double>(n_pos) / static_cast<double>(n);
    m.prior_neg = static_cast<double>(n_neg) / static_cast<double>(n);

    // Pooled within-class covariance (denominator n - 2).
    std::vector<double> cov(dim * dim, 0.0);
    std::vector<double> centered(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mean = y[i] == 1 ? m.mean_pos : m.mean_neg;
        for (std::size_t j = 0; j < dim; ++j) centered[j] = -mean[j];
        for (const auto& [idx, v] : X[i].entries)
            centered[static_cast<std::size_t>(idx)] += v;
        for (std::size_t a = 0; a < dim; ++a) {
            if (centered[a] == 0.0) continue;
            for (std::size_t b = 0; b < dim; ++b)
                cov[a * dim + b] += centered[a] * centered[b];
        }
    }
    const double denom = static_cast<double>(n - 2);
    for (auto& v : cov) v /= denom;

    // Shrink toward the diagonal, flooring so constant features stay solvable.
    double max_diag = 0.0;
    for (std::size_t j = 0; j < dim; ++j) max_diag = std::max(max_diag, cov[j * dim + j]);
    const double floor = std::max(1e-12, 1e-10 * max_diag);
    for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b) {
            double v = cov[a * dim + b];
            cov[a * dim + b] = a == b ? std::max(v, floor)
                                      : (1.0 - cfg.shrinkage) * v;
        }

    std::vector<double> diff(dim);
    for (std::size_t j = 0; j < dim; ++j) diff[j] = m.mean_pos[j] - m.mean_neg[j];
    m.w = spd_solve(std::move(cov), std::move(diff), dim);
    double mid = 0.0;
    for (std::size_t j = 0; j < dim; ++j)
        mid += 0.5 * (m.mean_pos[j] + m.mean_neg[j]) * m.w[j];
    m.c = -mid + std::log(m.prior_pos / m.prior_neg);
    return ClassicModel(Kind::lda, dim, std::move(m));
}

// ---- k nearest neighbours -----------------------------------------------------

ClassicModel train_knn(const Samples& X, const Labels& y, std::size_t dim,
                       const KnnConfig& cfg) {
    check_training_input(X, y, dim, 1);
    if (cfg.k < 1 || cfg.k > X.size())
        throw BadKError("k must be in [1, " + std::to_string(X.size()) + "], got " +
                        std::to_string(cfg.k));
    KnnModel m;
    m.x = X;
    m.y = y;
    m.k = cfg.k;
    m.centroid_pos.assign(dim, 0.0);
    m.centroid_neg.assign(dim, 0.0);
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto& c = y[i] == 1 ? m.centroid_pos : m.centroid_neg;
        (y[i] == 1 ? n_pos : n_neg)++;
        for (const auto& [idx, v] : X[i].entries) c[static_cast<std::size_t>(idx)] += v;
    }
    if (n_pos) for (auto& v : m.centroid_pos) v /= static_cast<double>(n_pos);
    if (n_neg) for (auto& v : m.centroid_neg) v /= static_cast<double>(n_neg);
    return ClassicModel(Kind::knn, dim, std::move(m));
}

// ---- decision tree --------------------------------------------------------------

namespace {

double gini(std::size_t pos, std::size_t neg) {
    const double n = static_cast<double>(pos + neg);
    if (n == 0.0) return 0.0;
    const double pp = static_cast<double>(pos) / n;
    const double pn = static_cast<double>(neg) / n;
    return 1.0 - pp * pp - pn * pn;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    // Weighted Gini never increases under a split, so gains are >= 0.
    // Zero-gain splits are taken on impure nodes (xor-style labelings are
    // unlearnable otherwise); the initial -1 admits the first candidate.
    double gain = -1.0;
};

int grow_tree(const Samples& X, const Labels& y, std::vector<std::size_t> idx,
              std::size_t depth, const CartConfig& cfg, std::vector<CartNode>& nodes) {
    std::size_t pos = 0;
    for (std::size_t i : idx)
        if (y[i] == 1) ++pos;
    const std::size_t neg = idx.size() - pos;

    auto make_leaf = [&]() {
        CartNode leaf;
        leaf.n_pos = pos;
        leaf.n_neg = neg;
        leaf.label = pos >= neg ? +1 : -1;  // majority, ties toward +1
        nodes.push_back(leaf);
        return static_cast<int>(nodes.size() - 1);
    };

    if (pos == 0 || neg == 0 || depth >= cfg.max_depth ||
        idx.size() < 2 * cfg.min_leaf)
        return make_leaf();

    // Features that are nonzero for at least one node sample; everything
    // else is constant zero here and cannot split.
    std::set<int> active;
    for (std::size_t i : idx)
        for (const auto& [f, v] : X[i].entries) active.insert(f);

    const double parent_gini = gini(pos, neg);
    SplitChoice best;
    std::vector<double> values(idx.size());
    for (int f : active) {
        for (std::size_t r = 0; r < idx.size(); ++r) values[r] = X[idx[r]].at(f);
        std::vector<double> distinct = values;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (std::size_t d = 0; d + 1 < distinct.size(); ++d) {
            const double thr = 0.5 * (distinct[d] + distinct[d + 1]);
            std::size_t lp = 0, ln = 0, rp = 0, rn = 0;
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const bool left = values[r] <= thr;
                if (y[idx[r]] == 1)
                    (left ? lp : rp)++;
                else
                    (left ? ln : rn)++;
            }
            if (lp + ln < cfg.min_leaf || rp + rn < cfg.min_leaf) continue;
            const double nl = static_cast<double>(lp + ln);
            const double nr = static_cast<double>(rp + rn);
            const double total = nl + nr;
            const double gain =
                parent_gini - (nl / total) * gini(lp, ln) - (nr / total) * gini(rp, rn);
            if (gain > best.gain) best = {f, thr, gain};
        }
    }
    if (best.feature < 0) return make_leaf();  // no admissible candidate

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx)
        (X[i].at(best.feature) <= best.threshold ? left_idx : right_idx).push_back(i);

    const int self = static_cast<int>(nodes.size());
    CartNode node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.n_pos = pos;
    node.n_neg = neg;
    nodes.push_back(node);
    const int left = grow_tree(X, y, std::move(left_idx), depth + 1, cfg, nodes);
    const int right = grow_tree(X, y, std::move(right_idx), depth + 1, cfg, nodes);
    nodes[static_cast<std::size_t>(self)].left = left;
    nodes[static_cast<std::size_t>(self)].right = right;
    return self;
}

} // namespace

ClassicModel train_cart(const Samples& X, const Labels& y, std::size_t dim,
                        const CartConfig& cfg) {
    if (X.empty()) throw EmptyDatasetError("no training samples");
    if (X.size() != y.size())
        throw LengthMismatchError("training samples and labels differ in length");
    if (cfg.min_leaf < 1) throw Error("min_leaf must be >= 1");
    CartModel m;
    std::vector<std::size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    grow_tree(X, y, std::move(idx), 0, cfg, m.nodes);
    return ClassicModel(Kind::cart, dim, std::move(m));
}

// ---- naive bayes ----------------------------------------------------------------

ClassicModel train_nb(const Samples& X_counts, const Labels& y, std::size_t dim,
                      const NbConfig& cfg) {
    check_training_input(X_counts, y, dim, 1);
    if (cfg.alpha <= 0.0) throw Error("nb smoothing alpha must be > 0");

    NbModel m;
    m.alpha = cfg.alpha;
    // Feature universe: vocabulary indices 2.. (0 and 1 are reserved).
    const std::size_t vocab_tokens = dim >= 2 ? dim - 2 : 0;
    std::vector<double> count_pos(dim, 0.0), count_neg(dim, 0.0);
    double total_pos = 0.0, total_neg = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < X_counts.size(); ++i) {
        auto& counts = y[i] == 1 ? count_pos : count_neg;
        auto& total = y[i] == 1 ? total_pos : total_neg;
        (y[i] == 1 ? n_pos : n_neg)++;
        for (const auto& [idx, v] : X_counts[i].entries) {
            counts[static_cast<std::size_t>(idx)] += v;
            total += v;
        }
    }
    m.log_prior_pos = std::log(static_cast<double>(n_pos) /
                               static_cast<double>(X_counts.size()));
    m.log_prior_neg = std::log(static_cast<double>(n_neg) /
                               static_cast<double>(X_counts.size()));
    m.log_lik_pos.assign(dim, 0.0);
    m.log_lik_neg.assign(dim, 0.0);
    const double v_size = static_cast<double>(vocab_tokens);
    for (std::size_t j = 2; j < dim; ++j) {
        m.log_lik_pos[j] =
            std::log((count_pos[j] + cfg.alpha) / (total_pos + cfg.alpha * v_size));
        m.log_lik_neg[j] =
            std::log((count_neg[j] + cfg.alpha) / (total_neg + cfg.alpha * v_size));
    }
    return ClassicModel(Kind::nb, dim, std::move(m));
}

// ---- linear svm -----------------------------------------------------------------

ClassicModel train_svm(const Samples& X, const Labels& y, std::size_t dim,
                       const SvmConfig& cfg) {
    check_training_input(X, y, dim, 1);
    if (cfg.lambda <= 0.0) throw Error("svm lambda must be > 0");

    SvmModel m;
    m.lambda = cfg.lambda;
    m.w.assign(dim, 0.0);
    const double radius = 1.0 / std::sqrt(cfg.lambda);
    SplitMix64 rng(cfg.seed);
    std::vector<std::size_t> order(X.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t i : order) {
            ++t;
            const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
            const double margin = static_cast<double>(y[i]) *
                                  (X[i].dot_dense(m.w) + m.b);
            const double decay = 1.0 - eta * cfg.lambda;
            for (auto& wj : m.w) wj *= decay;
            if (margin < 1.0) {
                const double step = eta * static_cast<double>(y[i]);
                for (const auto& [idx, v] : X[i].entries)
                    m.w[static_cast<std::size_t>(idx)] += step * v;
                m.b += step;
            }
            double norm_sq = 0.0;
            for (double wj : m.w) norm_sq += wj * wj;
            if (norm_sq > radius * radius) {
                const double scale = radius / std::sqrt(norm_sq);
                for (auto& wj : m.w) wj *= scale;
            }
        }
    }
    return ClassicModel(Kind::svm, dim, std::move(m));
}

// ---- unified prediction ----------------------------------------------------------

Prediction ClassicModel::predict(const features::SparseVector& x) const {
    check_dim(x, dim_);
    Prediction out;
    switch (kind_) {
    case Kind::logreg: {
        const auto& m = as<LogRegModel>();
        const double z = x.dot_dense(m.w) + m.b;
        out.score = z;
        out.probability = sigmoid(z);
        break;
    }
    case Kind::lda: {
        const auto& m = as<LdaModel>();
        out.score = x.dot_dense(m.w) + m.c;
        break;
    }
    case Kind::knn: {
        const auto& m = as<KnnModel>();
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(m.x.size());
        for (std::size_t i = 0; i < m.x.size(); ++i)
            order.emplace_back(cosine_distance(m.x[i], x), i);
        std::partial_sort(order.begin(), order.begin() + static_cast<long>(m.k),
                          order.end());
        int votes = 0;
        for (std::size_t i = 0; i < m.k; ++i) votes += m.y[order[i].second];
        if (votes != 0) {
            out.score = votes;
        } else {
            const double dp = cosine_distance_dense(m.centroid_pos, x);
            const double dn = cosine_distance_dense(m.centroid_neg, x);
            out.score = dp <= dn ? 0.5 : -0.5;  // exact ties go to +1
        }
        break;
    }
    case Kind::cart: {
        const auto& m = as<CartModel>();
        const CartNode* node = &m.nodes[0];
        while (!node->is_leaf()) {
            const double v = x.at(node->feature);
            node = &m.nodes[static_cast<std::size_t>(
                v <= node->threshold ? node->left : node->right)];
        }
        const double n = static_cast<double>(node->n_pos + node->n_neg);
        const double p = static_cast<double>(node->n_pos) / n;
        out.score = 2.0 * p - 1.0;
        out.probability = p;
        break;
    }
    case Kind::nb: {
        const auto& m = as<NbModel>();
        double lp = m.log_prior_pos, ln = m.log_prior_neg;
        for (const auto& [idx, v] : x.entries) {
            lp += v * m.log_lik_pos[static_cast<std::size_t>(idx)];
            ln += v * m.log_lik_neg[static_cast<std::size_t>(idx)];
        }
        out.score = lp - ln;  // log posterior odds
        const double mx = std::max(lp, ln);
        const double ep = std::exp(lp - mx), en = std::exp(ln - mx);
        out.probability = ep / (ep + en);
        break;
    }
    case Kind::svm: {
        const auto& m = as<SvmModel>();
        out.score = x.dot_dense(m.w) + m.b;
        break;
    }
    }
    out.label = out.score >= 0.0 ? +1 : -1;
    return out;
}

} // namespace jop::classic
