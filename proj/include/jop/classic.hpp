#ifndef JOP_CLASSIC_HPP
#define JOP_CLASSIC_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jop/features.hpp"

namespace jop::classic {

enum class Kind { logreg, lda, knn, cart, nb, svm };

std::string kind_name(Kind k);
Kind kind_from(const std::string& name);

// label is +1/-1; score is sign-consistent with label (label == +1 iff
// score >= 0); probability is the model's native P(+1) where one exists.
struct Prediction {
    int label = 0;
    double score = 0.0;
    std::optional<double> probability;
};

// Hyper-parameters, all surfaced in the CLI config.
struct LogRegConfig {
    int epochs = 200;
    double lr = 0.5;
    double l2 = 1e-4;
};
struct LdaConfig {
    double shrinkage = 0.1;  // blend toward diag(cov)
};
struct KnnConfig {
    std::size_t k = 5;
};
struct CartConfig {
    std::size_t max_depth = 64;
    std::size_t min_leaf = 1;
};
struct NbConfig {
    double alpha = 1.0;  // additive smoothing
};
struct SvmConfig {
    double lambda = 1e-2;
    int epochs = 200;
    std::uint64_t seed = 42;  // sample order shuffling
};

struct LogRegModel {
    std::vector<double> w;
    double b = 0.0;
};

struct LdaModel {
    std::vector<double> mean_pos, mean_neg;
    double prior_pos = 0.5, prior_neg = 0.5;
    double shrinkage = 0.1;
    // Solved discriminant difference: score(x) = w.x + c.
    std::vector<double> w;
    double c = 0.0;
};

struct KnnModel {
    std::vector<features::SparseVector> x;
    std::vector<int> y;
    std::size_t k = 1;
    std::vector<double> centroid_pos, centroid_neg;
};

struct CartNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
    std::size_t n_pos = 0, n_neg = 0;

    bool is_leaf() const { return feature < 0; }
};

struct CartModel {
    std::vector<CartNode> nodes;  // index 0 is the root
};

struct NbModel {
    double log_prior_pos = 0.0, log_prior_neg = 0.0;
    std::vector<double> log_lik_pos, log_lik_neg;  // per vocabulary index
    double alpha = 1.0;
};

struct SvmModel {
    std::vector<double> w;
    double b = 0.0;
    double lambda = 0.0;
};

class ClassicModel {
public:
    ClassicModel() = default;
    ClassicModel(Kind kind, std::size_t dim,
                 std::variant<LogRegModel, LdaModel, KnnModel, CartModel, NbModel,
                              SvmModel> impl)
        : kind_(kind), dim_(dim), impl_(std::move(impl)) {}

    Kind kind() const { return kind_; }
    std::size_t feature_dim() const { return dim_; }

    Prediction predict(const features::SparseVector& x) const;

    template <typename T>
    const T& as() const { return std::get<T>(impl_); }

private:
    Kind kind_ = Kind::logreg;
    std::size_t dim_ = 0;
    std::variant<LogRegModel, LdaModel, KnnModel, CartModel, NbModel, SvmModel> impl_;
};

using Samples = std::vector<features::SparseVector>;
using Labels = std::vector<int>;

// Full-batch gradient descent on L2-regularized log-loss.
ClassicModel train_logreg(const Samples& X, const Labels& y, std::size_t dim,
                          const LogRegConfig& cfg = {});

// Pooled covariance with shrinkage toward its diagonal; linear
// discriminant scores with class priors.
ClassicModel train_lda(const Samples& X, const Labels& y, std::size_t dim,
                       const LdaConfig& cfg = {});

// Cosine distance, majority vote; vote ties break toward the nearer
// class centroid, then toward +1.
ClassicModel train_knn(const Samples& X, const Labels& y, std::size_t dim,
                       const KnnConfig& cfg = {});

// Greedy binary splits on Gini impurity decrease; candidate thresholds
// are midpoints between consecutive distinct observed values.
ClassicModel train_cart(const Samples& X, const Labels& y, std::size_t dim,
                        const CartConfig& cfg = {});

// Multinomial model over raw token counts with additive smoothing.
ClassicModel train_nb(const Samples& X_counts, const Labels& y, std::size_t dim,
                      const NbConfig& cfg = {});

// Primal stochastic subgradient descent (step 1/(lambda t), ball
// projection) on the margin objective.
ClassicModel train_svm(const Samples& X, const Labels& y, std::size_t dim,
                       const SvmConfig& cfg = {});

} // namespace jop::classic

#endif
