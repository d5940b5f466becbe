#include <doctest.h>

#include <cmath>

#include "jop/classic.hpp"
#include "jop/errors.hpp"
#include "jop/rng.hpp"
#include "jop/textproc.hpp"
#include "oracles.hpp"

using namespace jop;
using namespace jop::classic;
using features::SparseVector;

namespace {

SparseVector sv(std::vector<std::pair<int, double>> entries) {
    SparseVector v;
    for (auto& [i, w] : entries) v.set(i, w);
    return v;
}

std::vector<double> densify(const SparseVector& v, std::size_t dim) {
    std::vector<double> out(dim, 0.0);
    for (const auto& [i, w] : v.entries) out[static_cast<std::size_t>(i)] = w;
    return out;
}

double training_accuracy(const ClassicModel& m, const Samples& X, const Labels& y) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < X.size(); ++i)
        if (m.predict(X[i]).label == y[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(X.size());
}

} // namespace

// ---- logistic regression ---------------------------------------------------

TEST_CASE("logreg: zero-initialized model scores one half") {
    Samples X{sv({{0, 1.0}}), sv({{1, 1.0}})};
    Labels y{+1, -1};
    auto m = train_logreg(X, y, 2, {.epochs = 0});
    auto p = m.predict(sv({{0, 3.0}, {1, -2.0}}));
    CHECK(p.probability.value() == doctest::Approx(0.5));
    CHECK(p.label == +1);  // score 0 orients to +1
}

TEST_CASE("logreg: separable four-point set is fit within 500 epochs") {
    Samples X{sv({{0, 1.0}}), sv({{0, 2.0}}), sv({{1, 1.0}}), sv({{1, 2.0}})};
    Labels y{+1, +1, -1, -1};
    auto m = train_logreg(X, y, 2, {.epochs = 500});
    CHECK(training_accuracy(m, X, y) == 1.0);
}

TEST_CASE("logreg: identical features converge to the class prior") {
    Samples X;
    Labels y;
    for (int i = 0; i < 8; ++i) {
        X.push_back(sv({{0, 1.0}}));
        y.push_back(i < 6 ? +1 : -1);  // prior 0.75
    }
    auto m = train_logreg(X, y, 1, {.epochs = 3000, .lr = 0.5, .l2 = 0.0});
    CHECK(m.predict(X[0]).probability.value() == doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("logreg: single class is rejected") {
    Samples X{sv({{0, 1.0}}), sv({{0, 2.0}})};
    CHECK_THROWS_AS(train_logreg(X, {+1, +1}, 1, {}), SingleClassError);
}

// ---- linear discriminant analysis --------------------------------------------

TEST_CASE("lda: two unit-variance classes put the boundary at the midpoint") {
    // 1-D samples around means 0 and 2, symmetric, equal priors.
    Samples X;
    Labels y;
    for (double d : {-1.0, -0.5, 0.5, 1.0}) {
        X.push_back(sv({{0, 0.0 + d}}));
        y.push_back(-1);
        X.push_back(sv({{0, 2.0 + d}}));
        y.push_back(+1);
    }
    auto m = train_lda(X, y, 1, {});

    auto score = [&](double x) { return m.predict(sv({{0, x}})).score; };
    double lo = 0.0, hi = 2.0;
    REQUIRE(score(lo) < 0);
    REQUIRE(score(hi) > 0);
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) >= 0 ? hi : lo) = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lda: swapping class labels swaps decisions") {
    SplitMix64 rng(3);
    Samples X;
    Labels y, y_swapped;
    for (int i = 0; i < 12; ++i) {
        const int label = i % 2 == 0 ? +1 : -1;
        X.push_back(sv({{0, label + rng.next_double(-0.8, 0.8)},
                        {1, rng.next_double(-1, 1)}}));
        y.push_back(label);
        y_swapped.push_back(-label);
    }
    auto a = train_lda(X, y, 2, {});
    auto b = train_lda(X, y_swapped, 2, {});
    for (int i = 0; i < 10; ++i) {
        auto probe = sv({{0, rng.next_double(-2, 2)}, {1, rng.next_double(-2, 2)}});
        CHECK(a.predict(probe).label == -b.predict(probe).label);
    }
}

TEST_CASE("lda: zero-variance feature stays finite") {
    Samples X{sv({{0, 1.0}, {1, 5.0}}), sv({{0, 1.2}, {1, 5.0}}),
              sv({{0, 3.0}, {1, 5.0}}), sv({{0, 3.4}, {1, 5.0}})};
    Labels y{-1, -1, +1, +1};
    auto m = train_lda(X, y, 2, {});
    auto p = m.predict(sv({{0, 2.0}, {1, 5.0}}));
    CHECK(std::isfinite(p.score));
}

// ---- k nearest neighbours ------------------------------------------------------

TEST_CASE("knn: exact training point with k=1 returns its label") {
    Samples X{sv({{0, 1.0}}), sv({{1, 1.0}}), sv({{2, 1.0}})};
    Labels y{+1, -1, +1};
    auto m = train_knn(X, y, 3, {.k = 1});
    CHECK(m.predict(sv({{1, 1.0}})).label == -1);
}

TEST_CASE("knn: k equal to the training size votes the global majority") {
    Samples X{sv({{0, 1.0}}), sv({{0, 2.0}}), sv({{1, 1.0}})};
    Labels y{+1, +1, -1};
    auto m = train_knn(X, y, 2, {.k = 3});
    CHECK(m.predict(sv({{1, 9.0}})).label == +1);
}

TEST_CASE("knn: rejects out-of-range k") {
    Samples X{sv({{0, 1.0}}), sv({{1, 1.0}})};
    Labels y{+1, -1};
    CHECK_THROWS_AS(train_knn(X, y, 2, {.k = 0}), BadKError);
    CHECK_THROWS_AS(train_knn(X, y, 2, {.k = 3}), BadKError);
}

TEST_CASE("knn: agrees with the brute-force oracle including tie-breaks") {
    SplitMix64 rng(19);
    const std::size_t dim = 5;
    for (int instance = 0; instance < 100; ++instance) {
        Samples X;
        Labels y;
        std::vector<std::vector<double>> dense;
        for (int i = 0; i < 20; ++i) {
            SparseVector v;
            for (std::size_t j = 0; j < dim; ++j)
                if (rng.next_double() < 0.6)
                    v.set(static_cast<int>(j), rng.next_double(0.1, 2.0));
            dense.push_back(densify(v, dim));
            X.push_back(std::move(v));
            y.push_back(rng.next_double() < 0.5 ? +1 : -1);
        }
        SparseVector probe;
        for (std::size_t j = 0; j < dim; ++j)
            if (rng.next_double() < 0.6)
                probe.set(static_cast<int>(j), rng.next_double(0.1, 2.0));
        auto probe_dense = densify(probe, dim);
        for (std::size_t k : {1u, 2u, 3u, 4u, 5u}) {
            auto m = train_knn(X, y, dim, {.k = k});
            CHECK(m.predict(probe).label == oracle::knn_vote(dense, y, probe_dense, k));
        }
    }
}

// ---- decision tree ---------------------------------------------------------------

TEST_CASE("cart: pure data gives a single leaf") {
    Samples X{sv({{0, 1.0}}), sv({{0, 2.0}})};
    Labels y{+1, +1};
    auto m = train_cart(X, y, 1, {});
    CHECK(m.as<CartModel>().nodes.size() == 1);
    CHECK(m.predict(sv({{0, 9.0}})).label == +1);
}

TEST_CASE("cart: perfect binary split has gain one half") {
    Samples X{sv({{0, 1.0}}), sv({{0, 2.0}}), sv({{0, 5.0}}), sv({{0, 6.0}})};
    Labels y{-1, -1, +1, +1};
    auto m = train_cart(X, y, 1, {});
    const auto& nodes = m.as<CartModel>().nodes;
    REQUIRE(nodes.size() == 3);
    CHECK(nodes[0].feature == 0);
    CHECK(nodes[0].threshold == doctest::Approx(3.5));
    // Both children pure: weighted Gini 0, so the gain equals the parent
    // impurity 0.5.
    const auto& l = nodes[static_cast<std::size_t>(nodes[0].left)];
    const auto& r = nodes[static_cast<std::size_t>(nodes[0].right)];
    CHECK(l.n_pos * l.n_neg == 0);
    CHECK(r.n_pos * r.n_neg == 0);
    CHECK(m.predict(sv({{0, 0.0}})).label == -1);
    CHECK(m.predict(sv({{0, 7.0}})).label == +1);
}

TEST_CASE("cart: fits xor at depth two") {
    Samples X{sv({}), sv({{1, 1.0}}), sv({{0, 1.0}}), sv({{0, 1.0}, {1, 1.0}})};
    Labels y{-1, +1, +1, -1};
    auto m = train_cart(X, y, 2, {.max_depth = 2, .min_leaf = 1});
    CHECK(training_accuracy(m, X, y) == 1.0);
}

TEST_CASE("cart: duplicate-free data is fit exactly with min_leaf 1") {
    SplitMix64 rng(29);
    Samples X;
    Labels y;
    for (int i = 0; i < 40; ++i) {
        // Distinct values on feature 0 guarantee a duplicate-free set.
        X.push_back(sv({{0, static_cast<double>(i) + rng.next_double(0.0, 0.5)},
                        {1, rng.next_double(-1, 1)}}));
        y.push_back(rng.next_double() < 0.5 ? +1 : -1);
    }
    if (std::count(y.begin(), y.end(), +1) == 0) y[0] = +1;
    if (std::count(y.begin(), y.end(), -1) == 0) y[1] = -1;
    auto m = train_cart(X, y, 2, {.max_depth = 1u << 20, .min_leaf = 1});
    CHECK(training_accuracy(m, X, y) == 1.0);
}

// ---- naive bayes -----------------------------------------------------------------

TEST_CASE("nb: reproduces the worked smoothing example") {
    // Training: class +1 doc "good good", class -1 doc "bad"; alpha = 1;
    // test "good": posterior(+1) = 0.75 / (0.75 + 1/3) ~ 0.6923.
    corpus::Dataset ds;
    ds.documents.push_back({"p", "good good", +1, corpus::Subject::other, {}});
    ds.documents.push_back({"n", "bad", -1, corpus::Subject::other, {}});
    text::Preprocessor raw{text::StopwordList::none(), false};
    auto vocab = text::build_vocabulary(ds, 1, raw);
    auto tfidf = features::TfidfModel::fit(ds, vocab, raw);

    Samples X{tfidf.counts({"good", "good"}), tfidf.counts({"bad"})};
    Labels y{+1, -1};
    auto m = train_nb(X, y, vocab.size(), {.alpha = 1.0});
    auto p = m.predict(tfidf.counts({"good"}));
    CHECK(p.probability.value() == doctest::Approx(0.75 / (0.75 + 1.0 / 3.0)).epsilon(1e-12));
    CHECK(p.label == +1);

    // Only-unseen tokens: posterior equals the (equal) priors.
    auto q = m.predict(tfidf.counts({"unseen", "words"}));
    CHECK(q.probability.value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nb: symmetric training data gives posterior one half") {
    corpus::Dataset ds;
    ds.documents.push_back({"p", "alpha beta", +1, corpus::Subject::other, {}});
    ds.documents.push_back({"n", "gamma delta", -1, corpus::Subject::other, {}});
    text::Preprocessor raw{text::StopwordList::none(), false};
    auto vocab = text::build_vocabulary(ds, 1, raw);
    auto tfidf = features::TfidfModel::fit(ds, vocab, raw);
    Samples X{tfidf.counts({"alpha", "beta"}), tfidf.counts({"gamma", "delta"})};
    auto m = train_nb(X, {+1, -1}, vocab.size(), {});
    auto p = m.predict(tfidf.counts({"alpha", "gamma"}));
    CHECK(p.probability.value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nb: matches enumeration oracle on random small corpora") {
    SplitMix64 rng(37);
    const std::vector<std::string> lexicon{"um", "dois", "tres", "quatro", "cinco",
                                           "seis"};
    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t n_docs = 2 + rng.next_below(4);  // <= 5 docs
        std::vector<std::pair<std::vector<std::string>, int>> training;
        corpus::Dataset ds;
        bool has_pos = false, has_neg = false;
        for (std::size_t d = 0; d < n_docs; ++d) {
            std::vector<std::string> tokens;
            const std::size_t len = 1 + rng.next_below(8);
            std::string text;
            for (std::size_t i = 0; i < len; ++i) {
                tokens.push_back(lexicon[rng.next_below(lexicon.size())]);
                text += tokens.back() + " ";
            }
            int label;
            if (d == 0) label = +1;
            else if (d == 1) label = -1;
            else label = rng.next_double() < 0.5 ? +1 : -1;
            has_pos |= label == 1;
            has_neg |= label == -1;
            training.emplace_back(tokens, label);
            ds.documents.push_back({"d" + std::to_string(d), text, label,
                                    corpus::Subject::other, {}});
        }
        REQUIRE((has_pos && has_neg));
        text::Preprocessor raw{text::StopwordList::none(), false};
        auto vocab = text::build_vocabulary(ds, 1, raw);
        auto tfidf = features::TfidfModel::fit(ds, vocab, raw);

        Samples X;
        Labels y;
        for (const auto& [tokens, label] : training) {
            X.push_back(tfidf.counts(tokens));
            y.push_back(label);
        }
        const double alpha = 0.5 + rng.next_double() * 1.5;
        auto m = train_nb(X, y, vocab.size(), {.alpha = alpha});

        std::vector<std::string> probe;
        for (std::size_t i = 0; i < 1 + rng.next_below(6); ++i)
            probe.push_back(lexicon[rng.next_below(lexicon.size())]);
        const double expect = oracle::naive_bayes_posterior(training, probe, alpha);
        const double got = m.predict(tfidf.counts(probe)).probability.value();
        CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    }
}

// ---- linear svm -------------------------------------------------------------------

TEST_CASE("svm: recovers the 1-D hard-margin solution as lambda shrinks") {
    Samples X{sv({{0, -1.0}}), sv({{0, 1.0}})};
    Labels y{-1, +1};
    auto m = train_svm(X, y, 1, {.lambda = 1e-4, .epochs = 200000, .seed = 7});
    const auto& svm = m.as<SvmModel>();
    CHECK(svm.w[0] == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(svm.b) < 0.05);

    // A point at functional margin ~2 contributes zero hinge loss.
    const double margin = m.predict(sv({{0, 2.0}})).score;
    CHECK(margin > 1.5);
    CHECK(std::max(0.0, 1.0 - margin) == 0.0);
}

TEST_CASE("svm: input rescaling preserves training sign pattern") {
    SplitMix64 rng(43);
    Samples X, X10;
    Labels y;
    for (int i = 0; i < 16; ++i) {
        const int label = i % 2 == 0 ? +1 : -1;
        const double base = label * 2.0 + rng.next_double(-0.5, 0.5);
        X.push_back(sv({{0, base}, {1, rng.next_double(-1, 1)}}));
        SparseVector scaled;
        for (auto& [idx, v] : X.back().entries) scaled.set(idx, v * 10.0);
        X10.push_back(std::move(scaled));
        y.push_back(label);
    }
    auto a = train_svm(X, y, 2, {.lambda = 1e-3, .epochs = 2000, .seed = 11});
    auto b = train_svm(X10, y, 2, {.lambda = 1e-3, .epochs = 2000, .seed = 11});
    for (std::size_t i = 0; i < X.size(); ++i)
        CHECK(a.predict(X[i]).label == b.predict(X10[i]).label);
}

TEST_CASE("svm: training is deterministic for a fixed seed") {
    Samples X{sv({{0, -1.0}}), sv({{0, 1.0}}), sv({{0, -2.0}}), sv({{0, 2.0}})};
    Labels y{-1, +1, -1, +1};
    auto a = train_svm(X, y, 1, {.lambda = 0.01, .epochs = 50, .seed = 5});
    auto b = train_svm(X, y, 1, {.lambda = 0.01, .epochs = 50, .seed = 5});
    CHECK(a.as<SvmModel>().w == b.as<SvmModel>().w);
    CHECK(a.as<SvmModel>().b == b.as<SvmModel>().b);
}

// ---- facade ------------------------------------------------------------------------

TEST_CASE("predict: label is sign-consistent with score for every kind") {
    SplitMix64 rng(53);
    Samples X;
    Labels y;
    for (int i = 0; i < 12; ++i) {
        const int label = i % 2 == 0 ? +1 : -1;
        X.push_back(sv({{0, label * 1.5 + rng.next_double(-1, 1)},
                        {1, rng.next_double(0.1, 1.0)}}));
        y.push_back(label);
    }
    std::vector<ClassicModel> models;
    models.push_back(train_logreg(X, y, 2, {}));
    models.push_back(train_lda(X, y, 2, {}));
    models.push_back(train_knn(X, y, 2, {.k = 3}));
    models.push_back(train_cart(X, y, 2, {}));
    models.push_back(train_svm(X, y, 2, {.epochs = 100}));
    for (const auto& m : models) {
        for (int i = 0; i < 8; ++i) {
            auto p = m.predict(sv({{0, rng.next_double(-3, 3)}, {1, rng.next_double(0, 1)}}));
            CHECK((p.label == +1) == (p.score >= 0.0));
        }
    }
}

TEST_CASE("predict: rejects mismatched feature dimensions") {
    Samples X{sv({{0, 1.0}}), sv({{1, -1.0}})};
    Labels y{+1, -1};
    auto m = train_logreg(X, y, 2, {});
    CHECK_THROWS_AS(m.predict(sv({{5, 1.0}})), DimensionError);
}
