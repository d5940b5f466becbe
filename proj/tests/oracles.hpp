#ifndef JOP_TESTS_ORACLES_HPP
#define JOP_TESTS_ORACLES_HPP

// Brute-force reference implementations used by unit and acceptance
// tests. Deliberately written against the formulas, independent of the
// library's code paths.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace jop::oracle {

// weight(t, d) = count(t, d) * ln(N / n_t) computed by direct scanning.
inline std::map<std::string, double> tfidf(
    const std::vector<std::vector<std::string>>& corpus_docs,
    const std::vector<std::string>& doc) {
    const double n_docs = static_cast<double>(corpus_docs.size());
    std::map<std::string, double> weights;
    for (const auto& tok : doc) {
        if (weights.count(tok)) continue;
        std::size_t df = 0;
        for (const auto& d : corpus_docs) {
            for (const auto& t : d) {
                if (t == tok) {
                    ++df;
                    break;
                }
            }
        }
        if (df == 0) continue;  // unseen at fit time
        std::size_t count = 0;
        for (const auto& t : doc)
            if (t == tok) ++count;
        const double w =
            static_cast<double>(count) * std::log(n_docs / static_cast<double>(df));
        if (w != 0.0) weights[tok] = w;
    }
    return weights;
}

// Multinomial posterior with additive smoothing, by direct enumeration.
// Returns P(class +1 | doc). Vocabulary = distinct training tokens.
inline double naive_bayes_posterior(
    const std::vector<std::pair<std::vector<std::string>, int>>& training,
    const std::vector<std::string>& doc, double alpha) {
    std::set<std::string> vocab;
    for (const auto& [tokens, label] : training)
        for (const auto& t : tokens) vocab.insert(t);

    auto class_score = [&](int label) {
        std::size_t n_docs = 0, total_tokens = 0;
        std::map<std::string, std::size_t> counts;
        for (const auto& [tokens, l] : training) {
            if (l != label) continue;
            ++n_docs;
            for (const auto& t : tokens) {
                counts[t]++;
                ++total_tokens;
            }
        }
        double log_prior = std::log(static_cast<double>(n_docs) /
                                    static_cast<double>(training.size()));
        double log_likelihood = 0.0;
        for (const auto& t : doc) {
            if (!vocab.count(t)) continue;  // unseen tokens are skipped
            const double p =
                (static_cast<double>(counts[t]) + alpha) /
                (static_cast<double>(total_tokens) +
                 alpha * static_cast<double>(vocab.size()));
            log_likelihood += std::log(p);
        }
        return log_prior + log_likelihood;
    };

    const double pos = class_score(+1);
    const double neg = class_score(-1);
    const double m = std::max(pos, neg);
    const double ep = std::exp(pos - m), en = std::exp(neg - m);
    return ep / (ep + en);
}

// k-nearest-neighbour majority vote over cosine distance, full sort.
// Selection ties break on lower training index; vote ties break toward
// the class whose centroid is nearer to the query, then toward +1.
// Vectors are dense here; the library's sparse path must agree.
inline int knn_vote(const std::vector<std::vector<double>>& train,
                    const std::vector<int>& labels,
                    const std::vector<double>& query, std::size_t k) {
    auto cosine_distance = [](const std::vector<double>& a,
                              const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        if (na == 0.0 || nb == 0.0) return 1.0;
        return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    };

    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < train.size(); ++i)
        order.emplace_back(cosine_distance(train[i], query), i);
    std::sort(order.begin(), order.end());

    int votes = 0;
    for (std::size_t i = 0; i < k; ++i)
        votes += labels[order[i].second];
    if (votes != 0) return votes > 0 ? +1 : -1;

    // Vote tie: nearer class centroid, then +1.
    std::vector<double> cpos(query.size(), 0.0), cneg(query.size(), 0.0);
    std::size_t npos = 0, nneg = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        auto& c = labels[i] == 1 ? cpos : cneg;
        for (std::size_t j = 0; j < query.size(); ++j) c[j] += train[i][j];
        (labels[i] == 1 ? npos : nneg)++;
    }
    for (auto& x : cpos) x /= static_cast<double>(npos ? npos : 1);
    for (auto& x : cneg) x /= static_cast<double>(nneg ? nneg : 1);
    const double dp = cosine_distance(cpos, query);
    const double dn = cosine_distance(cneg, query);
    if (dp < dn) return +1;
    if (dn < dp) return -1;
    return +1;
}

} // namespace jop::oracle

#endif
