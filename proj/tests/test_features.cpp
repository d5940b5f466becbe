#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "jop/errors.hpp"
#include "jop/features.hpp"
#include "jop/rng.hpp"
#include "oracles.hpp"

using namespace jop;
using namespace jop::features;

namespace {

corpus::Dataset corpus_of(std::vector<std::string> texts) {
    corpus::Dataset ds;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        corpus::LabeledDocument d;
        d.id = "d" + std::to_string(i);
        d.text = std::move(texts[i]);
        d.label = i % 2 == 0 ? 1 : -1;
        ds.documents.push_back(std::move(d));
    }
    return ds;
}

const text::Preprocessor kRaw{text::StopwordList::none(), false};

TfidfModel fit_on(std::vector<std::string> texts) {
    auto ds = corpus_of(std::move(texts));
    auto vocab = text::build_vocabulary(ds, 1, kRaw);
    return TfidfModel::fit(ds, vocab, kRaw);
}

} // namespace

TEST_CASE("fit_tfidf counts distinct-document frequencies") {
    auto model = fit_on({"a b a", "b c"});
    CHECK(model.corpus_size() == 2);
    CHECK(model.document_frequency("a") == 1);
    CHECK(model.document_frequency("b") == 2);
    CHECK(model.document_frequency("c") == 1);
    CHECK(model.document_frequency("zz") == 0);

    auto single = fit_on({"x y"});
    CHECK(single.document_frequency("x") == 1);
    CHECK(single.corpus_size() == 1);

    CHECK_THROWS_AS(
        TfidfModel::fit(corpus::Dataset{}, text::Vocabulary{}, kRaw),
        EmptyDatasetError);
}

TEST_CASE("transform_tfidf applies the weighting formula") {
    auto model = fit_on({"a b a", "b c"});
    auto v = model.transform({"a", "b", "a"});
    // weight(a) = 2 ln 2; weight(b) = 1 ln(2/2) = 0, pruned.
    REQUIRE(v.nnz() == 1);
    CHECK(v.entries[0].second == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(v.at(model.vocabulary().index_of("a")) ==
          doctest::Approx(2.0 * std::log(2.0)));
    CHECK(v.at(model.vocabulary().index_of("b")) == 0.0);

    CHECK(model.transform({}).nnz() == 0);
    CHECK(model.transform({"nunca", "visto"}).nnz() == 0);
}

TEST_CASE("tfidf weights are non-negative, zero iff absent or ubiquitous") {
    auto model = fit_on({"a b", "a c", "a d"});
    auto v = model.transform({"a", "b", "d"});
    for (const auto& [i, w] : v.entries) CHECK(w > 0.0);
    CHECK(v.at(model.vocabulary().index_of("a")) == 0.0);  // in every doc
}

TEST_CASE("transform_tfidf matches the brute-force oracle on random corpora") {
    SplitMix64 rng(17);
    for (int iter = 0; iter < 50; ++iter) {
        const std::size_t n_docs = 1 + rng.next_below(10);
        std::vector<std::vector<std::string>> docs(n_docs);
        std::vector<std::string> texts(n_docs);
        for (std::size_t d = 0; d < n_docs; ++d) {
            const std::size_t len = 1 + rng.next_below(30);
            for (std::size_t i = 0; i < len; ++i) {
                std::string tok = "t" + std::to_string(rng.next_below(20));
                docs[d].push_back(tok);
                texts[d] += tok + " ";
            }
        }
        auto model = fit_on(texts);
        const auto& probe = docs[rng.next_below(n_docs)];
        auto got = model.transform(probe);
        auto expect = oracle::tfidf(docs, probe);
        REQUIRE(got.nnz() == expect.size());
        for (const auto& [tok, w] : expect) {
            const double lib = got.at(model.vocabulary().index_of(tok));
            CHECK(lib == doctest::Approx(w).epsilon(1e-12));
        }
    }
}

TEST_CASE("l2 normalization flag") {
    auto model = fit_on({"a b", "c d"});
    auto v = model.transform({"a", "b", "a"}, true);
    CHECK(std::sqrt(v.squared_norm()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("counts maps tokens onto vocabulary indices") {
    auto model = fit_on({"a b a", "b c"});
    auto c = model.counts({"a", "c", "a", "zz"});
    CHECK(c.at(model.vocabulary().index_of("a")) == 2.0);
    CHECK(c.at(model.vocabulary().index_of("c")) == 1.0);
    CHECK(c.nnz() == 2);  // zz dropped
}

TEST_CASE("embedding load parses, skips malformed lines, reports dimension") {
    std::istringstream in("casa 1.0 2.0 3.0\nverde 0.5 -1 2.25\ncurto 1 2\n");
    auto table = EmbeddingTable::load(in, 3);
    CHECK(table.size() == 2);
    CHECK(table.skipped_lines() == 1);
    REQUIRE(table.find("casa"));
    CHECK((*table.find("casa"))[2] == 3.0);

    double buf[3];
    CHECK(table.copy_to("ausente", buf) == true);  // flagged OOV
    CHECK(buf[0] == 0.0);
    CHECK(table.copy_to("verde", buf) == false);
    CHECK(buf[1] == -1.0);
}

TEST_CASE("embedding load auto-detects the count/dim header") {
    std::istringstream in("2 3\ncasa 1 2 3\nrua 4 5 6\n");
    auto table = EmbeddingTable::load(in, 3);
    CHECK(table.size() == 2);
    CHECK(table.skipped_lines() == 0);
}

TEST_CASE("embedding load fails only when every line fails") {
    std::istringstream bad("casa 1 2\nrua 4 5\n");
    CHECK_THROWS_AS(EmbeddingTable::load(bad, 3), DimensionError);
    CHECK_THROWS_AS(EmbeddingTable::load(std::filesystem::path("/no/such/file"), 3),
                    IoError);
    std::istringstream empty("");
    CHECK(EmbeddingTable::load(empty, 3).size() == 0);
}

TEST_CASE("embedding vocabulary filter keeps only requested tokens") {
    std::istringstream in("casa 1 2\nrua 3 4\nverde 5 6\n");
    std::unordered_set<std::string> keep{"casa", "verde"};
    auto table = EmbeddingTable::load(in, 2, &keep);
    CHECK(table.size() == 2);
    CHECK(!table.contains("rua"));
}

TEST_CASE("embedding parse -> serialize -> parse is the identity") {
    SplitMix64 rng(41);
    EmbeddingTable table(4);
    for (int i = 0; i < 30; ++i) {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.next_double(-3, 3);
        table.insert("tok" + std::to_string(i), std::move(v));
    }
    std::ostringstream out;
    table.serialize(out);
    std::istringstream in(out.str());
    auto back = EmbeddingTable::load(in, 4);
    CHECK(back == table);
}

TEST_CASE("embed_grid zeroes padding and unknown words") {
    auto ds = corpus_of({"casa verde"});
    auto vocab = text::build_vocabulary(ds, 1, kRaw);
    std::istringstream in("casa 1 2\nverde 3 4\n");
    auto table = EmbeddingTable::load(in, 2);

    corpus::LabeledDocument doc;
    doc.id = "x";
    doc.label = 1;
    doc.text = "casa misterio verde";
    auto hd = text::to_hierarchical(doc, vocab, 2, 4, kRaw);
    auto grid = embed_grid(table, hd, vocab);
    CHECK(grid.shape() == ad::Shape{2, 4, 2});
    CHECK(grid(0, 0, 0) == 1.0);  // casa verbatim
    CHECK(grid(0, 0, 1) == 2.0);
    CHECK(grid(0, 1, 0) == 0.0);  // OOV word, mask still true
    CHECK(hd.word_at(0, 1));
    CHECK(grid(0, 2, 1) == 4.0);  // verde
    CHECK(grid(1, 0, 0) == 0.0);  // padded sentence
    CHECK(grid(0, 3, 0) == 0.0);  // padded word
}
