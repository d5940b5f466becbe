#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "jop/corpus.hpp"
#include "jop/errors.hpp"
#include "jop/rng.hpp"
#include "jop/synth.hpp"

using namespace jop;
using namespace jop::corpus;

namespace {

Dataset tiny(std::size_t n_pos, std::size_t n_neg) {
    Dataset ds;
    ds.name = "tiny";
    for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
        LabeledDocument d;
        d.id = "d" + std::to_string(i);
        d.text = "texto " + std::to_string(i);
        d.label = i < n_pos ? 1 : -1;
        ds.documents.push_back(std::move(d));
    }
    return ds;
}

} // namespace

TEST_CASE("load_dataset keeps jsonl records in file order") {
    test::TempDir dir;
    auto path = test::write_file(dir.file("ds.jsonl"),
        R"({"id":"a","text":"absolvo o réu","label":1,"subject":"homicide"})" "\n"
        R"({"id":"b","text":"condeno o réu","label":-1,"subject":"homicide","date":"2020-01-31"})" "\n"
        R"({"id":"c","text":"absolvo","label":1})" "\n");
    auto ds = load_dataset(path, DatasetFormat::jsonl);
    REQUIRE(ds.size() == 3);
    CHECK(ds.documents[0].id == "a");
    CHECK(ds.documents[1].label == -1);
    CHECK(ds.documents[1].date.value() == "2020-01-31");
    CHECK(ds.documents[2].subject == Subject::other);
    CHECK(ds.name == "ds");
}

TEST_CASE("load_dataset rejects bad labels with the line number") {
    test::TempDir dir;
    auto path = test::write_file(dir.file("bad.jsonl"),
        R"({"id":"a","text":"x","label":1})" "\n"
        R"({"id":"b","text":"y","label":0})" "\n");
    try {
        load_dataset(path, DatasetFormat::jsonl);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_dataset rejects duplicate ids and empty text") {
    test::TempDir dir;
    auto dup = test::write_file(dir.file("dup.jsonl"),
        R"({"id":"a","text":"x","label":1})" "\n"
        R"({"id":"a","text":"y","label":-1})" "\n");
    CHECK_THROWS_AS(load_dataset(dup, DatasetFormat::jsonl), SchemaError);

    auto blank = test::write_file(dir.file("blank.jsonl"),
        R"({"id":"a","text":"  \t ","label":1})" "\n");
    CHECK_THROWS_AS(load_dataset(blank, DatasetFormat::jsonl), SchemaError);

    CHECK_THROWS_AS(load_dataset(dir.file("missing.jsonl"), DatasetFormat::jsonl),
                    IoError);
}

TEST_CASE("load_dataset accepts an empty file") {
    test::TempDir dir;
    auto ds = load_dataset(test::write_file(dir.file("empty.jsonl"), ""),
                           DatasetFormat::jsonl);
    CHECK(ds.size() == 0);
}

TEST_CASE("csv loading handles quoted text with commas and newlines") {
    test::TempDir dir;
    auto path = test::write_file(dir.file("ds.csv"),
        "id,text,label,subject,date\n"
        "a,\"condeno, com \"\"ressalvas\"\"\nsegunda linha\",-1,corruption,2019-05-02\n"
        "b,absolvo,1,,\n");
    auto ds = load_dataset(path, DatasetFormat::csv);
    REQUIRE(ds.size() == 2);
    CHECK(ds.documents[0].text == "condeno, com \"ressalvas\"\nsegunda linha");
    CHECK(ds.documents[0].subject == Subject::corruption);
    CHECK(!ds.documents[1].date.has_value());

    auto badhdr = test::write_file(dir.file("h.csv"), "id,text,label\na,x,1\n");
    CHECK_THROWS_AS(load_dataset(badhdr, DatasetFormat::csv), SchemaError);
}

TEST_CASE("jsonl round-trip preserves the dataset") {
    auto ds = synth::marker_corpus({.n_docs = 20, .seed = 3});
    test::TempDir dir;
    write_jsonl(ds, dir.file("rt.jsonl"));
    auto back = load_dataset(dir.file("rt.jsonl"), DatasetFormat::jsonl);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.documents[i].id == ds.documents[i].id);
        CHECK(back.documents[i].text == ds.documents[i].text);
        CHECK(back.documents[i].label == ds.documents[i].label);
    }
}

TEST_CASE("class_distribution counts and truncates percentages") {
    auto homicide = tiny(844, 837);
    auto d = class_distribution(homicide);
    CHECK(d.absolutions == 844);
    CHECK(d.condemnations == 837);
    CHECK(d.total == 1681);
    CHECK(d.absolution_pct == doctest::Approx(50.2));
    CHECK(d.condemnation_pct == doctest::Approx(49.7));  // truncation, not rounding

    auto corruption = tiny(197, 589);
    auto c = class_distribution(corruption);
    CHECK(c.absolutions == 197);
    CHECK(c.total == 786);
    CHECK(c.absolution_pct == doctest::Approx(25.0));
    CHECK(c.condemnation_pct == doctest::Approx(74.9));

    auto empty = class_distribution(Dataset{});
    CHECK(empty.total == 0);
    CHECK(empty.absolutions == 0);
    CHECK(empty.absolution_pct == 0.0);
}

TEST_CASE("stratified folds: exact divisibility") {
    auto ds = tiny(50, 50);
    auto plan = stratified_kfold(ds, 10, 42);
    auto sizes = plan.fold_sizes();
    for (auto s : sizes) CHECK(s == 10);
    // 5 per label in every fold
    std::vector<int> pos(10, 0);
    for (const auto& doc : ds.documents)
        if (doc.label == 1) pos[static_cast<std::size_t>(plan.fold_of(doc.id))]++;
    for (int p : pos) CHECK(p == 5);
}

TEST_CASE("stratified folds: 101 documents") {
    auto ds = tiny(51, 50);
    auto plan = stratified_kfold(ds, 10, 7);
    for (auto s : plan.fold_sizes()) CHECK((s == 10 || s == 11));

    // Brute-force check of the stratification bound, per fold and label.
    auto sizes = plan.fold_sizes();
    for (int label : {+1, -1}) {
        std::size_t class_total = 0;
        for (const auto& doc : ds.documents)
            if (doc.label == label) class_total++;
        std::vector<std::size_t> counts(10, 0);
        for (const auto& doc : ds.documents)
            if (doc.label == label)
                counts[static_cast<std::size_t>(plan.fold_of(doc.id))]++;
        for (std::size_t f = 0; f < 10; ++f) {
            double ideal = static_cast<double>(class_total) *
                           static_cast<double>(sizes[f]) /
                           static_cast<double>(ds.size());
            CHECK(std::abs(static_cast<double>(counts[f]) - ideal) <= 1.0);
        }
    }
}

TEST_CASE("stratified folds: determinism and seed sensitivity") {
    auto ds = tiny(30, 25);
    auto a = stratified_kfold(ds, 5, 99);
    auto b = stratified_kfold(ds, 5, 99);
    CHECK(a.to_json_string() == b.to_json_string());
    auto c = stratified_kfold(ds, 5, 100);
    CHECK(a.to_json_string() != c.to_json_string());
}

TEST_CASE("stratified folds: insufficient class members") {
    auto ds = tiny(3, 12);
    CHECK_THROWS_AS(stratified_kfold(ds, 5, 1), InsufficientClassError);
}

TEST_CASE("fold plans partition and stratify random datasets") {
    SplitMix64 rng(123);
    for (int iter = 0; iter < 25; ++iter) {
        const int k = 2 + static_cast<int>(rng.next_below(6));
        const std::size_t n_pos = static_cast<std::size_t>(k) + rng.next_below(40);
        const std::size_t n_neg = static_cast<std::size_t>(k) + rng.next_below(40);
        auto ds = tiny(n_pos, n_neg);
        auto plan = stratified_kfold(ds, k, rng.next_u64());

        // Partition: every id exactly once, folds in range, sizes sum.
        CHECK(plan.assignments.size() == ds.size());
        std::size_t total = 0;
        for (auto s : plan.fold_sizes()) total += s;
        CHECK(total == ds.size());
        for (const auto& [id, fold] : plan.assignments) {
            CHECK(fold >= 0);
            CHECK(fold < k);
        }

        // Stratification bound.
        auto sizes = plan.fold_sizes();
        for (int label : {+1, -1}) {
            std::size_t class_total = label == 1 ? n_pos : n_neg;
            std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
            for (const auto& doc : ds.documents)
                if (doc.label == label)
                    counts[static_cast<std::size_t>(plan.fold_of(doc.id))]++;
            for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
                double ideal = static_cast<double>(class_total) *
                               static_cast<double>(sizes[f]) /
                               static_cast<double>(ds.size());
                CHECK(std::abs(static_cast<double>(counts[f]) - ideal) <= 1.0);
            }
        }
    }
}

TEST_CASE("marker corpus is balanced and marked correctly") {
    synth::MarkerConfig cfg{.n_docs = 100, .seed = 5};
    auto ds = synth::marker_corpus(cfg);
    REQUIRE(ds.size() == 100);
    std::size_t pos = 0;
    for (const auto& doc : ds.documents) {
        const bool has_marker = doc.text.find(cfg.marker) != std::string::npos;
        CHECK(has_marker == (doc.label == 1));
        if (doc.label == 1) pos++;
    }
    CHECK(pos == 50);

    std::ostringstream emb;
    synth::write_marker_embeddings(emb, cfg, 4, 9);
    std::istringstream lines(emb.str());
    std::string first;
    std::getline(lines, first);
    CHECK(first.rfind("waa ", 0) == 0);
}
